#pragma once

#include "vibdiag/classify.hpp"
#include "vibdiag/config.hpp"
#include "vibdiag/error.hpp"
#include "vibdiag/eval.hpp"
#include "vibdiag/feature_matrix.hpp"
#include "vibdiag/features.hpp"
#include "vibdiag/ingest.hpp"
#include "vibdiag/pipeline.hpp"
#include "vibdiag/random.hpp"
#include "vibdiag/selection.hpp"
#include "vibdiag/transforms.hpp"
