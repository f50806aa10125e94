#pragma once

// Feature weighting and reduction: the robustness-aware distance evaluation
// (PIDE), its conventional counterpart (CIDE), and the PCA / LDA baselines.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vibdiag/error.hpp"
#include "vibdiag/feature_matrix.hpp"

namespace vibdiag {

// ---------------------------------------------------------------------------
// Standardization

/// Per-column z-scoring with the sample (N-1) standard deviation. Constant
/// columns map to zero and are flagged.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;      // 1 for constant columns
  std::vector<bool> constant;

  static Standardizer fit(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows(), cols = x.cols();
    Standardizer s;
    s.mean = Eigen::VectorXd::Zero(cols);
    s.scale = Eigen::VectorXd::Ones(cols);
    s.constant.assign(static_cast<std::size_t>(cols), false);
    if (n == 0) return s;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double m = x.col(j).mean();
      double ss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) ss += (x(i, j) - m) * (x(i, j) - m);
      const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      s.mean(j) = m;
      // A spread at round-off level of the column's magnitude is constant.
      if (sd > 1e-14 * std::max(1.0, std::abs(m))) {
        s.scale(j) = sd;
      } else {
        s.constant[static_cast<std::size_t>(j)] = true;
      }
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size()) throw DataError("standardizer: column count mismatch");
    Eigen::MatrixXd z(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (constant[static_cast<std::size_t>(j)]) {
        z.col(j).setZero();
      } else {
        z.col(j) = (x.col(j).array() - mean(j)) / scale(j);
      }
    }
    return z;
  }

  Eigen::VectorXd apply_row(const Eigen::VectorXd& row) const {
    Eigen::VectorXd z(row.size());
    for (Eigen::Index j = 0; j < row.size(); ++j)
      z(j) = constant[static_cast<std::size_t>(j)] ? 0.0 : (row(j) - mean(j)) / scale(j);
    return z;
  }

  std::size_t constant_count() const {
    return static_cast<std::size_t>(std::count(constant.begin(), constant.end(), true));
  }
};

struct StandardizedMatrix {
  LabeledFeatureMatrix matrix;
  Standardizer params;
};

inline StandardizedMatrix standardize(const LabeledFeatureMatrix& m) {
  StandardizedMatrix out{m, Standardizer::fit(m.q)};
  out.matrix.q = out.params.apply(m.q);
  return out;
}

// ---------------------------------------------------------------------------
// Distance evaluation

struct DistanceStats {
  Eigen::VectorXd within;   // d_w per feature
  Eigen::VectorXd between;  // d_b per feature
};

/// d_w[j]: mean over classes of the mean absolute difference over ordered
/// within-class pairs (single-sample classes contribute 0).
/// d_b[j]: mean absolute difference of class means over unordered class pairs.
inline DistanceStats intra_inter(const LabeledFeatureMatrix& m) {
  const auto groups = m.class_rows();
  if (groups.size() < 2) throw DataError("intra_inter: need at least 2 classes");
  const Eigen::Index cols = m.q.cols();
  const double num_classes = static_cast<double>(groups.size());
  DistanceStats out{Eigen::VectorXd::Zero(cols), Eigen::VectorXd::Zero(cols)};

  std::vector<Eigen::VectorXd> class_means;
  for (const auto& [label, rows] : groups) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(cols);
    for (auto r : rows) mu += m.q.row(static_cast<Eigen::Index>(r)).transpose();
    mu /= static_cast<double>(rows.size());
    class_means.push_back(std::move(mu));

    const std::size_t ns = rows.size();
    if (ns < 2) continue;
    const double pairs = static_cast<double>(ns * (ns - 1));
    for (Eigen::Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < ns; ++a)
        for (std::size_t b = 0; b < ns; ++b)
          if (a != b)
            acc += std::abs(m.q(static_cast<Eigen::Index>(rows[a]), j) -
                            m.q(static_cast<Eigen::Index>(rows[b]), j));
      out.within(j) += acc / pairs;
    }
  }
  out.within /= num_classes;

  const std::size_t s = class_means.size();
  const double class_pairs = static_cast<double>(s * (s - 1) / 2);
  for (Eigen::Index j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = a + 1; b < s; ++b) acc += std::abs(class_means[a](j) - class_means[b](j));
    out.between(j) = acc / class_pairs;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Robustness of an ordered feature series

enum class Normalizer {
  std_dev,   // scale = sample standard deviation of the series
  relative,  // scale_k = |x_k|
};

/// Centered moving average; the window is truncated at the ends and the mean
/// is taken over the samples that remain.
inline std::vector<double> moving_average(std::span<const double> x, std::size_t width) {
  const std::size_t n = x.size();
  const std::size_t half = width / 2;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(n - 1, k + half);
    // Averaging offsets from x[k] keeps flat stretches exactly flat.
    double acc = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) acc += x[i] - x[k];
    out[k] = x[k] + acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// Rob = (1/K) sum_k exp(-|x_k - trend_k| / scale), in (0, 1]. A zero scale
/// (constant series, or x_k = 0 in relative mode) contributes exp(0) = 1.
inline double robustness(std::span<const double> series, std::size_t smoothing_window = 5,
                         Normalizer mode = Normalizer::std_dev) {
  const std::size_t k = series.size();
  if (k == 0) throw DataError("robustness: empty series");
  if (smoothing_window < 1 || smoothing_window % 2 == 0)
    throw ConfigError("robustness: smoothing window must be odd and >= 1");
  const auto trend = moving_average(series, smoothing_window);

  double scale = 0.0;
  if (mode == Normalizer::std_dev) {
    if (k < 2) return 1.0;
    const double ref = series[0];
    double mean = 0.0;
    for (double v : series) mean += v - ref;
    mean /= static_cast<double>(k);
    double ss = 0.0;
    for (double v : series) ss += (v - ref - mean) * (v - ref - mean);
    scale = std::sqrt(ss / static_cast<double>(k - 1));
    if (!(scale > 0.0)) return 1.0;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double s = mode == Normalizer::std_dev ? scale : std::abs(series[i]);
    acc += s > 0.0 ? std::exp(-std::abs(series[i] - trend[i]) / s) : 1.0;
  }
  return acc / static_cast<double>(k);
}

/// Robustness of one column: per-class series in dataset order, averaged over classes.
inline double column_robustness(const LabeledFeatureMatrix& m, Eigen::Index column,
                                std::size_t smoothing_window, Normalizer mode) {
  const auto groups = m.class_rows();
  double acc = 0.0;
  std::vector<double> series;
  for (const auto& [label, rows] : groups) {
    series.clear();
    for (auto r : rows) series.push_back(m.q(static_cast<Eigen::Index>(r), column));
    acc += robustness(series, smoothing_window, mode);
  }
  return acc / static_cast<double>(groups.size());
}

// ---------------------------------------------------------------------------
// Distance-evaluation weights

inline constexpr double kDefaultThreshold = 0.92;
inline constexpr double kWithinEpsilon = 1e-12;

struct WeightingConfig {
  double threshold = kDefaultThreshold;
  std::size_t smoothing_window = 5;
  Normalizer normalizer = Normalizer::std_dev;
  bool use_robustness = true;  // false gives the conventional (CIDE) weights
};

struct FeatureWeights {
  std::vector<std::string> names;
  Eigen::VectorXd within;      // d_w
  Eigen::VectorXd between;     // d_b
  Eigen::VectorXd rob;         // 1 when robustness is disabled
  Eigen::VectorXd w;           // normalized to max 1
  double threshold = kDefaultThreshold;
  std::vector<std::size_t> selected;  // ascending, w_j >= threshold

  std::vector<std::size_t> select(double t) const {
    std::vector<std::size_t> out;
    for (Eigen::Index j = 0; j < w.size(); ++j)
      if (w(j) >= t) out.push_back(static_cast<std::size_t>(j));
    return out;
  }

  Eigen::VectorXd selected_weights() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(selected.size()));
    for (std::size_t i = 0; i < selected.size(); ++i) out(static_cast<Eigen::Index>(i)) = w(static_cast<Eigen::Index>(selected[i]));
    return out;
  }
};

/// Expects a standardized matrix. raw_j = d_b / (d_w + eps) * Rob_j, w = raw / max(raw).
inline FeatureWeights pide_weights(const LabeledFeatureMatrix& m, const WeightingConfig& config = {}) {
  m.validate();
  if (!(config.threshold >= 0.0 && config.threshold <= 1.0))
    throw ConfigError("threshold must lie in [0, 1]");
  const auto dist = intra_inter(m);
  const Eigen::Index cols = m.q.cols();
  FeatureWeights fw;
  fw.names = m.names;
  fw.within = dist.within;
  fw.between = dist.between;
  fw.rob = Eigen::VectorXd::Ones(cols);
  fw.threshold = config.threshold;
  if (config.use_robustness)
    for (Eigen::Index j = 0; j < cols; ++j)
      fw.rob(j) = column_robustness(m, j, config.smoothing_window, config.normalizer);

  Eigen::VectorXd raw(cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    raw(j) = dist.between(j) / (dist.within(j) + kWithinEpsilon) * fw.rob(j);
  const double top = raw.maxCoeff();
  if (!(top > 0.0)) throw DataError("feature weighting: every feature has zero weight (degenerate dataset)");
  fw.w = raw / top;
  fw.selected = fw.select(config.threshold);
  return fw;
}

inline FeatureWeights cide_weights(const LabeledFeatureMatrix& m, double threshold = kDefaultThreshold) {
  WeightingConfig c;
  c.threshold = threshold;
  c.use_robustness = false;
  return pide_weights(m, c);
}

/// One row per feature: name, d_w, d_b, rob, w, selected.
inline void write_weights_report(const std::filesystem::path& path, const FeatureWeights& fw) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "feature,d_w,d_b,rob,w,selected\n";
  for (Eigen::Index j = 0; j < fw.w.size(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    out << (uj < fw.names.size() ? fw.names[uj] : "f" + std::to_string(j + 1)) << ','
        << detail::format_double(fw.within(j)) << ',' << detail::format_double(fw.between(j)) << ','
        << detail::format_double(fw.rob(j)) << ',' << detail::format_double(fw.w(j)) << ','
        << (std::binary_search(fw.selected.begin(), fw.selected.end(), uj) ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Linear projections

struct LinearProjection {
  Eigen::VectorXd mean;       // J
  Eigen::MatrixXd basis;      // J x d
  Eigen::VectorXd explained;  // per component

  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != mean.size()) throw DataError("projection: dimension mismatch");
    return (rows.rowwise() - mean.transpose()) * basis;
  }

  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& reduced) const {
    return (reduced * basis.transpose()).rowwise() + mean.transpose();
  }
};

namespace detail {

/// Flip each column so its largest-magnitude entry is positive.
inline void fix_signs(Eigen::MatrixXd& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) *= -1.0;
  }
}

}  // namespace detail

/// Top-d eigenvectors of the sample covariance, descending eigenvalues.
inline LinearProjection pca_fit(const LabeledFeatureMatrix& m, std::size_t d) {
  const Eigen::Index cols = m.q.cols(), n = m.q.rows();
  if (d < 1 || static_cast<Eigen::Index>(d) > cols)
    throw ConfigError("pca: components must lie in [1, " + std::to_string(cols) + "]");
  if (n < 2) throw DataError("pca: need at least 2 rows");
  LinearProjection p;
  p.mean = m.q.colwise().mean().transpose();
  const Eigen::MatrixXd centered = m.q.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DataError("pca: eigendecomposition failed");
  const Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const auto dd = static_cast<Eigen::Index>(d);
  p.basis = vectors.leftCols(dd);
  detail::fix_signs(p.basis);
  const double total = values.sum();
  p.explained = total > 0.0 ? Eigen::VectorXd(values.head(dd) / total) : Eigen::VectorXd::Zero(dd);
  return p;
}

/// Top-d generalized eigenvectors of S_b v = lambda (S_w + gamma I) v, with
/// gamma = 1e-6 trace(S_w) / J (falling back to 1e-6 max(trace(S_b) / J, 1)
/// when S_w vanishes). Columns are normalized so v' (S_w + gamma I) v = 1.
inline LinearProjection lda_fit(const LabeledFeatureMatrix& m, std::size_t d) {
  const auto groups = m.class_rows();
  const Eigen::Index cols = m.q.cols();
  if (groups.size() < 2) throw DataError("lda: need at least 2 classes");
  if (d < 1 || d > groups.size() - 1)
    throw ConfigError("lda: components must lie in [1, " + std::to_string(groups.size() - 1) + "]");
  if (static_cast<Eigen::Index>(d) > cols) throw ConfigError("lda: more components than features");

  LinearProjection p;
  p.mean = m.q.colwise().mean().transpose();
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(cols, cols);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(cols, cols);
  for (const auto& [label, rows] : groups) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(cols);
    for (auto r : rows) mu += m.q.row(static_cast<Eigen::Index>(r)).transpose();
    mu /= static_cast<double>(rows.size());
    for (auto r : rows) {
      const Eigen::VectorXd c = m.q.row(static_cast<Eigen::Index>(r)).transpose() - mu;
      sw.noalias() += c * c.transpose();
    }
    const Eigen::VectorXd b = mu - p.mean;
    sb.noalias() += static_cast<double>(rows.size()) * b * b.transpose();
  }
  double gamma = 1e-6 * sw.trace() / static_cast<double>(cols);
  if (!(gamma > 0.0)) gamma = 1e-6 * std::max(sb.trace() / static_cast<double>(cols), 1.0);
  const Eigen::MatrixXd reg = sw + gamma * Eigen::MatrixXd::Identity(cols, cols);

  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(sb, reg);
  if (eig.info() != Eigen::Success) throw DataError("lda: generalized eigendecomposition failed");
  const Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const auto dd = static_cast<Eigen::Index>(d);
  p.basis = vectors.leftCols(dd);
  detail::fix_signs(p.basis);
  const double total = values.sum();
  p.explained = total > 0.0 ? Eigen::VectorXd(values.head(dd) / total) : Eigen::VectorXd::Zero(dd);
  return p;
}

// ---------------------------------------------------------------------------
// Selection stage as fitted on training rows

enum class Method { pide, cide, pca, lda, none };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::pide: return "pide";
    case Method::cide: return "cide";
    case Method::pca: return "pca";
    case Method::lda: return "lda";
    case Method::none: return "none";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "pide") return Method::pide;
  if (s == "cide") return Method::cide;
  if (s == "pca") return Method::pca;
  if (s == "lda") return Method::lda;
  if (s == "none") return Method::none;
  throw ConfigError("unknown selection method '" + std::string(s) + "' (pide|cide|pca|lda|none)");
}

struct SelectionConfig {
  Method method = Method::pide;
  WeightingConfig weighting;
  std::size_t components = 0;  // PCA: 0 = all features; LDA: 0 = classes - 1
};

/// Outcome of fitting the selection stage on a training set.
///
/// Weighting methods keep raw columns (`columns`) with per-column weights;
/// the classifier standardizes them itself. Projection methods emit
/// standardized-then-projected rows with unit weights.
struct FittedSelection {
  Method method = Method::none;
  Standardizer standardizer;
  std::vector<std::size_t> columns;
  Eigen::VectorXd weights;
  std::optional<FeatureWeights> feature_weights;
  std::optional<LinearProjection> projection;

  bool projects() const { return projection.has_value(); }

  std::size_t output_dim() const { return static_cast<std::size_t>(weights.size()); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const {
    if (projection) return projection->transform(standardizer.apply(raw));
    Eigen::MatrixXd out(raw.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c)
      out.col(static_cast<Eigen::Index>(c)) = raw.col(static_cast<Eigen::Index>(columns[c]));
    return out;
  }
};

inline FittedSelection fit_selection(const LabeledFeatureMatrix& train, const SelectionConfig& config) {
  train.validate();
  FittedSelection fs;
  fs.method = config.method;
  const auto z = standardize(train);
  fs.standardizer = z.params;
  switch (config.method) {
    case Method::pide:
    case Method::cide: {
      WeightingConfig wc = config.weighting;
      wc.use_robustness = config.method == Method::pide;
      auto fw = pide_weights(z.matrix, wc);
      if (fw.selected.empty())
        throw DataError("no feature reaches the weight threshold " + detail::format_double(wc.threshold));
      fs.columns = fw.selected;
      fs.weights = fw.selected_weights();
      fs.feature_weights = std::move(fw);
      break;
    }
    case Method::pca:
    case Method::lda: {
      const std::size_t d = config.components != 0
                                ? config.components
                                : (config.method == Method::pca ? train.cols() : train.classes().size() - 1);
      fs.projection = config.method == Method::pca ? pca_fit(z.matrix, d) : lda_fit(z.matrix, d);
      fs.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d));
      break;
    }
    case Method::none:
      for (std::size_t j = 0; j < train.cols(); ++j) fs.columns.push_back(j);
      fs.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(train.cols()));
      break;
  }
  return fs;
}

}  // namespace vibdiag
