#pragma once

// Weighted K-nearest-neighbour classification and stratified cross-validation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vibdiag/error.hpp"
#include "vibdiag/feature_matrix.hpp"
#include "vibdiag/random.hpp"
#include "vibdiag/selection.hpp"

namespace vibdiag {

inline constexpr std::size_t kDefaultNeighbors = 2;
inline constexpr double kVoteDelta = 1e-12;

struct WknnModel {
  Eigen::MatrixXd train_x;   // standardized when `standardizer` is set
  std::vector<int> train_y;
  std::vector<int> classes;  // sorted
  Eigen::VectorXd w;
  std::size_t k = kDefaultNeighbors;
  std::optional<Standardizer> standardizer;
  std::vector<std::string> feature_names;

  std::size_t dim() const { return static_cast<std::size_t>(train_x.cols()); }
};

struct Prediction {
  int label = 0;
  std::vector<double> scores;  // aligned with WknnModel::classes, sums to 1
};

/// Lazy learner: validates and stores (optionally standardized) training rows.
inline WknnModel wknn_fit(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& w,
                          std::size_t k = kDefaultNeighbors, bool standardize_rows = true) {
  if (x.cols() == 0) throw ConfigError("wknn: no features selected");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("wknn: label count != row count");
  if (w.size() != x.cols()) throw ConfigError("wknn: weight count != feature count");
  if (k < 1 || k > y.size())
    throw ConfigError("wknn: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(y.size()) + "]");
  if (!w.allFinite() || (w.array() < 0.0).any()) throw ConfigError("wknn: weights must be finite and >= 0");
  if (!(w.maxCoeff() > 0.0)) throw ConfigError("wknn: all feature weights are zero");
  if (!x.allFinite()) throw DataError("wknn: training data contains non-finite values");

  WknnModel m;
  m.train_y.assign(y.begin(), y.end());
  m.classes = m.train_y;
  std::sort(m.classes.begin(), m.classes.end());
  m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
  m.w = w;
  m.k = k;
  if (standardize_rows) {
    m.standardizer = Standardizer::fit(x);
    m.train_x = m.standardizer->apply(x);
  } else {
    m.train_x = x;
  }
  return m;
}

/// h_i = sqrt(sum_j w_j (x_j - y_ij)^2); the k nearest vote with weight
/// 1 / (h_i + delta). Ties in score go to the smallest class id.
inline Prediction wknn_predict(const WknnModel& model, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != model.dim())
    throw DataError("wknn: query has " + std::to_string(x.size()) + " features, model expects " +
                    std::to_string(model.dim()));
  if (!x.allFinite()) throw DataError("wknn: query contains non-finite values");
  const Eigen::VectorXd q = model.standardizer ? model.standardizer->apply_row(x) : x;

  const auto n = static_cast<std::size_t>(model.train_x.rows());
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto diff = q.transpose() - model.train_x.row(static_cast<Eigen::Index>(i));
    h[i] = std::sqrt((model.w.transpose().array() * diff.array().square()).sum());
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(model.k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return h[a] < h[b] || (h[a] == h[b] && a < b); });

  Prediction p;
  p.scores.assign(model.classes.size(), 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    const auto pos = std::lower_bound(model.classes.begin(), model.classes.end(), model.train_y[i]) -
                     model.classes.begin();
    const double vote = 1.0 / (h[i] + kVoteDelta);
    p.scores[static_cast<std::size_t>(pos)] += vote;
    total += vote;
  }
  std::size_t best = 0;
  for (std::size_t c = 0; c < p.scores.size(); ++c) {
    p.scores[c] /= total;
    if (p.scores[c] > p.scores[best]) best = c;
  }
  p.label = model.classes[best];
  return p;
}

inline std::vector<Prediction> wknn_predict_rows(const WknnModel& model, const Eigen::MatrixXd& rows) {
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.push_back(wknn_predict(model, Eigen::VectorXd(rows.row(i).transpose())));
  return out;
}

// ---------------------------------------------------------------------------
// Selection stage + classifier, fitted together on one training set

struct FittedClassifier {
  FittedSelection selection;
  WknnModel model;
  std::vector<std::string> input_names;  // full feature vector the selection reads

  std::vector<Prediction> predict(const Eigen::MatrixXd& raw_rows) const {
    return wknn_predict_rows(model, selection.apply(raw_rows));
  }
};

inline FittedClassifier fit_classifier(const LabeledFeatureMatrix& train, const SelectionConfig& config,
                                       std::size_t k = kDefaultNeighbors) {
  FittedClassifier fc;
  fc.input_names = train.names;
  fc.selection = fit_selection(train, config);
  const Eigen::MatrixXd reduced = fc.selection.apply(train.q);
  fc.model = wknn_fit(reduced, train.labels, fc.selection.weights, k, !fc.selection.projects());
  if (fc.selection.projects()) {
    for (std::size_t c = 0; c < fc.selection.output_dim(); ++c)
      fc.model.feature_names.push_back(std::string(to_string(config.method)) + ".C" + std::to_string(c + 1));
  } else {
    for (auto j : fc.selection.columns)
      fc.model.feature_names.push_back(j < train.names.size() ? train.names[j] : "f" + std::to_string(j + 1));
  }
  return fc;
}

/// Fits on `train_rows` only.
inline FittedClassifier fit_fold(const LabeledFeatureMatrix& m, std::span<const std::size_t> train_rows,
                                 const SelectionConfig& config, std::size_t k = kDefaultNeighbors) {
  return fit_classifier(m.subset(train_rows), config, k);
}

// ---------------------------------------------------------------------------
// Stratified cross-validation

/// Fold id per row. Each class is shuffled with its own stream derived from
/// (seed, class id) and dealt round-robin; the dealing position carries over
/// between classes so total fold sizes also stay within one of each other.
inline std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                                 std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  for (const auto& [label, rows] : groups)
    if (rows.size() < folds)
      throw ConfigError("class " + std::to_string(label) + " has " + std::to_string(rows.size()) +
                        " sample(s), fewer than " + std::to_string(folds) + " folds");
  const Rng master(seed);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t next = 0;
  for (auto& [label, rows] : groups) {
    Rng rng = master.split(static_cast<std::uint64_t>(static_cast<std::int64_t>(label)));
    rng.shuffle(std::span<std::size_t>(rows));
    for (auto r : rows) {
      fold[r] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

struct FoldResult {
  double accuracy = 0.0;
  std::size_t n_selected = 0;
  std::vector<std::size_t> test_rows;
};

struct CvResult {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;      // sample std over folds
  std::vector<int> classes;
  std::vector<int> predicted;     // out-of-fold label per row
  std::vector<std::vector<double>> scores;  // out-of-fold class scores per row
};

inline CvResult cross_validate(const LabeledFeatureMatrix& m, const SelectionConfig& config,
                               std::size_t k = kDefaultNeighbors, std::size_t folds = 5,
                               std::uint64_t seed = 0) {
  m.validate();
  const auto assignment = stratified_folds(m.labels, folds, seed);
  CvResult cv;
  cv.classes = m.classes();
  cv.predicted.assign(m.rows(), 0);
  cv.scores.assign(m.rows(), {});
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < m.rows(); ++i) (assignment[i] == f ? test_rows : train_rows).push_back(i);
    const auto fitted = fit_fold(m, train_rows, config, k);
    const auto test = m.subset(test_rows);
    const auto preds = fitted.predict(test.q);
    FoldResult fr;
    fr.n_selected = fitted.selection.output_dim();
    std::size_t correct = 0;
    for (std::size_t t = 0; t < test_rows.size(); ++t) {
      const std::size_t row = test_rows[t];
      cv.predicted[row] = preds[t].label;
      // Re-align scores to the full class list (a fold can miss no class,
      // since every class has >= folds samples, but keep it explicit).
      std::vector<double> s(cv.classes.size(), 0.0);
      for (std::size_t c = 0; c < fitted.model.classes.size(); ++c) {
        const auto pos = std::lower_bound(cv.classes.begin(), cv.classes.end(), fitted.model.classes[c]) -
                         cv.classes.begin();
        s[static_cast<std::size_t>(pos)] = preds[t].scores[c];
      }
      cv.scores[row] = std::move(s);
      if (preds[t].label == m.labels[row]) ++correct;
    }
    fr.accuracy = static_cast<double>(correct) / static_cast<double>(test_rows.size());
    fr.test_rows = std::move(test_rows);
    cv.folds.push_back(std::move(fr));
  }
  double sum = 0.0;
  for (const auto& f : cv.folds) sum += f.accuracy;
  cv.mean_accuracy = sum / static_cast<double>(folds);
  double ss = 0.0;
  for (const auto& f : cv.folds) ss += (f.accuracy - cv.mean_accuracy) * (f.accuracy - cv.mean_accuracy);
  cv.std_accuracy = std::sqrt(ss / static_cast<double>(folds - 1));
  return cv;
}

// ---------------------------------------------------------------------------
// Serialization (JSON, self-describing)

namespace detail {

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto r = vector_from_json(j[i]);
    if (r.size() != cols) throw DataError("model file: ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

inline nlohmann::json to_json(const Standardizer& s) {
  return {{"mean", to_json(s.mean)}, {"scale", to_json(s.scale)}, {"constant", s.constant}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean = vector_from_json(j.at("mean"));
  s.scale = vector_from_json(j.at("scale"));
  s.constant = j.at("constant").get<std::vector<bool>>();
  return s;
}

}  // namespace detail

inline nlohmann::json to_json(const WknnModel& m) {
  nlohmann::json j;
  j["k"] = m.k;
  j["classes"] = m.classes;
  j["feature_names"] = m.feature_names;
  j["weights"] = detail::to_json(m.w);
  j["standardizer"] = m.standardizer ? detail::to_json(*m.standardizer) : nlohmann::json(nullptr);
  j["train_y"] = m.train_y;
  j["train_x"] = detail::to_json(m.train_x);
  return j;
}

inline WknnModel wknn_from_json(const nlohmann::json& j) {
  WknnModel m;
  m.k = j.at("k").get<std::size_t>();
  m.classes = j.at("classes").get<std::vector<int>>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.w = detail::vector_from_json(j.at("weights"));
  if (!j.at("standardizer").is_null()) m.standardizer = detail::standardizer_from_json(j.at("standardizer"));
  m.train_y = j.at("train_y").get<std::vector<int>>();
  m.train_x = detail::matrix_from_json(j.at("train_x"), m.w.size());
  if (m.train_y.size() != static_cast<std::size_t>(m.train_x.rows())) throw DataError("model file: label count mismatch");
  return m;
}

inline constexpr const char* kModelFormat = "vibdiag-wknn";

inline void save_classifier(const std::filesystem::path& path, const FittedClassifier& fc) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = 1;
  j["method"] = std::string(to_string(fc.selection.method));
  j["input_names"] = fc.input_names;
  j["columns"] = fc.selection.columns;
  j["selection_standardizer"] = detail::to_json(fc.selection.standardizer);
  if (fc.selection.projection) {
    j["projection"] = {{"mean", detail::to_json(fc.selection.projection->mean)},
                       {"basis", detail::to_json(fc.selection.projection->basis)},
                       {"explained", detail::to_json(fc.selection.projection->explained)}};
  }
  j["model"] = to_json(fc.model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

inline FittedClassifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != kModelFormat) throw DataError("'" + path.string() + "' is not a vibdiag model");
    FittedClassifier fc;
    fc.selection.method = parse_method(j.at("method").get<std::string>());
    fc.input_names = j.at("input_names").get<std::vector<std::string>>();
    fc.selection.columns = j.at("columns").get<std::vector<std::size_t>>();
    fc.selection.standardizer = detail::standardizer_from_json(j.at("selection_standardizer"));
    if (j.contains("projection")) {
      LinearProjection p;
      p.mean = detail::vector_from_json(j["projection"].at("mean"));
      p.explained = detail::vector_from_json(j["projection"].at("explained"));
      p.basis = detail::matrix_from_json(j["projection"].at("basis"), p.explained.size());
      fc.selection.projection = std::move(p);
    }
    fc.model = wknn_from_json(j.at("model"));
    fc.selection.weights = fc.model.w;
    return fc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model '" + path.string() + "': " + e.what());
  }
}

}  // namespace vibdiag
