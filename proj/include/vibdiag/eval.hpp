#pragma once

// Metrics, noise injection, the robustness and threshold experiments, and the
// rank-based hypothesis tests used to compare methods.

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vibdiag/classify.hpp"
#include "vibdiag/error.hpp"
#include "vibdiag/feature_matrix.hpp"
#include "vibdiag/random.hpp"
#include "vibdiag/selection.hpp"

namespace vibdiag {

// ---------------------------------------------------------------------------
// Confusion matrix and accuracy

struct ConfusionMatrix {
  std::vector<int> classes;                       // sorted
  std::vector<std::vector<std::size_t>> counts;   // [true][predicted]

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& r : counts) t += std::accumulate(r.begin(), r.end(), std::size_t{0});
    return t;
  }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
  }
};

struct BinaryCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Class set defaults to the distinct values of y_true; predictions outside
/// it are an error.
inline ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::vector<int> classes = {}) {
  if (y_true.empty()) throw DataError("confusion: empty inputs");
  if (y_true.size() != y_pred.size()) throw DataError("confusion: length mismatch");
  if (classes.empty()) classes.assign(y_true.begin(), y_true.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  ConfusionMatrix cm{classes, std::vector<std::vector<std::size_t>>(classes.size(),
                                                                     std::vector<std::size_t>(classes.size(), 0))};
  const auto index = [&](int label) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label) throw DataError("confusion: unknown label " + std::to_string(label));
    return static_cast<std::size_t>(it - classes.begin());
  };
  for (std::size_t i = 0; i < y_true.size(); ++i) ++cm.counts[index(y_true[i])][index(y_pred[i])];
  return cm;
}

inline double accuracy(const ConfusionMatrix& cm) {
  const auto t = cm.total();
  if (t == 0) throw DataError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(t);
}

/// Marginalizes class `pos` (an index into cm.classes) against the rest.
inline BinaryCounts one_vs_rest(const ConfusionMatrix& cm, std::size_t pos) {
  BinaryCounts b;
  for (std::size_t t = 0; t < cm.classes.size(); ++t)
    for (std::size_t p = 0; p < cm.classes.size(); ++p) {
      const auto c = cm.counts[t][p];
      if (t == pos && p == pos) b.tp += c;
      else if (t == pos) b.fn += c;
      else if (p == pos) b.fp += c;
      else b.tn += c;
    }
  return b;
}

inline double binary_accuracy(const BinaryCounts& b) {
  return static_cast<double>(b.tp + b.tn) / static_cast<double>(b.tp + b.tn + b.fn + b.fp);
}

inline void write_confusion(std::ostream& out, const ConfusionMatrix& cm) {
  out << "true\\predicted";
  for (int c : cm.classes) out << ',' << c;
  out << '\n';
  for (std::size_t t = 0; t < cm.classes.size(); ++t) {
    out << cm.classes[t];
    for (auto c : cm.counts[t]) out << ',' << c;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// ROC AUC

namespace detail {

/// 1-based midranks (ties share the average rank); also returns sum(t^3 - t).
inline std::vector<double> midranks(std::span<const double> v, double* tie_term = nullptr) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  double ties = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_term) *tie_term = ties;
  return ranks;
}

}  // namespace detail

/// Mann-Whitney AUC of `scores` for `positive`; ties count one half.
/// nullopt when either side is empty.
inline std::optional<double> binary_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (positive.size() != scores.size()) throw DataError("binary_auc: length mismatch");
  const auto ranks = detail::midranks(scores);
  double rank_sum = 0.0;
  std::size_t np = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (positive[i]) {
      rank_sum += ranks[i];
      ++np;
    }
  const std::size_t nn = scores.size() - np;
  if (np == 0 || nn == 0) return std::nullopt;
  const double u = rank_sum - static_cast<double>(np) * static_cast<double>(np + 1) / 2.0;
  return u / (static_cast<double>(np) * static_cast<double>(nn));
}

struct AucReport {
  std::vector<int> classes;
  std::vector<std::optional<double>> per_class;  // nullopt = undefined (no positives or negatives)
  double macro = 0.0;                            // mean over defined classes
  std::size_t defined = 0;
};

/// One-vs-rest AUC per class from per-class scores (rows aligned with y_true,
/// columns aligned with `classes`).
inline AucReport roc_auc_ovr(const std::vector<std::vector<double>>& scores, std::span<const int> y_true,
                             const std::vector<int>& classes) {
  if (scores.size() != y_true.size() || scores.empty()) throw DataError("roc_auc: length mismatch or empty input");
  AucReport r;
  r.classes = classes;
  double sum = 0.0;
  std::vector<double> col(scores.size());
  std::vector<bool> pos(scores.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].size() != classes.size()) throw DataError("roc_auc: score row width != class count");
      col[i] = scores[i][c];
      pos[i] = y_true[i] == classes[c];
    }
    const auto auc = binary_auc(col, pos);
    r.per_class.push_back(auc);
    if (auc) {
      sum += *auc;
      ++r.defined;
    }
  }
  r.macro = r.defined ? sum / static_cast<double>(r.defined) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Noise injection

struct NoiseSpec {
  double instance_ratio = 0.0;
  double feature_ratio = 0.0;
  std::uint64_t seed = 0;
};

struct NoisyMatrix {
  Eigen::MatrixXd values;
  std::vector<std::size_t> rows;                           // selected rows
  std::vector<std::size_t> cols;                           // selected columns
  std::vector<std::pair<std::size_t, std::size_t>> touched;  // (row, col)
};

/// ceil(ratio * n), robust to products like 0.3 * 10 landing just above an integer.
inline std::size_t ratio_count(double ratio, std::size_t n) {
  const double x = ratio * static_cast<double>(n);
  const auto c = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
  return std::min(c, n);
}

/// Picks ceil(instance_ratio N) rows and ceil(feature_ratio J) columns without
/// replacement; each selected cell is replaced by a uniform draw from
/// [mu - 2 sigma, mu + 2 sigma] of its column before injection (sample sigma).
/// Draw order: column by column in selection order, rows in selection order.
inline NoisyMatrix inject_noise(const Eigen::MatrixXd& x, const NoiseSpec& spec) {
  if (!(spec.instance_ratio >= 0.0 && spec.instance_ratio <= 1.0) ||
      !(spec.feature_ratio >= 0.0 && spec.feature_ratio <= 1.0))
    throw ConfigError("noise ratios must lie in [0, 1]");
  NoisyMatrix out{x, {}, {}, {}};
  const auto n = static_cast<std::size_t>(x.rows());
  const auto j = static_cast<std::size_t>(x.cols());
  const std::size_t nr = ratio_count(spec.instance_ratio, n);
  const std::size_t nc = ratio_count(spec.feature_ratio, j);
  if (nr == 0 || nc == 0) return out;
  Rng rng(spec.seed);
  Rng row_rng = rng.split(1), col_rng = rng.split(2), value_rng = rng.split(3);
  out.rows = row_rng.sample_without_replacement(n, nr);
  out.cols = col_rng.sample_without_replacement(j, nc);
  for (auto c : out.cols) {
    const auto col = x.col(static_cast<Eigen::Index>(c));
    const double mu = col.mean();
    const double sigma = n > 1 ? std::sqrt((col.array() - mu).square().sum() / static_cast<double>(n - 1)) : 0.0;
    for (auto r : out.rows) {
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          value_rng.uniform(mu - 2.0 * sigma, mu + 2.0 * sigma);
      out.touched.emplace_back(r, c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rank tests

struct TestResult {
  double statistic = 0.0;  // H for Kruskal-Wallis, Z for Wilcoxon
  int df = 0;              // Kruskal-Wallis only
  double p_value = 1.0;
  bool degenerate = false;
  double w_plus = 0.0;     // Wilcoxon only
  std::size_t n = 0;       // observations used
};

/// H with midranks and tie correction; p from the chi-square upper tail.
inline TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DataError("kruskal_wallis: need at least 2 groups");
  std::vector<double> all;
  for (const auto& g : groups) {
    if (g.empty()) throw DataError("kruskal_wallis: empty group");
    all.insert(all.end(), g.begin(), g.end());
  }
  const std::size_t n = all.size();
  if (n < 3) throw DataError("kruskal_wallis: need at least 3 observations");
  for (double v : all)
    if (std::isnan(v)) throw DataError("kruskal_wallis: NaN observation");
  double ties = 0.0;
  const auto ranks = detail::midranks(all, &ties);
  const double nd = static_cast<double>(n);
  TestResult r;
  r.n = n;
  r.df = static_cast<int>(groups.size()) - 1;
  const double correction = 1.0 - ties / (nd * nd * nd - nd);
  if (!(correction > 0.0)) {
    r.degenerate = true;
    return r;
  }
  double h = 0.0;
  std::size_t pos = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rs += ranks[pos + i];
    pos += g.size();
    const double gn = static_cast<double>(g.size());
    const double dev = rs / gn - (nd + 1.0) / 2.0;
    h += gn * dev * dev;
  }
  h *= 12.0 / (nd * (nd + 1.0));
  h /= correction;
  r.statistic = h;
  r.p_value = h > 0.0 ? boost::math::gamma_q(0.5 * r.df, 0.5 * h) : 1.0;
  return r;
}

/// Normal approximation with tie correction and a 0.5 continuity correction
/// toward the mean (never past it); two-sided p.
inline TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("wilcoxon: samples must have equal length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (std::isnan(d)) throw DataError("wilcoxon: NaN observation");
    if (d != 0.0) diffs.push_back(d);
  }
  TestResult r;
  r.n = diffs.size();
  if (diffs.empty()) {
    r.degenerate = true;
    return r;
  }
  std::vector<double> mags(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) mags[i] = std::abs(diffs[i]);
  double ties = 0.0;
  const auto ranks = detail::midranks(mags, &ties);
  for (std::size_t i = 0; i < diffs.size(); ++i)
    if (diffs[i] > 0.0) r.w_plus += ranks[i];
  const double n = static_cast<double>(diffs.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
  double dev = r.w_plus - mean;
  dev = std::abs(dev) <= 0.5 ? 0.0 : dev - std::copysign(0.5, dev);
  if (!(var > 0.0)) {
    r.degenerate = true;
    return r;
  }
  r.statistic = dev / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(std::abs(r.statistic) / std::sqrt(2.0)));
  return r;
}

// ---------------------------------------------------------------------------
// Robustness experiment

/// Robustness (per class, averaged) of every column of `out_space`.
inline std::vector<double> representation_robustness(const Eigen::MatrixXd& out_space,
                                                     const std::vector<int>& labels,
                                                     const WeightingConfig& wc) {
  LabeledFeatureMatrix rep{out_space, labels, {}};
  std::vector<double> r;
  for (Eigen::Index c = 0; c < out_space.cols(); ++c)
    r.push_back(column_robustness(rep, c, wc.smoothing_window, wc.normalizer));
  return r;
}

struct RobustnessRow {
  Method method = Method::pide;
  double ratio = 0.0;
  double mean = 0.0;  // over trials and output features
  double std = 0.0;   // sample std over trials and output features
};

struct RobustnessExperiment {
  std::vector<Method> methods;
  std::vector<double> ratios;
  std::size_t trials = 0;
  std::vector<RobustnessRow> rows;  // method-major, then ratio
  // Per (method, ratio, trial): mean and std of robustness over output
  // features; index [method][ratio * trials + trial]. Paired across methods.
  std::vector<std::vector<double>> trial_means;
  std::vector<std::vector<double>> trial_stds;
};

namespace detail {

inline std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

/// For every ratio r and trial, one noisy copy of the matrix
/// (instance_ratio = feature_ratio = r) is shared by all methods, so results
/// are paired. r = 0 leaves the data clean.
inline RobustnessExperiment robustness_experiment(const LabeledFeatureMatrix& m, const std::vector<Method>& methods,
                                                  const std::vector<double>& ratios, std::size_t trials,
                                                  std::uint64_t seed, const SelectionConfig& base = {}) {
  m.validate();
  if (trials < 1) throw ConfigError("robustness: trials must be >= 1");
  for (auto method : methods)
    if (method == Method::none) throw ConfigError("robustness: method 'none' has no output representation");
  for (double r : ratios)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("robustness: noise ratios must lie in [0, 1)");

  RobustnessExperiment ex;
  ex.methods = methods;
  ex.ratios = ratios;
  ex.trials = trials;
  ex.trial_means.assign(methods.size(), std::vector<double>(ratios.size() * trials));
  ex.trial_stds.assign(methods.size(), std::vector<double>(ratios.size() * trials));
  std::vector<std::vector<std::vector<double>>> pooled(methods.size(), std::vector<std::vector<double>>(ratios.size()));
  const Rng master(seed);
  for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
    for (std::size_t t = 0; t < trials; ++t) {
      const std::uint64_t task = static_cast<std::uint64_t>(ri * trials + t);
      const auto noisy = inject_noise(m.q, {ratios[ri], ratios[ri], master.split(task).seed()});
      const LabeledFeatureMatrix nm{noisy.values, m.labels, m.names};
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        SelectionConfig sc = base;
        sc.method = methods[mi];
        const auto fitted = fit_selection(nm, sc);
        const Eigen::MatrixXd z = fitted.standardizer.apply(nm.q);
        Eigen::MatrixXd rep;
        if (fitted.projects()) {
          rep = fitted.projection->transform(z);
        } else {
          rep.resize(z.rows(), static_cast<Eigen::Index>(fitted.columns.size()));
          for (std::size_t c = 0; c < fitted.columns.size(); ++c)
            rep.col(static_cast<Eigen::Index>(c)) = z.col(static_cast<Eigen::Index>(fitted.columns[c]));
        }
        const auto rob = representation_robustness(rep, m.labels, base.weighting);
        const auto [mu, sd] = detail::mean_std(rob);
        ex.trial_means[mi][task] = mu;
        ex.trial_stds[mi][task] = sd;
        pooled[mi][ri].insert(pooled[mi][ri].end(), rob.begin(), rob.end());
      }
    }
  }
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
      const auto [mu, sd] = detail::mean_std(pooled[mi][ri]);
      ex.rows.push_back({methods[mi], ratios[ri], mu, sd});
    }
  return ex;
}

struct RobustnessTests {
  TestResult kruskal_mean;  // across methods, per-trial mean robustness
  TestResult kruskal_std;   // across methods, per-trial std of robustness
  // reference method (first in the list) vs each other method, paired by (ratio, trial)
  std::vector<Method> others;
  std::vector<TestResult> wilcoxon_mean;
  std::vector<TestResult> wilcoxon_std;
};

inline RobustnessTests robustness_tests(const RobustnessExperiment& ex) {
  if (ex.methods.size() < 2) throw ConfigError("robustness tests need at least 2 methods");
  RobustnessTests t;
  t.kruskal_mean = kruskal_wallis(ex.trial_means);
  t.kruskal_std = kruskal_wallis(ex.trial_stds);
  for (std::size_t mi = 1; mi < ex.methods.size(); ++mi) {
    t.others.push_back(ex.methods[mi]);
    t.wilcoxon_mean.push_back(wilcoxon_signed_rank(ex.trial_means[0], ex.trial_means[mi]));
    t.wilcoxon_std.push_back(wilcoxon_signed_rank(ex.trial_stds[0], ex.trial_stds[mi]));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepRow {
  double threshold = 0.0;
  std::size_t n_selected = 0;  // on the full dataset
  double accuracy = 0.0;       // mean CV accuracy
  double accuracy_std = 0.0;
};

/// PIDE threshold sweep. Selected counts come from weights fitted on the full
/// (standardized) dataset; accuracies from cross_validate at each threshold.
inline std::vector<SweepRow> threshold_sweep(const LabeledFeatureMatrix& m, const std::vector<double>& thresholds,
                                             const SelectionConfig& base, std::size_t k, std::size_t folds,
                                             std::uint64_t seed) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0)) throw ConfigError("sweep: thresholds must lie in [0, 1]");
    if (i > 0 && thresholds[i] < thresholds[i - 1]) throw ConfigError("sweep: thresholds must be ascending");
  }
  SelectionConfig sc = base;
  if (sc.method != Method::pide && sc.method != Method::cide) sc.method = Method::pide;
  WeightingConfig wc = sc.weighting;
  wc.use_robustness = sc.method == Method::pide;
  const auto full = pide_weights(standardize(m).matrix, wc);

  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    SweepRow row;
    row.threshold = t;
    row.n_selected = full.select(t).size();
    if (!rows.empty() && row.n_selected > rows.back().n_selected)
      throw std::logic_error("threshold sweep: selected count increased with the threshold");
    sc.weighting.threshold = t;
    const auto cv = cross_validate(m, sc, k, folds, seed);
    row.accuracy = cv.mean_accuracy;
    row.accuracy_std = cv.std_accuracy;
    rows.push_back(row);
  }
  return rows;
}

/// lo, lo + step, ..., hi (inclusive, endpoints snapped to the grid).
inline std::vector<double> linear_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw ConfigError("grid: need step > 0 and hi >= lo");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo + static_cast<double>(i) * step;
  // Round to the step's decimal grid so printed values are clean.
  for (auto& v : g) v = std::round(v * 1e12) / 1e12;
  return g;
}

}  // namespace vibdiag
