// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Criterion 13 needs the real bearing recordings; set VIBDIAG_DATASET_CONFIG
// to a config whose [data] section points at them, otherwise it is skipped.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include "oracles.hpp"
#include "vibdiag/vibdiag.hpp"

using namespace vibdiag;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > budget_s) {
    out.pass = false;
    out.detail += " (over time budget)";
  }
  if (!out.pass) ++failures;
  std::printf("%s %2d %s: %s [%.2fs]\n", out.pass ? "PASS" : "FAIL", id, name, out.detail.c_str(), secs);
  std::fflush(stdout);
}

// Collects failed checks; the first few are echoed in the detail text.
struct Checks {
  int failed = 0;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failed++ < 3) notes << what << "; ";
  }
  Outcome done(const std::string& summary) const {
    return {failed == 0, failed == 0 ? summary : std::to_string(failed) + " check(s) failed: " + notes.str()};
  }
};

std::string num(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

LabeledFeatureMatrix labeled(const Eigen::MatrixXd& q, std::vector<int> labels) {
  LabeledFeatureMatrix m;
  m.q = q;
  m.labels = std::move(labels);
  for (Eigen::Index j = 0; j < q.cols(); ++j) m.names.push_back("f" + std::to_string(j));
  return m;
}

LabeledFeatureMatrix random_labeled(std::mt19937_64& g, int rows, int cols, int classes) {
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd q(rows, cols);
  std::vector<int> y;
  for (int i = 0; i < rows; ++i) {
    y.push_back(1 + i % classes);
    for (int j = 0; j < cols; ++j) q(i, j) = n(g) + 0.5 * (j % 3) * y.back();
  }
  return labeled(q, y);
}

// ---------------------------------------------------------------------------

Outcome feature_count() {
  std::mt19937_64 g(1);
  const auto x = oracle::random_vector(g, kDefaultWindowLength);
  const auto fv = fuse(x, WaveletParams::daubechies(10, 4));
  Checks c;
  c.expect(fv.values.size() == 112, "values " + std::to_string(fv.values.size()));
  c.expect(fv.names.size() == 112, "names " + std::to_string(fv.names.size()));
  c.expect(std::set<std::string>(fv.names.begin(), fv.names.end()).size() == 112, "duplicate names");
  return c.done("112 named features per window");
}

Outcome stat16_oracle() {
  std::mt19937_64 g(100);
  std::uniform_int_distribution<std::size_t> len(2, 300);
  Checks c;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = oracle::random_vector(g, len(g), -3.0, 5.0);
    const auto got = stat16(v);
    const auto want = oracle::stat16(v);
    const double sd = want[3];
    // Cancellations (mean, odd moments, skewness) are judged on their natural
    // scale, since their exact value can be arbitrarily close to 0.
    const std::array<double, 16> natural{want[2], 0, 0, 0, 0, 0, 1, 0, std::pow(sd, 3), std::pow(sd, 4),
                                         std::pow(sd, 5), std::pow(sd, 6), 0, 0, 0, 0};
    for (std::size_t i = 0; i < 16; ++i) {
      const double rel = std::abs(got.f[i] - want[i]) / std::max({std::abs(want[i]), natural[i], 1e-300});
      worst = std::max(worst, rel);
      c.expect(rel <= 1e-12, "trial " + std::to_string(trial) + " F" + std::to_string(i + 1) + " rel " + num(rel));
    }
  }
  // Degenerate inputs: constant and all-zero vectors.
  const auto k = stat16(std::vector<double>{2, 2, 2, 2});
  for (int i : {4, 6, 7, 8, 9, 10, 11, 12, 13, 14}) c.expect(k[i] == 0.0, "constant F" + std::to_string(i));
  c.expect(k[1] == 2 && k[3] == 2 && k[5] == 1 && k[15] == 1 && std::abs(k[16] - std::log(4.0)) < 1e-15,
           "constant ratios");
  const auto z = stat16(std::vector<double>(9, 0.0));
  for (int i = 1; i <= 16; ++i) c.expect(z[i] == 0.0, "all-zero F" + std::to_string(i));
  return c.done("100 vectors, worst relative error " + num(worst) + "; degenerate rules hold");
}

Outcome dwt_round_trip() {
  std::mt19937_64 g(2048);
  const auto x = oracle::random_vector(g, 2048);
  const auto w = WaveletParams::daubechies(10, 4);
  const auto y = dwt_reconstruct(dwt_decompose(x, w), w);
  double err = 0;
  for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - y[i]));
  Checks c;
  c.expect(y.size() == x.size() && err < 1e-8, "round trip error " + num(err));
  const auto h = dwt_decompose(std::vector<double>{1, 1, 1, 1}, WaveletParams::daubechies(1, 1));
  c.expect(h.approximation.size() == 2 && h.details.size() == 1 && h.details[0].size() == 2, "haar shape");
  for (double a : h.approximation) c.expect(std::abs(a - std::sqrt(2.0)) <= 1e-12, "haar A " + num(a));
  for (double d : h.details[0]) c.expect(std::abs(d) <= 1e-12, "haar D " + num(d));
  return c.done("db10 x4 max error " + num(err) + "; Haar [1,1,1,1] exact");
}

Outcome fft_identities() {
  Checks c;
  std::mt19937_64 g(5);
  double worst = 0;
  for (std::size_t n : {16u, 100u, 2048u}) {
    const auto x = oracle::random_vector(g, n);
    const auto m = fft_magnitude(x).magnitudes;
    double spectral = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double mk = m[k <= n / 2 ? k : n - k];
      spectral += mk * mk;
    }
    double energy = 0;
    for (double v : x) energy += v * v;
    const double rel = std::abs(spectral / static_cast<double>(n) - energy) / energy;
    worst = std::max(worst, rel);
    c.expect(rel <= 1e-9, "parseval n=" + std::to_string(n));
  }
  for (std::size_t n : {8u, 256u, 2048u})
    for (std::size_t bin : {1u, 3u, 17u}) {
      if (bin >= n / 2) continue;
      std::vector<double> x(n);
      for (std::size_t t = 0; t < n; ++t) x[t] = std::cos(2.0 * M_PI * static_cast<double>(bin * t) / static_cast<double>(n));
      const auto m = fft_magnitude(x).magnitudes;
      const auto peak = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
      c.expect(peak == bin, "tone n=" + std::to_string(n) + " bin " + std::to_string(bin) + " -> " + std::to_string(peak));
    }
  return c.done("Parseval worst relative " + num(worst) + "; tones land in their bins");
}

Outcome distance_oracle() {
  std::mt19937_64 g(20);
  std::uniform_int_distribution<int> rows(6, 50), cols(1, 20), classes(2, 5);
  Checks c;
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_labeled(g, rows(g), cols(g), classes(g));
    const auto got = intra_inter(m);
    const auto want = oracle::intra_inter(m.q, m.labels);
    for (Eigen::Index j = 0; j < m.q.cols(); ++j) {
      const auto js = static_cast<std::size_t>(j);
      const double ew = std::abs(got.within(j) - want.within[js]) / std::max(1.0, want.within[js]);
      const double eb = std::abs(got.between(j) - want.between[js]) / std::max(1.0, want.between[js]);
      worst = std::max({worst, ew, eb});
      c.expect(ew <= 1e-12 && eb <= 1e-12, "trial " + std::to_string(trial) + " column " + std::to_string(j));
    }
  }
  return c.done("20 instances, worst error " + num(worst));
}

Outcome robustness_metric() {
  Checks c;
  c.expect(robustness(std::vector<double>(15, 3.3)) == 1.0, "constant series (std)");
  c.expect(robustness(std::vector<double>(15, -0.7), 5, Normalizer::relative) == 1.0, "constant series (relative)");
  // Mean-zero +-1 series, window covering the whole series at every
  // position: trend 0, residual 1, scale |x_k| = 1.
  const std::vector<double> unit{1, -1, -1, 1, 1, -1, 1, -1};
  const double r = robustness(unit, 2 * unit.size() - 1, Normalizer::relative);
  c.expect(std::abs(r - std::exp(-1.0)) <= 1e-12, "unit residuals " + num(r));
  std::mt19937_64 g(3);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> base(200), noise(200);
  for (std::size_t k = 0; k < 200; ++k) {
    base[k] = 10.0 + std::sin(0.05 * static_cast<double>(k));
    noise[k] = n(g);
  }
  std::ostringstream seq;
  double prev = 2.0;
  for (double amp : {0.1, 0.5, 2.0}) {
    std::vector<double> x(200);
    for (std::size_t k = 0; k < 200; ++k) x[k] = base[k] + amp * noise[k];
    const double rob = robustness(x, 5, Normalizer::relative);
    c.expect(rob < prev, "not decreasing at amplitude " + num(amp));
    seq << num(rob) << ' ';
    prev = rob;
  }
  return c.done("constant = 1, unit residual = e^-1, noise sequence " + seq.str());
}

Outcome weighting_consistency() {
  Checks c;
  std::mt19937_64 g(7);
  const auto m = standardize(random_labeled(g, 60, 15, 3)).matrix;
  WeightingConfig forced;
  forced.use_robustness = false;
  const auto a = pide_weights(m, forced);
  const auto b = cide_weights(m);
  c.expect(a.w == b.w && a.selected == b.selected, "forced-robustness PIDE differs from CIDE");
  for (const Eigen::VectorXd& w : {a.w, b.w, pide_weights(m).w})
    c.expect(w.minCoeff() >= 0.0 && w.maxCoeff() == 1.0, "weights outside [0,1] or max != 1");
  const auto p = pide_weights(m);
  std::size_t prev = p.w.size() + 1;
  for (int i = 0; i <= 100; ++i) {
    const auto s = p.select(i / 100.0);
    c.expect(s.size() <= prev, "selection grew at threshold " + num(i / 100.0));
    prev = s.size();
  }
  auto raw = random_labeled(g, 45, 10, 3);
  auto scaled = raw;
  std::uniform_real_distribution<double> sa(0.01, 100.0), sb(-50.0, 50.0);
  for (Eigen::Index j = 0; j < 10; ++j) scaled.q.col(j) = scaled.q.col(j).array() * sa(g) + sb(g);
  const double diff =
      (pide_weights(standardize(raw).matrix).w - pide_weights(standardize(scaled).matrix).w).cwiseAbs().maxCoeff();
  c.expect(diff <= 1e-10, "affine rescaling changed weights by " + num(diff));
  return c.done("CIDE bitwise equal, weights in [0,1] max 1, monotone, affine drift " + num(diff));
}

Outcome knn_oracle() {
  Checks c;
  std::mt19937_64 g(200);
  std::normal_distribution<double> n(0, 1), q(1.5, 3.0);
  Eigen::MatrixXd x(90, 5);
  std::vector<int> y;
  for (int i = 0; i < 90; ++i) {
    y.push_back(1 + i % 3);
    for (int j = 0; j < 5; ++j) x(i, j) = 5.0 * ((i % 3 + j) % 3) + 2.0 * n(g);
  }
  const auto uniform = wknn_fit(x, y, Eigen::VectorXd::Ones(5), 3, false);
  int agree = 0;
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd v(5);
    for (int j = 0; j < 5; ++j) v(j) = q(g);
    if (wknn_predict(uniform, v).label == oracle::knn(x, y, v, 3)) ++agree;
  }
  c.expect(agree == 200, std::to_string(agree) + "/200 oracle matches");
  // Zero-weight column: identical scores to a model that never saw it.
  Eigen::VectorXd w(5);
  w << 0.9, 0.0, 0.4, 1.0, 0.6;
  const auto with_zero = wknn_fit(x, y, w, 3, false);
  Eigen::MatrixXd x4(90, 4);
  x4 << x.col(0), x.col(2), x.col(3), x.col(4);
  const auto without = wknn_fit(x4, y, Eigen::Vector4d(0.9, 0.4, 1.0, 0.6), 3, false);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd v(5);
    for (int j = 0; j < 5; ++j) v(j) = q(g);
    v(1) = 1e6 * n(g);
    const Eigen::Vector4d v4(v(0), v(2), v(3), v(4));
    c.expect(wknn_predict(with_zero, v).scores == wknn_predict(without, v4).scores, "zero-weight column mattered");
  }
  const auto base = wknn_fit(x, y, w, 3);
  for (double s : {1e-3, 9.0, 1e5}) {
    const auto scaled = wknn_fit(x, y, w * s, 3);
    for (int t = 0; t < 50; ++t) {
      Eigen::VectorXd v(5);
      for (int j = 0; j < 5; ++j) v(j) = q(g);
      c.expect(wknn_predict(base, v).label == wknn_predict(scaled, v).label, "scaling by " + num(s) + " changed label");
    }
  }
  return c.done("200/200 oracle matches, zero weight ignored, scale-invariant argmax");
}

Outcome synthetic_end_to_end() {
  const auto config = parse_config(IniFile{});
  const auto a = run(config);
  const auto b = run(config);
  Checks c;
  c.expect(config.synth.windows_per_class == 60 && config.folds == 5, "default dataset/folds changed");
  c.expect(a.cv.mean_accuracy >= 0.95, "accuracy " + num(a.cv.mean_accuracy));
  c.expect(a.auc.macro >= 0.99, "macro AUC " + num(a.auc.macro));
  c.expect(a.cv.predicted == b.cv.predicted && a.cv.scores == b.cv.scores && a.selected_names == b.selected_names,
           "second run differs");
  // AUC cross-check with the pair-counting oracle.
  const auto labels = load_features(config).labels;
  for (std::size_t k = 0; k < a.auc.classes.size(); ++k) {
    std::vector<double> s;
    std::vector<bool> pos;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      s.push_back(a.cv.scores[i][k]);
      pos.push_back(labels[i] == a.auc.classes[k]);
    }
    c.expect(a.auc.per_class[k] && std::abs(*a.auc.per_class[k] - oracle::pair_auc(s, pos)) <= 1e-12,
             "AUC disagrees with pair oracle");
  }
  return c.done("PIDE-WKNN 5-fold accuracy " + num(a.cv.mean_accuracy) + ", macro AUC " + num(a.auc.macro) + ", " +
                std::to_string(a.selected_names.size()) + " features, deterministic");
}

Outcome sweep_shape() {
  const auto config = parse_config(IniFile{});
  const auto m = load_features(config);
  const auto grid = linear_grid(0.0, 1.0, 0.02);
  const auto rows = threshold_sweep(m, grid, config.selection, config.k, config.folds, config.seed);
  Checks c;
  c.expect(rows.size() == 51, "grid has " + std::to_string(rows.size()) + " points");
  double best = 0, at_default = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) c.expect(rows[i].n_selected <= rows[i - 1].n_selected, "count rose at " + num(rows[i].threshold));
    best = std::max(best, rows[i].accuracy);
    if (std::abs(rows[i].threshold - 0.92) < 1e-12) at_default = rows[i].accuracy;
  }
  c.expect(at_default >= 0.0, "0.92 missing from grid");
  c.expect(best - at_default <= 0.02, "accuracy at 0.92 " + num(at_default) + " vs best " + num(best));
  return c.done("counts " + std::to_string(rows.front().n_selected) + " -> " + std::to_string(rows.back().n_selected) +
                " non-increasing; accuracy at 0.92 " + num(at_default) + ", best " + num(best));
}

Outcome noise_injection() {
  Checks c;
  std::mt19937_64 g(11);
  std::normal_distribution<double> n(3, 2);
  for (auto [N, J, ri, rf] : {std::tuple{10, 20, 0.25, 0.1}, std::tuple{180, 112, 0.01, 0.005},
                              std::tuple{37, 9, 0.5, 0.34}}) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(N, J, [&] { return n(g); });
    const auto out = inject_noise(x, {ri, rf, static_cast<std::uint64_t>(N * J)});
    const auto want = static_cast<std::size_t>(std::ceil(ri * N - 1e-9) * std::ceil(rf * J - 1e-9));
    c.expect(out.touched.size() == want, "touched " + std::to_string(out.touched.size()) + " want " + std::to_string(want));
    std::set<std::pair<std::size_t, std::size_t>> hit(out.touched.begin(), out.touched.end());
    c.expect(hit.size() == out.touched.size(), "repeated cells");
    for (Eigen::Index j = 0; j < J; ++j) {
      const double mu = x.col(j).mean();
      const double sd = std::sqrt((x.col(j).array() - mu).square().sum() / (N - 1));
      for (Eigen::Index i = 0; i < N; ++i) {
        if (hit.count({static_cast<std::size_t>(i), static_cast<std::size_t>(j)})) {
          c.expect(out.values(i, j) >= mu - 2 * sd && out.values(i, j) <= mu + 2 * sd, "injected value out of range");
        } else {
          c.expect(out.values(i, j) == x(i, j), "untouched cell changed");
        }
      }
    }
  }
  return c.done("cell counts, value range and untouched cells exact on 3 shapes");
}

Outcome rank_tests() {
  Checks c;
  const auto kw = kruskal_wallis({{1, 2}, {3, 4}, {5, 6}});
  c.expect(std::abs(kw.statistic - 32.0 / 7.0) <= 1e-12 && kw.df == 2, "H " + num(kw.statistic));
  const auto wx = wilcoxon_signed_rank(std::vector<double>{1.1, 2.3, 3.6, 4.0, 5.5, 6.2},
                                       std::vector<double>{1.0, 2.1, 3.3, 3.6, 5.0, 5.6});
  c.expect(wx.w_plus == 21.0, "W+ " + num(wx.w_plus));
  std::mt19937_64 g(50);
  std::normal_distribution<double> n(0, 1);
  const auto grow = [](double v) { return std::exp(v) + 2.0 * v; };       // strictly increasing
  const auto odd = [](double d) { return d * d * d + 0.5 * d; };         // strictly increasing, odd
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> groups(3), moved(3);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < 5 + k; ++i) {
        const double v = std::round(4.0 * n(g) + static_cast<double>(k)) / 4.0;
        groups[k].push_back(v);
        moved[k].push_back(grow(v));
      }
    const auto h1 = kruskal_wallis(groups), h2 = kruskal_wallis(moved);
    c.expect(std::abs(h1.statistic - h2.statistic) <= 1e-12 && std::abs(h1.p_value - h2.p_value) <= 1e-12,
             "K-W changed under monotone transform");
    // The signed-rank test sees only the signs and the order of |differences|,
    // so an odd increasing map of the paired differences must leave it alone.
    std::vector<double> a(20), b(20), a2(20);
    for (std::size_t i = 0; i < 20; ++i) {
      b[i] = std::round(4.0 * n(g)) / 4.0;  // dyadic grid keeps b + odd(d) - b exact
      a[i] = b[i] + std::round(4.0 * n(g) + 0.5) / 4.0;
      a2[i] = b[i] + odd(a[i] - b[i]);
    }
    const auto w1 = wilcoxon_signed_rank(a, b), w2 = wilcoxon_signed_rank(a2, b);
    c.expect(w1.w_plus == w2.w_plus && std::abs(w1.p_value - w2.p_value) <= 1e-12,
             "Wilcoxon changed under monotone transform");
  }
  return c.done("H = 32/7, df = 2, W+ = 21, 50 monotone-transform cases invariant");
}

Outcome dataset_check(const char* config_path) {
  auto config = load_config(config_path);
  config.selection.method = Method::pide;
  config.selection.weighting.threshold = 0.92;
  const auto r = run(config);
  Checks c;
  c.expect(r.cv.mean_accuracy >= 0.99, "accuracy " + num(r.cv.mean_accuracy));
  c.expect(r.selected_names.size() <= 40, std::to_string(r.selected_names.size()) + " features selected");
  return c.done("accuracy " + num(r.cv.mean_accuracy) + " with " + std::to_string(r.selected_names.size()) +
                " features");
}

}  // namespace

int main() {
  criterion(1, "feature dimensionality", 1, feature_count);
  criterion(2, "statistical feature oracle", 1, stat16_oracle);
  criterion(3, "wavelet round trip", 1, dwt_round_trip);
  criterion(4, "spectrum identities", 1, fft_identities);
  criterion(5, "distance oracle", 1, distance_oracle);
  criterion(6, "robustness metric", 1, robustness_metric);
  criterion(7, "weighting consistency", 5, weighting_consistency);
  criterion(8, "weighted KNN oracle", 5, knn_oracle);
  criterion(9, "synthetic end-to-end", 60, synthetic_end_to_end);
  criterion(10, "threshold sweep shape", 120, sweep_shape);
  criterion(11, "noise injection", 1, noise_injection);
  criterion(12, "rank tests", 1, rank_tests);
  if (const char* path = std::getenv("VIBDIAG_DATASET_CONFIG"); path && *path) {
    criterion(13, "bearing dataset", 600, [&] { return dataset_check(path); });
  } else {
    std::printf("SKIP 13 bearing dataset: set VIBDIAG_DATASET_CONFIG to a config pointing at the recordings\n");
  }
  std::printf("%s: %d failure(s)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
