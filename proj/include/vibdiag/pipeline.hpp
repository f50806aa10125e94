#pragma once

// End-to-end runs: data -> windows -> fused features -> selection -> WKNN ->
// cross-validated report, plus the Table-style method comparison and the
// writers for every tidy output table.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vibdiag/classify.hpp"
#include "vibdiag/config.hpp"
#include "vibdiag/error.hpp"
#include "vibdiag/eval.hpp"
#include "vibdiag/feature_matrix.hpp"
#include "vibdiag/features.hpp"
#include "vibdiag/ingest.hpp"
#include "vibdiag/selection.hpp"

namespace vibdiag {

/// Runs `fn`, prefixing any library error with the stage name.
template <typename Fn>
auto with_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  }
}

/// Labelled windows from the configured signal source.
inline std::vector<SignalWindow> load_windows(const PipelineConfig& c) {
  std::vector<SignalWindow> windows;
  const auto add = [&](const Signal& s, int label) {
    for (auto& w : segment(s, c.window_len, c.hop, label)) windows.push_back(std::move(w));
  };
  switch (c.source) {
    case DataSource::synth:
      for (const auto& rec : synth_signals(c.synth, c.seed)) add(rec.signal, rec.label);
      break;
    case DataSource::manifest:
      for (const auto& e : read_manifest(c.manifest)) add(load_signal(e.path, c.channel, c.sample_rate), e.label);
      break;
    case DataSource::features:
      throw ConfigError("data source 'features' has no signals to window");
  }
  return windows;
}

/// Feature matrix for the configured source (read directly for source = features).
inline LabeledFeatureMatrix load_features(const PipelineConfig& c) {
  if (c.source == DataSource::features) return with_stage("ingest", [&] { return read_feature_csv(c.features); });
  const auto windows = with_stage("ingest", [&] { return load_windows(c); });
  return with_stage("features", [&] { return extract_features(windows, c.wavelet); });
}

struct RunReport {
  std::string config_echo;
  std::uint64_t seed = 0;
  Method method = Method::pide;
  std::optional<FeatureWeights> weights;   // full-data weights (weighting methods)
  std::vector<std::string> selected_names; // full-data selection / component names
  CvResult cv;
  ConfusionMatrix confusion;
  AucReport auc;
  double wall_clock_s = 0.0;
};

/// Full-data fit for the report plus stratified cross-validation.
inline RunReport evaluate_features(const LabeledFeatureMatrix& m, const PipelineConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  RunReport r;
  r.config_echo = echo_config(c);
  r.seed = c.seed;
  r.method = c.selection.method;
  with_stage("selection", [&] {
    m.validate();
    const auto full = fit_classifier(m, c.selection, std::min(c.k, m.rows()));
    r.weights = full.selection.feature_weights;
    r.selected_names = full.model.feature_names;
    return 0;
  });
  r.cv = with_stage("classify", [&] { return cross_validate(m, c.selection, c.k, c.folds, c.seed); });
  with_stage("eval", [&] {
    r.confusion = confusion(m.labels, r.cv.predicted, r.cv.classes);
    r.auc = roc_auc_ovr(r.cv.scores, m.labels, r.cv.classes);
    return 0;
  });
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline RunReport run(const PipelineConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  auto r = evaluate_features(load_features(c), c);
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct ComparisonRow {
  Method method = Method::pide;
  std::size_t n_selected = 0;  // full-data count
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::string hyperparameters;
};

inline std::string hyperparameters(const PipelineConfig& c, Method m, std::size_t n_out) {
  std::ostringstream o;
  o << "k=" << c.k << ";distance=" << (m == Method::pide || m == Method::cide ? "weighted_euclidean" : "euclidean");
  if (m == Method::pide || m == Method::cide)
    o << ";threshold=" << detail::format_double(c.selection.weighting.threshold);
  if (m == Method::pide)
    o << ";smoothing_window=" << c.selection.weighting.smoothing_window
      << ";normalizer=" << (c.selection.weighting.normalizer == Normalizer::std_dev ? "std" : "relative");
  if (m == Method::pca || m == Method::lda) o << ";components=" << n_out;
  return o.str();
}

/// One cross-validated row per method, all on the same folds.
inline std::vector<ComparisonRow> compare_methods(const LabeledFeatureMatrix& m, const PipelineConfig& c,
                                                  const std::vector<Method>& methods) {
  std::vector<ComparisonRow> rows;
  for (auto method : methods) {
    PipelineConfig mc = c;
    mc.selection.method = method;
    const auto report = evaluate_features(m, mc);
    rows.push_back({method, report.selected_names.size(), report.cv.mean_accuracy, report.cv.std_accuracy,
                    hyperparameters(mc, method, report.selected_names.size())});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Writers

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace detail

/// Writes config.ini, weights.csv (weighting methods), selected.txt,
/// folds.csv, confusion.csv, auc.csv and summary.txt into `dir`.
/// Only summary.txt's wall_clock_s line varies between identical runs.
inline void write_report(const std::filesystem::path& dir, const RunReport& r) {
  std::filesystem::create_directories(dir);
  detail::open_out(dir / "config.ini") << r.config_echo;
  if (r.weights) write_weights_report(dir / "weights.csv", *r.weights);
  {
    auto out = detail::open_out(dir / "selected.txt");
    for (const auto& n : r.selected_names) out << n << '\n';
  }
  {
    auto out = detail::open_out(dir / "folds.csv");
    out << "fold,accuracy,n_selected\n";
    for (std::size_t f = 0; f < r.cv.folds.size(); ++f)
      out << f + 1 << ',' << detail::format_double(r.cv.folds[f].accuracy) << ',' << r.cv.folds[f].n_selected << '\n';
  }
  {
    auto out = detail::open_out(dir / "confusion.csv");
    write_confusion(out, r.confusion);
  }
  {
    auto out = detail::open_out(dir / "auc.csv");
    out << "class,auc\n";
    for (std::size_t c = 0; c < r.auc.classes.size(); ++c)
      out << r.auc.classes[c] << ',' << (r.auc.per_class[c] ? detail::format_double(*r.auc.per_class[c]) : "undefined")
          << '\n';
    out << "macro," << detail::format_double(r.auc.macro) << '\n';
  }
  {
    auto out = detail::open_out(dir / "summary.txt");
    out << "method = " << to_string(r.method) << '\n'
        << "seed = " << r.seed << '\n'
        << "n_selected = " << r.selected_names.size() << '\n'
        << "folds = " << r.cv.folds.size() << '\n'
        << "mean_accuracy = " << detail::format_double(r.cv.mean_accuracy) << '\n'
        << "std_accuracy = " << detail::format_double(r.cv.std_accuracy) << '\n'
        << "oof_accuracy = " << detail::format_double(accuracy(r.confusion)) << '\n'
        << "macro_auc = " << detail::format_double(r.auc.macro) << '\n'
        << "wall_clock_s = " << detail::format_double(r.wall_clock_s) << '\n';
  }
}

inline void write_comparison(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "method,n_selected,mean_accuracy,std_accuracy,hyperparameters\n";
  for (const auto& r : rows)
    out << to_string(r.method) << "-knn," << r.n_selected << ',' << detail::format_double(r.mean_accuracy) << ','
        << detail::format_double(r.std_accuracy) << ',' << r.hyperparameters << '\n';
}

inline void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "threshold,n_selected,accuracy,accuracy_std\n";
  for (const auto& r : rows)
    out << detail::format_double(r.threshold) << ',' << r.n_selected << ',' << detail::format_double(r.accuracy) << ','
        << detail::format_double(r.accuracy_std) << '\n';
}

inline void write_robustness(std::ostream& out, const RobustnessExperiment& ex) {
  out << "method,ratio,mean,std\n";
  for (const auto& r : ex.rows)
    out << to_string(r.method) << ',' << detail::format_double(r.ratio) << ',' << detail::format_double(r.mean) << ','
        << detail::format_double(r.std) << '\n';
}

inline void write_tests(std::ostream& out, const std::vector<Method>& methods, const RobustnessTests& t) {
  const auto kw = [&](const char* name, const TestResult& r) {
    out << "kruskal_wallis." << name << ".H = " << detail::format_double(r.statistic) << '\n'
        << "kruskal_wallis." << name << ".df = " << r.df << '\n'
        << "kruskal_wallis." << name << ".p = " << detail::format_double(r.p_value) << '\n'
        << "kruskal_wallis." << name << ".degenerate = " << (r.degenerate ? "true" : "false") << '\n';
  };
  kw("mean", t.kruskal_mean);
  kw("std", t.kruskal_std);
  const auto ref = std::string(to_string(methods.front()));
  for (std::size_t i = 0; i < t.others.size(); ++i) {
    const auto pair = ref + "_vs_" + std::string(to_string(t.others[i]));
    for (const auto& [metric, r] : {std::pair{"mean", t.wilcoxon_mean[i]}, std::pair{"std", t.wilcoxon_std[i]}}) {
      out << "wilcoxon." << pair << '.' << metric << ".Z = " << detail::format_double(r.statistic) << '\n'
          << "wilcoxon." << pair << '.' << metric << ".W_plus = " << detail::format_double(r.w_plus) << '\n'
          << "wilcoxon." << pair << '.' << metric << ".p = " << detail::format_double(r.p_value) << '\n'
          << "wilcoxon." << pair << '.' << metric << ".degenerate = " << (r.degenerate ? "true" : "false") << '\n';
    }
  }
}

}  // namespace vibdiag
