// vibdiag: batch front end for the bearing-diagnosis pipeline.
//
// Exit codes: 0 ok, 1 configuration or usage error, 2 runtime or data error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vibdiag/vibdiag.hpp"

namespace fs = std::filesystem;
using namespace vibdiag;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::string features;
  std::string manifest;
  std::string model;
  std::optional<double> sample_rate;
  int verbosity = 0;
};

int g_verbosity = 0;

void progress(const std::string& msg) {
  if (g_verbosity > 0) std::cerr << "vibdiag: " << msg << '\n';
}

const char* kFetchInstructions = R"TXT(Bearing dataset (not downloaded by this tool)

  Huang, H., Baddour, N. "Bearing vibration data collected under
  time-varying rotational speed conditions." Data in Brief 21 (2018)
  1740-1749. Hosted on Mendeley Data, licence per the data record.

The record ships MATLAB .mat files (e.g. H-A-1.mat, I-A-1.mat, O-A-1.mat)
holding 'Channel_1' (accelerometer) and 'Channel_2' (encoder) sampled at
200 kHz for 10 s. Convert each file to a one- or two-column CSV, e.g.

  python3 -c "import scipy.io,numpy,sys; d=scipy.io.loadmat(sys.argv[1]);
  numpy.savetxt(sys.argv[2], d['Channel_1'].ravel())" H-A-1.mat H-A-1.csv

Then lay out a directory like

  ottawa/
    manifest.csv        # header 'path,label', one row per file
    H-A-1.csv           # label 1 = healthy
    I-A-1.csv           # label 2 = inner-race fault
    O-A-1.csv           # label 3 = outer-race fault
    ...

and point a config at it:

  [data]
  source = manifest
  manifest = ottawa/manifest.csv
  channel = 0
  sample_rate = 200000
)TXT";

PipelineConfig make_config(const Options& o) {
  PipelineConfig c = o.config.empty() ? parse_config(IniFile{}) : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.manifest.empty()) {
    c.source = DataSource::manifest;
    c.manifest = o.manifest;
  }
  if (o.sample_rate) c.sample_rate = *o.sample_rate;
  if (c.source == DataSource::manifest && !(c.sample_rate > 0.0))
    throw ConfigError("--manifest needs a sample rate (--sample-rate or [data] sample_rate)");
  if (!o.features.empty()) {
    c.source = DataSource::features;
    c.features = o.features;
  }
  return c;
}

fs::path out_dir(const Options& o) {
  fs::path d(o.out);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec || !fs::is_directory(d)) throw ConfigError("output directory '" + o.out + "' is not writable");
  return d;
}

std::ofstream open_table(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  progress("writing " + path.string());
  return out;
}

LabeledFeatureMatrix features_for(const PipelineConfig& c) {
  progress("loading features");
  auto m = load_features(c);
  progress(std::to_string(m.rows()) + " windows x " + std::to_string(m.cols()) + " features");
  return m;
}

void cmd_synth(const Options& o) {
  const auto c = make_config(o);
  const auto dir = out_dir(o);
  std::vector<ManifestEntry> entries;
  for (const auto& rec : synth_signals(c.synth, c.seed)) {
    const auto name = "class_" + std::to_string(rec.label) + ".csv";
    progress("writing " + name + " (" + std::to_string(rec.signal.samples.size()) + " samples)");
    write_signal(dir / name, rec.signal);
    entries.push_back({name, rec.label});
  }
  write_manifest(dir / "manifest.csv", entries);
  // Ready-made data section so the signals can be fed straight back in.
  auto ini = open_table(dir / "data.ini");
  ini << "[data]\nsource = manifest\nmanifest = manifest.csv\nchannel = 0\nsample_rate = "
      << detail::format_double(c.synth.sample_rate) << '\n';
}

void cmd_extract(const Options& o) {
  const auto c = make_config(o);
  const auto dir = out_dir(o);
  const auto m = features_for(c);
  write_feature_csv(dir / "features.csv", m);
}

void cmd_select(const Options& o) {
  const auto c = make_config(o);
  const auto dir = out_dir(o);
  const auto m = features_for(c);
  m.validate();
  const auto fitted = with_stage("selection", [&] { return fit_selection(m, c.selection); });
  if (fitted.feature_weights) write_weights_report(dir / "weights.csv", *fitted.feature_weights);
  auto out = open_table(dir / "selected.txt");
  if (fitted.projects()) {
    for (std::size_t i = 0; i < fitted.output_dim(); ++i) out << to_string(c.selection.method) << '.' << i + 1 << '\n';
  } else {
    for (auto j : fitted.columns) out << m.names[j] << '\n';
  }
}

void cmd_train(const Options& o) {
  const auto c = make_config(o);
  const auto dir = out_dir(o);
  const auto m = features_for(c);
  m.validate();
  const auto fc = with_stage("classify", [&] { return fit_classifier(m, c.selection, c.k); });
  const auto path = o.model.empty() ? dir / "model.json" : fs::path(o.model);
  progress("writing " + path.string());
  save_classifier(path, fc);
}

void cmd_evaluate(const Options& o) {
  const auto c = make_config(o);
  const auto dir = out_dir(o);
  if (o.model.empty()) {
    progress("running " + std::string(to_string(c.selection.method)) + " with " + std::to_string(c.folds) +
             "-fold cross-validation");
    const auto report = run(c);
    write_report(dir, report);
    std::cerr << "mean accuracy " << detail::format_double(report.cv.mean_accuracy) << ", macro AUC "
              << detail::format_double(report.auc.macro) << '\n';
    return;
  }
  // Held-out evaluation of a saved model.
  const auto fc = load_classifier(o.model);
  const auto m = features_for(c);
  if (m.names != fc.input_names) throw DataError("feature columns do not match the model's inputs");
  const auto preds = fc.predict(m.q);
  std::vector<int> yhat;
  std::vector<std::vector<double>> scores;
  for (const auto& p : preds) {
    yhat.push_back(p.label);
    scores.push_back(p.scores);
  }
  const auto cm = confusion(m.labels, yhat, fc.model.classes);
  {
    auto out = open_table(dir / "predictions.csv");
    out << "row,label,predicted";
    for (int cls : fc.model.classes) out << ",score_" << cls;
    out << '\n';
    for (std::size_t i = 0; i < preds.size(); ++i) {
      out << i << ',' << m.labels[i] << ',' << yhat[i];
      for (double s : scores[i]) out << ',' << detail::format_double(s);
      out << '\n';
    }
  }
  {
    auto out = open_table(dir / "confusion.csv");
    write_confusion(out, cm);
  }
  const auto auc = roc_auc_ovr(scores, m.labels, fc.model.classes);
  auto out = open_table(dir / "summary.txt");
  out << "accuracy = " << detail::format_double(accuracy(cm)) << '\n'
      << "macro_auc = " << detail::format_double(auc.macro) << '\n';
}

void cmd_sweep(const Options& o) {
  const auto c = make_config(o);
  const auto dir = out_dir(o);
  const auto m = features_for(c);
  const auto grid = linear_grid(c.sweep_start, c.sweep_stop, c.sweep_step);
  progress("sweeping " + std::to_string(grid.size()) + " thresholds");
  auto sel = c.selection;
  sel.method = Method::pide;
  const auto rows = threshold_sweep(m, grid, sel, c.k, c.folds, c.seed);
  auto out = open_table(dir / "sweep.csv");
  write_sweep(out, rows);
}

void cmd_robustness(const Options& o) {
  const auto c = make_config(o);
  const auto dir = out_dir(o);
  const auto m = features_for(c);
  const auto ratios = linear_grid(c.ratio_start, c.ratio_stop, c.ratio_step);
  progress(std::to_string(ratios.size()) + " ratios x " + std::to_string(c.trials) + " trials");
  const auto ex = robustness_experiment(m, c.robustness_methods, ratios, c.trials, c.seed, c.selection);
  {
    auto out = open_table(dir / "robustness.csv");
    write_robustness(out, ex);
  }
  auto out = open_table(dir / "tests.txt");
  write_tests(out, c.robustness_methods, robustness_tests(ex));
}

void cmd_compare(const Options& o, const std::vector<std::string>& method_names) {
  const auto c = make_config(o);
  const auto dir = out_dir(o);
  std::vector<Method> methods;
  for (const auto& n : method_names) methods.push_back(parse_method(n));
  if (methods.empty()) methods = {Method::pide, Method::cide, Method::pca, Method::lda, Method::none};
  const auto m = features_for(c);
  const auto rows = compare_methods(m, c, methods);
  auto out = open_table(dir / "compare.csv");
  write_comparison(out, rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vibdiag: vibration-based bearing fault diagnosis"};
  app.require_subcommand(0, 1);
  bool fetch = false;
  app.add_flag("--fetch-instructions", fetch, "Print the bearing dataset citation and expected file layout");

  Options o;
  std::vector<std::string> compare_list;
  const auto common = [&](CLI::App* sub, bool needs_features) {
    sub->add_option("-c,--config", o.config, "Pipeline configuration file (INI)")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "Output directory");
    sub->add_option("-s,--seed", o.seed, "Master seed (overrides the config)");
    sub->add_flag_function("-v,--verbose", [&](std::int64_t n) { o.verbosity += static_cast<int>(n); },
                           "Progress messages on stderr");
    if (needs_features) {
      sub->add_option("-f,--features", o.features, "Feature matrix CSV (overrides the data source)")
          ->check(CLI::ExistingFile);
      sub->add_option("-m,--manifest", o.manifest, "Signal manifest CSV (overrides the data source)")
          ->check(CLI::ExistingFile);
      sub->add_option("--sample-rate", o.sample_rate, "Sampling rate in Hz for --manifest signals")
          ->check(CLI::PositiveNumber);
    }
  };
  auto* synth = app.add_subcommand("synth", "Write synthetic class signals and a label manifest");
  common(synth, false);
  auto* extract = app.add_subcommand("extract", "Window signals and write the fused feature matrix");
  common(extract, true);
  auto* select = app.add_subcommand("select", "Fit the selection stage on all rows and report weights");
  common(select, true);
  auto* train = app.add_subcommand("train", "Fit selection + classifier on all rows and save the model");
  common(train, true);
  train->add_option("--model", o.model, "Model output path (default OUT/model.json)");
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validated report, or score a saved model");
  common(evaluate, true);
  evaluate->add_option("--model", o.model, "Saved model to score instead of cross-validating")
      ->check(CLI::ExistingFile);
  auto* sweep = app.add_subcommand("sweep-threshold", "Selected count and accuracy over a threshold grid");
  common(sweep, true);
  auto* robust = app.add_subcommand("robustness", "Noise-injection robustness table and rank tests");
  common(robust, true);
  auto* compare = app.add_subcommand("compare", "Cross-validated comparison of selection methods");
  common(compare, true);
  compare->add_option("--methods", compare_list, "Methods to compare (pide cide pca lda none)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }
  g_verbosity = o.verbosity;

  if (fetch) {
    std::cout << kFetchInstructions;
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*synth) cmd_synth(o);
    else if (*extract) cmd_extract(o);
    else if (*select) cmd_select(o);
    else if (*train) cmd_train(o);
    else if (*evaluate) cmd_evaluate(o);
    else if (*sweep) cmd_sweep(o);
    else if (*robust) cmd_robustness(o);
    else if (*compare) cmd_compare(o, compare_list);
  } catch (const ConfigError& e) {
    std::cerr << "vibdiag: configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "vibdiag: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
