#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vibdiag/pipeline.hpp"

using namespace vibdiag;
namespace fs = std::filesystem;

namespace {

// 20 windows per class keeps each run well under a second.
const char* kSmallConfig = R"(
[synth]
windows_per_class = 20
duration_s = 2.048
[cv]
seed = 5
[robustness]
trials = 2
)";

PipelineConfig small_config() { return parse_config(IniFile::parse(kSmallConfig)); }

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("vibdiag_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string without_clock(const std::string& summary) {
  return summary.substr(0, summary.find("wall_clock_s"));
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

int cli(const std::string& args, const fs::path& dir) {
  const auto cmd = std::string("\"") + VIBDIAG_CLI + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                   "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
#ifdef WEXITSTATUS
  return WEXITSTATUS(status);
#else
  return status;
#endif
}

}  // namespace

TEST(Config, EchoRoundTrips) {
  auto c = small_config();
  c.selection.method = Method::lda;
  c.selection.weighting.threshold = 0.85;
  c.wavelet = WaveletParams::daubechies(4, 3, Boundary::periodization);
  c.robustness_methods = {Method::pide, Method::pca};
  const auto text = echo_config(c);
  EXPECT_EQ(echo_config(parse_config(IniFile::parse(text))), text);
}

TEST(Config, Defaults) {
  const auto c = parse_config(IniFile{});
  EXPECT_EQ(c.source, DataSource::synth);
  EXPECT_EQ(c.window_len, 2048u);
  EXPECT_EQ(c.wavelet.levels, 4);
  EXPECT_EQ(c.wavelet.filter_length(), 20u);
  EXPECT_EQ(c.selection.method, Method::pide);
  EXPECT_EQ(c.selection.weighting.threshold, 0.92);
  EXPECT_EQ(c.k, 2u);
  EXPECT_EQ(c.folds, 5u);
  EXPECT_EQ(c.synth.windows_per_class, 60u);
  EXPECT_EQ(c.synth.classes.size(), 3u);
}

TEST(Config, TrailingComments) {
  const auto ini = IniFile::parse("[cv]   # folds\nfolds = 3   # three\nseed=7\n; whole line\n[data]\nmanifest = a#b.csv\n");
  EXPECT_EQ(ini.get("cv", "folds"), "3");
  EXPECT_EQ(ini.get("cv", "seed"), "7");
  EXPECT_EQ(ini.get("data", "manifest"), "a#b.csv");
}

TEST(Config, Errors) {
  EXPECT_THROW(IniFile::parse("[data\n"), ConfigError);
  EXPECT_THROW(IniFile::parse("no equals sign\n"), ConfigError);
  EXPECT_THROW(parse_config(IniFile::parse("[selection]\nmethod = svm\n")), ConfigError);
  EXPECT_THROW(parse_config(IniFile::parse("[selection]\nthreshold = 1.5\n")), ConfigError);
  EXPECT_THROW(parse_config(IniFile::parse("[cv]\nfolds = 1\n")), ConfigError);
  EXPECT_THROW(parse_config(IniFile::parse("[data]\nsource = manifest\n")), ConfigError);
  EXPECT_THROW(parse_config(IniFile::parse("[window]\nlength = 64\n")), ConfigError);
  EXPECT_THROW(parse_config(IniFile::parse("[classifier]\nk = two\n")), ConfigError);
}

TEST(Run, ReportShape) {
  const auto r = run(small_config());
  ASSERT_TRUE(r.weights.has_value());
  EXPECT_EQ(r.weights->names.size(), 112u);
  EXPECT_EQ(r.cv.folds.size(), 5u);
  EXPECT_FALSE(r.selected_names.empty());
  EXPECT_LE(r.selected_names.size(), 112u);
  EXPECT_EQ(r.confusion.total(), 60u);
  EXPECT_EQ(r.auc.classes, (std::vector<int>{1, 2, 3}));
  EXPECT_GE(r.cv.mean_accuracy, 0.9);
}

TEST(Run, MethodNoneKeepsEveryFeature) {
  auto c = small_config();
  c.selection.method = Method::none;
  const auto r = run(c);
  EXPECT_EQ(r.selected_names.size(), 112u);
  for (const auto& f : r.cv.folds) EXPECT_EQ(f.n_selected, 112u);
}

TEST(Run, ReportFilesAreDeterministic) {
  const auto c = small_config();
  const auto a = scratch("report_a"), b = scratch("report_b");
  write_report(a, run(c));
  write_report(b, run(c));
  for (const char* f : {"config.ini", "weights.csv", "selected.txt", "folds.csv", "confusion.csv", "auc.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(without_clock(slurp(a / "summary.txt")), without_clock(slurp(b / "summary.txt")));
  EXPECT_EQ(line_count(a / "folds.csv"), 6u);
  EXPECT_EQ(line_count(a / "weights.csv"), 113u);
  EXPECT_EQ(parse_config(IniFile::load(a / "config.ini")).seed, 5u);
}

TEST(Compare, OneRowPerMethodOnSharedFolds) {
  const auto c = small_config();
  const auto m = load_features(c);
  const std::vector<Method> methods{Method::pide, Method::cide, Method::pca, Method::lda, Method::none};
  const auto rows = compare_methods(m, c, methods);
  ASSERT_EQ(rows.size(), methods.size());
  const auto direct = evaluate_features(m, c);
  EXPECT_EQ(rows[0].mean_accuracy, direct.cv.mean_accuracy);
  EXPECT_EQ(rows[4].n_selected, 112u);
  EXPECT_NE(rows[2].hyperparameters.find("components="), std::string::npos);
  std::ostringstream o;
  write_comparison(o, rows);
  EXPECT_NE(o.str().find("\npide-knn,"), std::string::npos);
}

TEST(Stages, ErrorsNameTheStage) {
  auto c = small_config();
  c.source = DataSource::manifest;
  c.manifest = "/nonexistent/manifest.csv";
  c.sample_rate = 1000.0;
  try {
    load_features(c);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("ingest: ", 0), 0u) << e.what();
  }
}

TEST(Stages, FeatureFileSkipsIngest) {
  const auto c = small_config();
  const auto m = load_features(c);
  const auto dir = scratch("features");
  write_feature_csv(dir / "features.csv", m);
  auto fc = c;
  fc.source = DataSource::features;
  fc.features = dir / "features.csv";
  const auto back = load_features(fc);
  EXPECT_EQ(back.names, m.names);
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_EQ(back.q, m.q);
  EXPECT_EQ(evaluate_features(back, fc).cv.predicted, evaluate_features(m, c).cv.predicted);
}

TEST(Cli, SynthThenExtract) {
  const auto dir = scratch("cli_synth");
  std::ofstream(dir / "small.ini") << kSmallConfig;
  ASSERT_EQ(cli("synth -c \"" + (dir / "small.ini").string() + "\" -o \"" + (dir / "sig").string() + "\"", dir), 0);
  EXPECT_TRUE(fs::exists(dir / "sig" / "manifest.csv"));
  EXPECT_TRUE(fs::exists(dir / "sig" / "class_1.csv"));
  EXPECT_EQ(line_count(dir / "sig" / "manifest.csv"), 4u);
  ASSERT_EQ(cli("extract -c \"" + (dir / "sig" / "data.ini").string() + "\" -o \"" + dir.string() + "\"", dir), 0);
  std::ifstream in(dir / "features.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 112);
  EXPECT_EQ(header.substr(header.rfind(',') + 1), "label");
  EXPECT_EQ(line_count(dir / "features.csv"), 61u);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli_errors");
  EXPECT_EQ(cli("evaluate --bogus", dir), 1);
  std::ofstream(dir / "bad.ini") << "[selection]\nmethod = svm\n";
  EXPECT_EQ(cli("evaluate -c \"" + (dir / "bad.ini").string() + "\"", dir), 1);
  std::ofstream(dir / "bad.csv") << "a,b,label\n1,2,1\n3,x,2\n";
  EXPECT_EQ(cli("evaluate -f \"" + (dir / "bad.csv").string() + "\" -o \"" + dir.string() + "\"", dir), 2);
  EXPECT_EQ(cli("--fetch-instructions", dir), 0);
  EXPECT_NE(slurp(dir / "stdout.txt").find("manifest"), std::string::npos);
}

TEST(Cli, ExperimentTablesAreSeeded) {
  const auto dir = scratch("cli_tables");
  std::ofstream(dir / "small.ini") << kSmallConfig;
  const auto cfg = " -c \"" + (dir / "small.ini").string() + "\"";
  ASSERT_EQ(cli("sweep-threshold" + cfg + " -o \"" + (dir / "a").string() + "\"", dir), 0);
  ASSERT_EQ(cli("sweep-threshold" + cfg + " -o \"" + (dir / "b").string() + "\"", dir), 0);
  EXPECT_EQ(line_count(dir / "a" / "sweep.csv"), 52u);
  EXPECT_EQ(slurp(dir / "a" / "sweep.csv"), slurp(dir / "b" / "sweep.csv"));
  ASSERT_EQ(cli("robustness" + cfg + " -o \"" + (dir / "a").string() + "\"", dir), 0);
  ASSERT_EQ(cli("robustness" + cfg + " -o \"" + (dir / "b").string() + "\"", dir), 0);
  EXPECT_EQ(line_count(dir / "a" / "robustness.csv"), 41u);  // 4 methods x 10 ratios
  EXPECT_EQ(slurp(dir / "a" / "robustness.csv"), slurp(dir / "b" / "robustness.csv"));
  EXPECT_EQ(slurp(dir / "a" / "tests.txt"), slurp(dir / "b" / "tests.txt"));
  ASSERT_EQ(cli("robustness" + cfg + " -s 6 -o \"" + (dir / "c").string() + "\"", dir), 0);
  EXPECT_NE(slurp(dir / "a" / "robustness.csv"), slurp(dir / "c" / "robustness.csv"));
}

TEST(Cli, TrainThenScoreSavedModel) {
  const auto dir = scratch("cli_model");
  std::ofstream(dir / "small.ini") << kSmallConfig;
  const auto cfg = " -c \"" + (dir / "small.ini").string() + "\" -o \"" + dir.string() + "\"";
  ASSERT_EQ(cli("train" + cfg, dir), 0);
  ASSERT_TRUE(fs::exists(dir / "model.json"));
  ASSERT_EQ(cli("evaluate" + cfg + " --model \"" + (dir / "model.json").string() + "\"", dir), 0);
  EXPECT_EQ(line_count(dir / "predictions.csv"), 61u);
}
