#pragma once

// Pipeline configuration: a flat "key = value" file with [sections].
//
//   [data]       source = synth | manifest | features
//                manifest = <path>       (source = manifest; "path,label" rows)
//                features = <path>       (source = features; feature CSV)
//                channel = 0             (column of each signal file)
//                sample_rate = <Hz>      (required for manifest data)
//   [window]     length = 2048, hop = 2048
//   [wavelet]    family = db10, levels = 4, boundary = symmetric | periodization
//   [selection]  method = pide | cide | pca | lda | none
//                threshold = 0.92, smoothing_window = 5,
//                normalizer = std | relative, components = 0
//   [classifier] k = 2
//   [cv]         folds = 5, seed = 42
//   [sweep]      start = 0, stop = 1, step = 0.02
//   [robustness] ratio_start = 0.001, ratio_stop = 0.01, ratio_step = 0.001,
//                trials = 30, methods = pide, cide, pca, lda
//   [synth]      duration_s, sample_rate, windows_per_class, speed_drop
//   [synth.class.<label>]  kind = healthy | inner_race | outer_race,
//                impulse_rate, resonance, decay, snr_db,
//                speed = constant | decreasing, shaft_rate
//
// Paths are relative to the config file's directory.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vibdiag/error.hpp"
#include "vibdiag/ingest.hpp"
#include "vibdiag/selection.hpp"
#include "vibdiag/transforms.hpp"

namespace vibdiag {

class IniFile {
 public:
  using Section = std::map<std::string, std::string>;

  static IniFile parse(const std::string& text, const std::string& origin = "config") {
    IniFile ini;
    std::string section;
    ini.sections_[section];
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      auto line = std::string(detail::trim(raw));
      // Trailing comments start at whitespace followed by '#'.
      for (std::size_t i = 1; i < line.size(); ++i)
        if (line[i] == '#' && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
          line = std::string(detail::trim(std::string_view(line).substr(0, i)));
          break;
        }
      if (line.empty() || line.front() == '#' || line.front() == ';') continue;
      const auto where = origin + ":" + std::to_string(line_no);
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
        section = std::string(detail::trim(std::string_view(line).substr(1, line.size() - 2)));
        if (section.empty()) throw ConfigError(where + ": empty section name");
        if (!ini.sections_.contains(section)) ini.order_.push_back(section);
        ini.sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
      auto key = std::string(detail::trim(std::string_view(line).substr(0, eq)));
      auto value = std::string(detail::trim(std::string_view(line).substr(eq + 1)));
      if (key.empty()) throw ConfigError(where + ": empty key");
      ini.sections_[section][key] = value;
    }
    return ini;
  }

  static IniFile load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' not found");
    std::string text;
    for (const auto& l : detail::read_lines(path)) text += l + '\n';
    return parse(text, path.string());
  }

  bool has_section(const std::string& s) const { return sections_.contains(s); }
  const std::vector<std::string>& section_order() const { return order_; }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const {
    return get(section, key).value_or(fallback);
  }

  double number(const std::string& section, const std::string& key, double fallback) const {
    const auto v = get(section, key);
    if (!v) return fallback;
    const auto d = detail::parse_double(*v);
    if (!d) throw ConfigError("[" + section + "] " + key + ": '" + *v + "' is not a number");
    return *d;
  }

  std::size_t count(const std::string& section, const std::string& key, std::size_t fallback) const {
    const double d = number(section, key, static_cast<double>(fallback));
    if (d < 0 || d != std::floor(d)) throw ConfigError("[" + section + "] " + key + " must be a non-negative integer");
    return static_cast<std::size_t>(d);
  }

  /// Keys present in `section` but not listed in `known`.
  std::vector<std::string> unknown_keys(const std::string& section, const std::vector<std::string>& known) const {
    std::vector<std::string> out;
    const auto s = sections_.find(section);
    if (s == sections_.end()) return out;
    for (const auto& [k, v] : s->second)
      if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, Section> sections_;
  std::vector<std::string> order_;
};

enum class DataSource { synth, manifest, features };

struct PipelineConfig {
  DataSource source = DataSource::synth;
  std::filesystem::path manifest;
  std::filesystem::path features;
  std::size_t channel = 0;
  double sample_rate = 0.0;
  SynthSpec synth;

  std::size_t window_len = kDefaultWindowLength;
  std::size_t hop = kDefaultHop;
  WaveletParams wavelet = WaveletParams::daubechies(10, 4);
  SelectionConfig selection;
  std::size_t k = 2;
  std::size_t folds = 5;
  std::uint64_t seed = 42;

  double sweep_start = 0.0, sweep_stop = 1.0, sweep_step = 0.02;
  double ratio_start = 0.001, ratio_stop = 0.01, ratio_step = 0.001;
  std::size_t trials = 30;
  std::vector<Method> robustness_methods{Method::pide, Method::cide, Method::pca, Method::lda};
};

/// Three classes labelled as healthy = 1, inner race = 2, outer race = 3 under
/// decreasing speed; 60 windows of 2048 samples per class at 20 kHz.
inline SynthSpec default_synth_spec() {
  SynthSpec s;
  s.sample_rate = 20000.0;
  s.windows_per_class = 60;
  s.duration_s = 60.0 * 2048.0 / s.sample_rate;
  s.speed_drop = 0.3;
  s.classes = {
      {1, FaultKind::healthy, 0.0, 0.0, 0.0, 0.0, SpeedProfile::decreasing, 0.0},
      {2, FaultKind::inner_race, 135.0, 3500.0, 600.0, 10.0, SpeedProfile::decreasing, 25.0},
      {3, FaultKind::outer_race, 85.0, 2500.0, 500.0, 10.0, SpeedProfile::decreasing, 25.0},
  };
  return s;
}

namespace detail {

inline FaultKind parse_kind(const std::string& s) {
  if (s == "healthy") return FaultKind::healthy;
  if (s == "inner_race") return FaultKind::inner_race;
  if (s == "outer_race") return FaultKind::outer_race;
  throw ConfigError("unknown fault kind '" + s + "' (healthy|inner_race|outer_race)");
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      auto t = std::string(trim(cur));
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

}  // namespace detail

/// Unsigned 64-bit seed, decimal.
inline std::uint64_t parse_seed(const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("seed '" + text + "' is not an unsigned 64-bit integer");
  return v;
}

inline SynthSpec parse_synth(const IniFile& ini) {
  SynthSpec s = default_synth_spec();
  s.sample_rate = ini.number("synth", "sample_rate", s.sample_rate);
  s.windows_per_class = ini.count("synth", "windows_per_class", s.windows_per_class);
  s.duration_s = ini.number("synth", "duration_s", s.duration_s);
  s.speed_drop = ini.number("synth", "speed_drop", s.speed_drop);
  std::vector<ClassSpec> classes;
  for (const auto& name : ini.section_order()) {
    if (!name.starts_with("synth.class.")) continue;
    const auto label = detail::parse_double(name.substr(12));
    if (!label || *label != std::floor(*label)) throw ConfigError("[" + name + "]: class label must be an integer");
    ClassSpec c;
    c.label = static_cast<int>(*label);
    c.kind = detail::parse_kind(ini.get_or(name, "kind", "healthy"));
    c.impulse_rate = ini.number(name, "impulse_rate", c.impulse_rate);
    c.resonance = ini.number(name, "resonance", c.resonance);
    c.decay = ini.number(name, "decay", c.decay);
    c.snr_db = ini.number(name, "snr_db", c.snr_db);
    c.shaft_rate = ini.number(name, "shaft_rate", c.shaft_rate);
    const auto speed = ini.get_or(name, "speed", "constant");
    if (speed == "constant") c.speed = SpeedProfile::constant;
    else if (speed == "decreasing") c.speed = SpeedProfile::decreasing;
    else throw ConfigError("[" + name + "] speed: expected constant|decreasing");
    classes.push_back(c);
  }
  if (!classes.empty()) s.classes = std::move(classes);
  validate(s);
  return s;
}

inline PipelineConfig parse_config(const IniFile& ini, const std::filesystem::path& base_dir = {}) {
  PipelineConfig c;
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  const auto source = ini.get_or("data", "source", "synth");
  if (source == "synth") c.source = DataSource::synth;
  else if (source == "manifest") c.source = DataSource::manifest;
  else if (source == "features") c.source = DataSource::features;
  else throw ConfigError("[data] source: expected synth|manifest|features");
  if (const auto m = ini.get("data", "manifest")) c.manifest = resolve(*m);
  if (const auto f = ini.get("data", "features")) c.features = resolve(*f);
  c.channel = ini.count("data", "channel", 0);
  c.sample_rate = ini.number("data", "sample_rate", 0.0);
  if (c.source == DataSource::manifest) {
    if (c.manifest.empty()) throw ConfigError("[data] manifest is required for source = manifest");
    if (!(c.sample_rate > 0.0)) throw ConfigError("[data] sample_rate is required for source = manifest");
  }
  if (c.source == DataSource::features && c.features.empty())
    throw ConfigError("[data] features is required for source = features");
  c.synth = parse_synth(ini);

  c.window_len = ini.count("window", "length", c.window_len);
  c.hop = ini.count("window", "hop", c.hop);
  if (c.window_len < 2) throw ConfigError("[window] length must be >= 2");
  if (c.hop < 1) throw ConfigError("[window] hop must be >= 1");

  const auto boundary = ini.get_or("wavelet", "boundary", "symmetric");
  Boundary b = Boundary::symmetric;
  if (boundary == "periodization") b = Boundary::periodization;
  else if (boundary != "symmetric") throw ConfigError("[wavelet] boundary: expected symmetric|periodization");
  const auto levels = ini.count("wavelet", "levels", 4);
  c.wavelet = WaveletParams::from_name(ini.get_or("wavelet", "family", "db10"), static_cast<int>(levels), b);
  if (c.wavelet.max_levels(c.window_len) < c.wavelet.levels)
    throw ConfigError("[window] length " + std::to_string(c.window_len) + " is too short for " +
                      std::to_string(c.wavelet.levels) + " level(s) of " + c.wavelet.family);

  c.selection.method = parse_method(ini.get_or("selection", "method", "pide"));
  c.selection.weighting.threshold = ini.number("selection", "threshold", kDefaultThreshold);
  if (!(c.selection.weighting.threshold >= 0.0 && c.selection.weighting.threshold <= 1.0))
    throw ConfigError("[selection] threshold must lie in [0, 1]");
  c.selection.weighting.smoothing_window = ini.count("selection", "smoothing_window", 5);
  if (c.selection.weighting.smoothing_window % 2 == 0)
    throw ConfigError("[selection] smoothing_window must be odd");
  const auto norm = ini.get_or("selection", "normalizer", "std");
  if (norm == "std") c.selection.weighting.normalizer = Normalizer::std_dev;
  else if (norm == "relative") c.selection.weighting.normalizer = Normalizer::relative;
  else throw ConfigError("[selection] normalizer: expected std|relative");
  c.selection.components = ini.count("selection", "components", 0);

  c.k = ini.count("classifier", "k", c.k);
  if (c.k < 1) throw ConfigError("[classifier] k must be >= 1");
  c.folds = ini.count("cv", "folds", c.folds);
  if (c.folds < 2) throw ConfigError("[cv] folds must be >= 2");
  if (const auto seed = ini.get("cv", "seed")) c.seed = parse_seed(*seed);

  c.sweep_start = ini.number("sweep", "start", c.sweep_start);
  c.sweep_stop = ini.number("sweep", "stop", c.sweep_stop);
  c.sweep_step = ini.number("sweep", "step", c.sweep_step);
  c.ratio_start = ini.number("robustness", "ratio_start", c.ratio_start);
  c.ratio_stop = ini.number("robustness", "ratio_stop", c.ratio_stop);
  c.ratio_step = ini.number("robustness", "ratio_step", c.ratio_step);
  c.trials = ini.count("robustness", "trials", c.trials);
  if (const auto ms = ini.get("robustness", "methods")) {
    c.robustness_methods.clear();
    for (const auto& m : detail::split_list(*ms)) c.robustness_methods.push_back(parse_method(m));
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(IniFile::load(path), path.parent_path());
}

/// Canonical text form; parse_config(echo_config(c)) reproduces c.
inline std::string echo_config(const PipelineConfig& c) {
  const auto num = [](double v) { return detail::format_double(v); };
  std::ostringstream o;
  o << "[data]\nsource = "
    << (c.source == DataSource::synth ? "synth" : c.source == DataSource::manifest ? "manifest" : "features") << '\n';
  if (!c.manifest.empty()) o << "manifest = " << c.manifest.generic_string() << '\n';
  if (!c.features.empty()) o << "features = " << c.features.generic_string() << '\n';
  o << "channel = " << c.channel << "\nsample_rate = " << num(c.sample_rate) << "\n\n";
  o << "[window]\nlength = " << c.window_len << "\nhop = " << c.hop << "\n\n";
  o << "[wavelet]\nfamily = " << c.wavelet.family << "\nlevels = " << c.wavelet.levels << "\nboundary = "
    << (c.wavelet.boundary == Boundary::symmetric ? "symmetric" : "periodization") << "\n\n";
  o << "[selection]\nmethod = " << to_string(c.selection.method)
    << "\nthreshold = " << num(c.selection.weighting.threshold)
    << "\nsmoothing_window = " << c.selection.weighting.smoothing_window
    << "\nnormalizer = " << (c.selection.weighting.normalizer == Normalizer::std_dev ? "std" : "relative")
    << "\ncomponents = " << c.selection.components << "\n\n";
  o << "[classifier]\nk = " << c.k << "\n\n";
  o << "[cv]\nfolds = " << c.folds << "\nseed = " << c.seed << "\n\n";
  o << "[sweep]\nstart = " << num(c.sweep_start) << "\nstop = " << num(c.sweep_stop) << "\nstep = " << num(c.sweep_step)
    << "\n\n";
  o << "[robustness]\nratio_start = " << num(c.ratio_start) << "\nratio_stop = " << num(c.ratio_stop)
    << "\nratio_step = " << num(c.ratio_step) << "\ntrials = " << c.trials << "\nmethods = ";
  for (std::size_t i = 0; i < c.robustness_methods.size(); ++i)
    o << (i ? ", " : "") << to_string(c.robustness_methods[i]);
  o << "\n\n[synth]\nduration_s = " << num(c.synth.duration_s) << "\nsample_rate = " << num(c.synth.sample_rate)
    << "\nwindows_per_class = " << c.synth.windows_per_class << "\nspeed_drop = " << num(c.synth.speed_drop) << '\n';
  for (const auto& cls : c.synth.classes) {
    o << "\n[synth.class." << cls.label << "]\nkind = " << to_string(cls.kind)
      << "\nimpulse_rate = " << num(cls.impulse_rate) << "\nresonance = " << num(cls.resonance)
      << "\ndecay = " << num(cls.decay) << "\nsnr_db = " << num(cls.snr_db) << "\nspeed = " << to_string(cls.speed)
      << "\nshaft_rate = " << num(cls.shaft_rate) << '\n';
  }
  return o.str();
}

}  // namespace vibdiag
