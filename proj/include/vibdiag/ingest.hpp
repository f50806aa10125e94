#pragma once

// Signal loading, windowing and the synthetic bearing-vibration generator.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "vibdiag/error.hpp"
#include "vibdiag/random.hpp"

namespace vibdiag {

struct Signal {
  std::vector<double> samples;
  double sample_rate = 1.0;  // Hz
};

struct SignalWindow {
  std::vector<double> samples;
  std::optional<int> label;
  std::size_t source_offset = 0;
};

inline constexpr std::size_t kDefaultWindowLength = 2048;
inline constexpr std::size_t kDefaultHop = 2048;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

/// Splits on commas, semicolons, tabs or runs of spaces.
inline std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  const bool delimited = line.find_first_of(",;") != std::string_view::npos;
  std::size_t pos = 0;
  if (delimited) {
    while (true) {
      const std::size_t next = line.find_first_of(",;", pos);
      cells.push_back(trim(line.substr(pos, next == std::string_view::npos ? next : next - pos)));
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
    return cells;
  }
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    cells.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return cells;
}

inline std::optional<double> parse_double(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
  return value;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (!lines.empty() && lines.front().starts_with("\xEF\xBB\xBF")) lines.front().erase(0, 3);
  return lines;
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads one column of a delimited numeric text file. A first line that does
/// not parse as numbers is treated as a header.
inline Signal load_signal(const std::filesystem::path& path, std::size_t channel_index,
                          double sample_rate) {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw ConfigError("sample_rate must be positive and finite");
  if (!std::filesystem::exists(path)) throw DataError("signal file '" + path.string() + "' not found");

  const auto lines = detail::read_lines(path);
  Signal signal{{}, sample_rate};
  bool first = true;
  for (std::size_t row = 0; row < lines.size(); ++row) {
    const auto line = detail::trim(lines[row]);
    if (line.empty()) continue;
    const auto cells = detail::split_cells(line);
    if (first) {
      first = false;
      const bool header = std::none_of(cells.begin(), cells.end(), [](std::string_view c) {
        return detail::parse_double(c).has_value();
      });
      if (header) continue;
    }
    if (channel_index >= cells.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row + 1) + " has " +
                      std::to_string(cells.size()) + " column(s), channel " +
                      std::to_string(channel_index + 1) + " requested");
    }
    const auto value = detail::parse_double(cells[channel_index]);
    if (!value || !std::isfinite(*value)) {
      throw DataError(path.string() + ": row " + std::to_string(row + 1) + ", column " +
                      std::to_string(channel_index + 1) + ": '" +
                      std::string(cells[channel_index]) + "' is not a finite number");
    }
    signal.samples.push_back(*value);
  }
  if (signal.samples.empty()) throw DataError(path.string() + ": column is empty");
  return signal;
}

/// Writes one sample per line, shortest round-trip representation.
inline void write_signal(const std::filesystem::path& path, const Signal& signal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (double v : signal.samples) out << detail::format_double(v) << '\n';
}

/// Fixed-length windows at offsets 0, hop, 2*hop, ...; the trailing partial
/// window is dropped.
inline std::vector<SignalWindow> segment(const Signal& signal, std::size_t window_len,
                                         std::size_t hop, std::optional<int> label = std::nullopt) {
  if (window_len < 2) throw ConfigError("window length must be at least 2");
  if (hop < 1) throw ConfigError("hop must be at least 1");
  const std::size_t n = signal.samples.size();
  if (window_len > n) {
    throw ConfigError("window length " + std::to_string(window_len) + " exceeds signal length " +
                      std::to_string(n));
  }
  std::vector<SignalWindow> windows;
  windows.reserve((n - window_len) / hop + 1);
  for (std::size_t offset = 0; offset + window_len <= n; offset += hop) {
    SignalWindow w;
    w.samples.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     signal.samples.begin() + static_cast<std::ptrdiff_t>(offset + window_len));
    w.label = label;
    w.source_offset = offset;
    windows.push_back(std::move(w));
  }
  return windows;
}

// ---------------------------------------------------------------------------
// Synthetic bearing signals

enum class FaultKind { healthy, inner_race, outer_race };
enum class SpeedProfile { constant, decreasing };

struct ClassSpec {
  int label = 1;
  FaultKind kind = FaultKind::healthy;
  double impulse_rate = 100.0;  // Hz, defect impulse repetition rate at nominal speed
  double resonance = 3000.0;    // Hz, structural resonance excited by each impulse
  double decay = 500.0;         // 1/s, exponential decay of the ringing
  double snr_db = 10.0;         // impulse-train power over noise power
  SpeedProfile speed = SpeedProfile::constant;
  double shaft_rate = 20.0;     // Hz, inner-race modulation rate at nominal speed
};

struct SynthSpec {
  std::vector<ClassSpec> classes;
  double duration_s = 1.0;  // record length per class
  double sample_rate = 20000.0;
  std::size_t windows_per_class = 10;
  double speed_drop = 0.3;  // fractional speed loss over the record, decreasing profile

  std::size_t record_length() const {
    return static_cast<std::size_t>(std::floor(duration_s * sample_rate));
  }
  std::size_t window_length() const {
    return windows_per_class == 0 ? 0 : record_length() / windows_per_class;
  }
};

inline std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::healthy: return "healthy";
    case FaultKind::inner_race: return "inner_race";
    case FaultKind::outer_race: return "outer_race";
  }
  return "?";
}

inline std::string_view to_string(SpeedProfile p) {
  return p == SpeedProfile::constant ? "constant" : "decreasing";
}

inline void validate(const SynthSpec& spec) {
  if (spec.classes.empty()) throw ConfigError("synth: no classes");
  if (!(spec.sample_rate > 0.0)) throw ConfigError("synth: sample_rate must be positive");
  if (!(spec.duration_s > 0.0)) throw ConfigError("synth: duration_s must be positive");
  if (spec.windows_per_class < 1) throw ConfigError("synth: windows_per_class must be >= 1");
  if (spec.window_length() < 2)
    throw ConfigError("synth: duration_s * sample_rate / windows_per_class must be >= 2 samples");
  if (!(spec.speed_drop >= 0.0 && spec.speed_drop < 1.0))
    throw ConfigError("synth: speed_drop must lie in [0, 1)");
  const double nyquist = spec.sample_rate / 2.0;
  std::vector<int> labels;
  for (const auto& c : spec.classes) {
    const std::string who = "synth class " + std::to_string(c.label);
    if (c.label < 1) throw ConfigError(who + ": label must be >= 1");
    if (std::find(labels.begin(), labels.end(), c.label) != labels.end())
      throw ConfigError(who + ": duplicate label");
    labels.push_back(c.label);
    if (c.kind == FaultKind::healthy) continue;
    if (!(c.impulse_rate > 0.0 && c.impulse_rate < nyquist))
      throw ConfigError(who + ": impulse_rate must lie in (0, sample_rate/2)");
    if (!(c.resonance > 0.0 && c.resonance < nyquist))
      throw ConfigError(who + ": resonance must lie in (0, sample_rate/2)");
    if (!(c.decay > 0.0)) throw ConfigError(who + ": decay must be positive");
    if (std::isnan(c.snr_db)) throw ConfigError(who + ": snr_db is NaN");
    if (c.kind == FaultKind::inner_race && !(c.shaft_rate > 0.0))
      throw ConfigError(who + ": shaft_rate must be positive");
  }
}

/// One continuous record for one class.
///
/// healthy: unit-variance white Gaussian noise.
/// faulted: impulse train (rate chirped linearly down by speed_drop under the
/// decreasing profile), each impulse ringing as an exponentially decaying
/// sinusoid at the resonance; inner-race impulses are amplitude-modulated at
/// the shaft rate. The train is scaled to unit RMS, then Gaussian noise with
/// variance 10^(-snr_db/10) is added.
inline Signal synth_class_signal(const SynthSpec& spec, const ClassSpec& cls, Rng rng) {
  const std::size_t n = spec.record_length();
  const double fs = spec.sample_rate;
  Signal out{std::vector<double>(n, 0.0), fs};
  if (cls.kind == FaultKind::healthy) {
    for (auto& v : out.samples) v = rng.normal();
    return out;
  }

  const double drop = cls.speed == SpeedProfile::decreasing ? spec.speed_drop : 0.0;
  const double duration = static_cast<double>(n) / fs;
  const auto speed = [&](double t) { return 1.0 - drop * t / duration; };

  // Impulse times from the integrated rate, starting at a random phase.
  std::vector<double> impulse_times;
  std::vector<double> impulse_gain;
  double phase = rng.uniform();
  double shaft_phase = rng.uniform();
  const double dt = 1.0 / fs;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double step = cls.impulse_rate * speed(t) * dt;
    if (phase + step >= 1.0) {
      const double frac = (1.0 - phase) / step;
      const double ti = t + frac * dt;
      impulse_times.push_back(ti);
      double gain = 1.0;
      if (cls.kind == FaultKind::inner_race) {
        const double sp = shaft_phase + cls.shaft_rate * speed(t) * frac * dt;
        gain = 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * sp);
      }
      impulse_gain.push_back(gain);
      phase = phase + step - 1.0;
    } else {
      phase += step;
    }
    shaft_phase += cls.shaft_rate * speed(t) * dt;
    shaft_phase -= std::floor(shaft_phase);
  }

  const double ring = 12.0 / cls.decay;  // exp(-12) cut-off
  const double omega = 2.0 * std::numbers::pi * cls.resonance;
  for (std::size_t m = 0; m < impulse_times.size(); ++m) {
    const double ti = impulse_times[m];
    const auto first = static_cast<std::size_t>(std::ceil(ti * fs));
    const auto last = std::min(n, static_cast<std::size_t>(std::ceil((ti + ring) * fs)));
    for (std::size_t i = first; i < last; ++i) {
      const double tau = static_cast<double>(i) * dt - ti;
      out.samples[i] += impulse_gain[m] * std::exp(-cls.decay * tau) * std::sin(omega * tau);
    }
  }

  double power = 0.0;
  for (double v : out.samples) power += v * v;
  power /= static_cast<double>(n);
  const double scale = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;
  const double noise_sd = std::pow(10.0, -cls.snr_db / 20.0);
  for (auto& v : out.samples) v = v * scale + noise_sd * rng.normal();
  return out;
}

struct LabeledSignal {
  Signal signal;
  int label = 0;
};

/// One record per class; class streams are seeded from (seed, label) only.
inline std::vector<LabeledSignal> synth_signals(const SynthSpec& spec, std::uint64_t seed) {
  validate(spec);
  const Rng master(seed);
  std::vector<LabeledSignal> out;
  out.reserve(spec.classes.size());
  for (const auto& cls : spec.classes) {
    out.push_back({synth_class_signal(spec, cls, master.split(static_cast<std::uint64_t>(cls.label))),
                   cls.label});
  }
  return out;
}

/// windows_per_class consecutive, non-overlapping windows per class, in class
/// order then acquisition order.
inline std::vector<SignalWindow> synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  const std::size_t len = spec.window_length();
  std::vector<SignalWindow> out;
  for (auto& rec : synth_signals(spec, seed)) {
    auto w = segment(rec.signal, len, len, rec.label);
    w.resize(std::min(w.size(), spec.windows_per_class));
    for (auto& x : w) out.push_back(std::move(x));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest: "path,label" rows, paths relative to the manifest's directory.

struct ManifestEntry {
  std::filesystem::path path;
  int label = 0;
};

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  const auto lines = detail::read_lines(manifest);
  const auto base = manifest.parent_path();
  std::vector<ManifestEntry> entries;
  for (std::size_t row = 0; row < lines.size(); ++row) {
    const auto line = detail::trim(lines[row]);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split_cells(line);
    if (row == 0 && cells.size() >= 2 && cells[0] == "path") continue;
    if (cells.size() != 2) {
      throw DataError(manifest.string() + ": row " + std::to_string(row + 1) +
                      ": expected 'path,label'");
    }
    const auto label = detail::parse_double(cells[1]);
    if (!label || *label < 1 || *label != std::floor(*label)) {
      throw DataError(manifest.string() + ": row " + std::to_string(row + 1) +
                      ": label must be an integer >= 1");
    }
    std::filesystem::path p{std::string(cells[0])};
    entries.push_back({p.is_absolute() ? p : base / p, static_cast<int>(*label)});
  }
  if (entries.empty()) throw DataError(manifest.string() + ": manifest lists no files");
  return entries;
}

inline void write_manifest(const std::filesystem::path& manifest,
                           const std::vector<ManifestEntry>& entries) {
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw DataError("cannot write '" + manifest.string() + "'");
  out << "path,label\n";
  for (const auto& e : entries) out << e.path.generic_string() << ',' << e.label << '\n';
}

}  // namespace vibdiag
