#pragma once

// The sixteen statistical features, applied to the raw window, its magnitude
// spectrum and every wavelet subband, then concatenated.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vibdiag/error.hpp"
#include "vibdiag/feature_matrix.hpp"
#include "vibdiag/ingest.hpp"
#include "vibdiag/transforms.hpp"

namespace vibdiag {

inline constexpr std::size_t kStatCount = 16;

/// F1..F16, stored zero-based: f[0] is F1.
///
///  F1 mean             F9  3rd central moment
///  F2 maximum          F10 4th central moment
///  F3 RMS              F11 5th central moment
///  F4 std (N-1)        F12 6th central moment
///  F5 impulse factor   F13 FM4 = F10 / F14^2
///  F6 crest factor     F14 variance = F4^2
///  F7 skewness         F15 shape factor
///  F8 kurtosis         F16 entropy of |x| / sum|x|
struct FeatureVector16 {
  std::array<double, kStatCount> f{};

  double operator[](int one_based) const { return f[static_cast<std::size_t>(one_based - 1)]; }
};

/// Values with F4 <= zero_tol count as zero-variance, and max|v| <= zero_tol
/// as all-zero; both then follow the degenerate rules (affected ratios are 0).
inline FeatureVector16 stat16(std::span<const double> v, double zero_tol = 0.0) {
  const std::size_t n = v.size();
  if (n < 2) throw ConfigError("stat16: need at least 2 values");
  detail::require_finite(v, "stat16");
  const double nd = static_cast<double>(n);

  double sum = 0.0, sum_sq = 0.0, sum_abs = 0.0;
  double max_v = v[0], max_abs = 0.0;
  for (double x : v) {
    sum += x;
    sum_sq += x * x;
    sum_abs += std::abs(x);
    max_v = std::max(max_v, x);
    max_abs = std::max(max_abs, std::abs(x));
  }
  const double mean = sum / nd;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, m5 = 0.0, m6 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
    m5 += d2 * d2 * d;
    m6 += d2 * d2 * d2;
  }

  FeatureVector16 out;
  auto& f = out.f;
  const double rms = std::sqrt(sum_sq / nd);
  const double sd = std::sqrt(m2 / (nd - 1.0));
  const double mean_abs = sum_abs / nd;
  f[0] = mean;
  f[1] = max_v;
  f[2] = rms;
  f[3] = sd;
  f[8] = m3 / nd;
  f[9] = m4 / nd;
  f[10] = m5 / nd;
  f[11] = m6 / nd;
  f[13] = sd * sd;

  const bool zero_variance = !(sd > zero_tol);
  const bool all_zero = !(max_abs > zero_tol);
  if (zero_variance) {
    f[3] = 0.0;
    f[13] = 0.0;
  } else {
    f[5] = max_abs / rms;
    f[6] = m3 / ((nd - 1.0) * sd * sd * sd);
    f[7] = m4 / ((nd - 1.0) * f[13] * f[13]);
    f[12] = f[9] / (f[13] * f[13]);
  }
  if (!all_zero) {
    f[4] = max_abs / mean_abs;
    f[14] = rms / mean_abs;
    double h = 0.0;
    for (double x : v) {
      const double p = std::abs(x) / sum_abs;
      if (p > 0.0) h -= p * std::log(p);
    }
    f[15] = h;
  }
  return out;
}

inline constexpr std::size_t fused_feature_count(int levels) {
  return kStatCount * static_cast<std::size_t>(2 + levels + 1);
}

/// "time.F1".."time.F16", "freq.F1"..., "dwt.A<L>.F1"..., "dwt.D<L>.F1"... "dwt.D1.F16".
inline std::vector<std::string> fused_feature_names(int levels) {
  std::vector<std::string> blocks{"time", "freq", "dwt.A" + std::to_string(levels)};
  for (int lv = levels; lv >= 1; --lv) blocks.push_back("dwt.D" + std::to_string(lv));
  std::vector<std::string> names;
  names.reserve(blocks.size() * kStatCount);
  for (const auto& b : blocks)
    for (std::size_t i = 1; i <= kStatCount; ++i) names.push_back(b + ".F" + std::to_string(i));
  return names;
}

struct FusedFeatureVector {
  std::vector<double> values;
  std::vector<std::string> names;
};

/// Relative tolerance under which transform outputs count as exactly zero in
/// the degenerate-input rules (round-off in the DWT of constant windows).
inline constexpr double kDegenerateRelTol = 1e-12;

inline FusedFeatureVector fuse(std::span<const double> window, const WaveletParams& params) {
  detail::require_finite(window, "fuse");
  double peak = 0.0;
  for (double x : window) peak = std::max(peak, std::abs(x));
  const double tol = kDegenerateRelTol * peak;

  FusedFeatureVector out;
  out.names = fused_feature_names(params.levels);
  out.values.reserve(out.names.size());
  const auto append = [&](const FeatureVector16& s) {
    out.values.insert(out.values.end(), s.f.begin(), s.f.end());
  };
  append(stat16(window, tol));
  const auto spectrum = fft_magnitude(window);
  append(stat16(spectrum.magnitudes, tol * static_cast<double>(window.size())));
  const auto bands = dwt_decompose(window, params);
  append(stat16(bands.approximation, tol));
  for (const auto& d : bands.details) append(stat16(d, tol));
  return out;
}

/// Fused features for every labelled window; row order = window order.
inline LabeledFeatureMatrix extract_features(const std::vector<SignalWindow>& windows,
                                             const WaveletParams& params) {
  LabeledFeatureMatrix m;
  m.names = fused_feature_names(params.levels);
  m.q.resize(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(m.names.size()));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!windows[i].label) throw DataError("extract_features: window " + std::to_string(i) + " has no label");
    const auto fv = fuse(windows[i].samples, params);
    for (std::size_t j = 0; j < fv.values.size(); ++j)
      m.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fv.values[j];
    m.labels.push_back(*windows[i].label);
  }
  return m;
}

}  // namespace vibdiag
