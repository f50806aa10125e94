#pragma once

// One-sided FFT magnitude spectrum and the multilevel discrete wavelet
// transform (pyramid algorithm) with Daubechies filters.

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vibdiag/daubechies.hpp"
#include "vibdiag/error.hpp"

namespace vibdiag {

namespace detail {

inline void require_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v)) throw DataError(std::string(what) + ": input contains non-finite values");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fourier transform

/// In-place forward DFT, X[k] = sum_n x[n] exp(-2 pi i k n / N). Radix-2 for
/// power-of-two N, direct O(N^2) summation otherwise.
inline void dft_inplace(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (n <= 1) return;
  if (!std::has_single_bit(n)) {
    std::vector<std::complex<double>> twiddle(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle[k] = {std::cos(a), std::sin(a)};
    }
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += x[j] * twiddle[(k * j) % n];
      out[k] = acc;
    }
    x = std::move(out);
    return;
  }

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles evaluated directly (no recurrence) to keep rounding error flat.
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const std::complex<double> w{std::cos(a), std::sin(a)};
      for (std::size_t start = 0; start < n; start += len) {
        const auto u = x[start + k];
        const auto v = x[start + k + half] * w;
        x[start + k] = u + v;
        x[start + k + half] = u - v;
      }
    }
  }
}

struct Spectrum {
  std::vector<double> magnitudes;  // floor(N/2) + 1 bins
  double bin_hz = 1.0;
};

/// Unnormalized one-sided magnitude spectrum |X[k]|, k = 0..floor(N/2).
inline Spectrum fft_magnitude(std::span<const double> window, double sample_rate = 1.0) {
  if (window.size() < 2) throw ConfigError("fft_magnitude: window needs at least 2 samples");
  detail::require_finite(window, "fft_magnitude");
  std::vector<std::complex<double>> buf(window.begin(), window.end());
  dft_inplace(buf);
  const std::size_t n = window.size();
  Spectrum s;
  s.bin_hz = sample_rate / static_cast<double>(n);
  s.magnitudes.resize(n / 2 + 1);
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k) s.magnitudes[k] = std::abs(buf[k]);
  return s;
}

// ---------------------------------------------------------------------------
// Wavelet transform

enum class Boundary {
  symmetric,      // half-sample symmetric extension, floor((n + L - 1) / 2) coefficients
  periodization,  // circular, n / 2 coefficients, n must be divisible by 2^levels
};

struct WaveletParams {
  std::string family = "db10";
  int levels = 4;
  Boundary boundary = Boundary::symmetric;
  std::vector<double> scaling;  // reconstruction low-pass filter h

  static WaveletParams daubechies(int order, int levels = 4,
                                  Boundary boundary = Boundary::symmetric) {
    const auto h = detail::daubechies_scaling(order);
    if (h.empty()) throw ConfigError("wavelet: db" + std::to_string(order) + " not available (db1..db20)");
    if (levels < 1) throw ConfigError("wavelet: levels must be >= 1");
    return {"db" + std::to_string(order), levels, boundary, {h.begin(), h.end()}};
  }

  /// Parses "dbN" (also "haar" for db1).
  static WaveletParams from_name(const std::string& name, int levels = 4,
                                 Boundary boundary = Boundary::symmetric) {
    if (name == "haar") return daubechies(1, levels, boundary);
    if (name.size() > 2 && name.starts_with("db")) {
      int order = 0;
      for (char c : name.substr(2)) {
        if (c < '0' || c > '9') throw ConfigError("wavelet: unknown family '" + name + "'");
        order = order * 10 + (c - '0');
        if (order > 100) break;
      }
      return daubechies(order, levels, boundary);
    }
    throw ConfigError("wavelet: unknown family '" + name + "'");
  }

  std::size_t filter_length() const { return scaling.size(); }

  std::vector<double> rec_lo() const { return scaling; }
  std::vector<double> rec_hi() const {
    const std::size_t len = scaling.size();
    std::vector<double> g(len);
    for (std::size_t k = 0; k < len; ++k) g[k] = (k % 2 == 0 ? 1.0 : -1.0) * scaling[len - 1 - k];
    return g;
  }
  std::vector<double> dec_lo() const { return {scaling.rbegin(), scaling.rend()}; }
  std::vector<double> dec_hi() const {
    auto g = rec_hi();
    return {g.rbegin(), g.rend()};
  }

  /// Largest level count accepted for n samples: floor(log2(n / L)).
  int max_levels(std::size_t n) const {
    int lv = 0;
    std::size_t m = n / filter_length();
    while (m >= 2) {
      m /= 2;
      ++lv;
    }
    return lv;
  }
};

struct Subbands {
  std::vector<double> approximation;          // A_L
  std::vector<std::vector<double>> details;   // D_L, D_{L-1}, ..., D_1
  std::vector<std::size_t> input_lengths;     // length entering level 1..L
};

namespace detail {

inline std::size_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return static_cast<std::size_t>(i);
}

inline std::size_t wrap(std::ptrdiff_t i, std::ptrdiff_t n) {
  i %= n;
  return static_cast<std::size_t>(i < 0 ? i + n : i);
}

/// One analysis step: out[i] = sum_j f[j] x[2i + shift - j] under the boundary rule.
inline void analysis_step(std::span<const double> x, const std::vector<double>& lo,
                          const std::vector<double>& hi, Boundary boundary,
                          std::vector<double>& approx, std::vector<double>& detail) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto len = static_cast<std::ptrdiff_t>(lo.size());
  const bool periodic = boundary == Boundary::periodization;
  const std::ptrdiff_t shift = periodic ? len / 2 : 1;
  const std::size_t m = periodic ? x.size() / 2 : (x.size() + lo.size() - 1) / 2;
  approx.assign(m, 0.0);
  detail.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double a = 0.0, d = 0.0;
    const std::ptrdiff_t base = 2 * static_cast<std::ptrdiff_t>(i) + shift;
    for (std::ptrdiff_t j = 0; j < len; ++j) {
      const std::ptrdiff_t p = base - j;
      const double v = x[periodic ? wrap(p, n) : reflect(p, n)];
      a += lo[static_cast<std::size_t>(j)] * v;
      d += hi[static_cast<std::size_t>(j)] * v;
    }
    approx[i] = a;
    detail[i] = d;
  }
}

/// Adjoint of analysis_step restricted to the n original samples; the inverse
/// for orthogonal filters.
inline std::vector<double> synthesis_step(std::span<const double> approx,
                                          std::span<const double> detail, std::size_t n,
                                          const std::vector<double>& lo,
                                          const std::vector<double>& hi, Boundary boundary) {
  const auto nn = static_cast<std::ptrdiff_t>(n);
  const auto len = static_cast<std::ptrdiff_t>(lo.size());
  const bool periodic = boundary == Boundary::periodization;
  const std::ptrdiff_t shift = periodic ? len / 2 : 1;
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < approx.size(); ++i) {
    const std::ptrdiff_t base = 2 * static_cast<std::ptrdiff_t>(i) + shift;
    for (std::ptrdiff_t j = 0; j < len; ++j) {
      std::ptrdiff_t p = base - j;
      if (periodic) {
        p = static_cast<std::ptrdiff_t>(wrap(p, nn));
      } else if (p < 0 || p >= nn) {
        continue;
      }
      x[static_cast<std::size_t>(p)] +=
          lo[static_cast<std::size_t>(j)] * approx[i] + hi[static_cast<std::size_t>(j)] * detail[i];
    }
  }
  return x;
}

}  // namespace detail

inline Subbands dwt_decompose(std::span<const double> window, const WaveletParams& params) {
  detail::require_finite(window, "dwt_decompose");
  if (params.scaling.empty()) throw ConfigError("dwt_decompose: wavelet has no filter");
  if (params.levels < 1) throw ConfigError("dwt_decompose: levels must be >= 1");
  const int max_lv = params.max_levels(window.size());
  if (params.levels > max_lv) {
    throw ConfigError("dwt_decompose: " + std::to_string(window.size()) + " samples support at most " +
                      std::to_string(max_lv) + " level(s) of " + params.family + ", " +
                      std::to_string(params.levels) + " requested");
  }
  if (params.boundary == Boundary::periodization &&
      window.size() % (std::size_t{1} << params.levels) != 0) {
    throw ConfigError("dwt_decompose: periodization needs a length divisible by 2^levels");
  }
  const auto lo = params.dec_lo();
  const auto hi = params.dec_hi();
  Subbands out;
  std::vector<double> current(window.begin(), window.end());
  std::vector<std::vector<double>> fine_to_coarse;
  for (int level = 0; level < params.levels; ++level) {
    std::vector<double> a, d;
    out.input_lengths.push_back(current.size());
    detail::analysis_step(current, lo, hi, params.boundary, a, d);
    fine_to_coarse.push_back(std::move(d));
    current = std::move(a);
  }
  out.approximation = std::move(current);
  out.details.assign(fine_to_coarse.rbegin(), fine_to_coarse.rend());
  return out;
}

inline std::vector<double> dwt_reconstruct(const Subbands& subbands, const WaveletParams& params) {
  const auto levels = static_cast<std::size_t>(params.levels);
  if (subbands.details.size() != levels || subbands.input_lengths.size() != levels) {
    throw DataError("dwt_reconstruct: subbands hold " + std::to_string(subbands.details.size()) +
                    " detail level(s), wavelet expects " + std::to_string(levels));
  }
  const auto lo = params.rec_lo();
  const auto hi = params.rec_hi();
  // Synthesis uses the analysis filters' adjoint; analysis filters are the
  // reversed synthesis ones, so pass those.
  const std::vector<double> alo(lo.rbegin(), lo.rend());
  const std::vector<double> ahi(hi.rbegin(), hi.rend());
  std::vector<double> current = subbands.approximation;
  for (std::size_t k = 0; k < levels; ++k) {
    const auto& d = subbands.details[k];
    const std::size_t n = subbands.input_lengths[levels - 1 - k];
    const std::size_t expected = params.boundary == Boundary::periodization
                                     ? n / 2
                                     : (n + params.filter_length() - 1) / 2;
    if (current.size() != expected || d.size() != expected) {
      throw DataError("dwt_reconstruct: inconsistent subband lengths at level " +
                      std::to_string(levels - k));
    }
    current = detail::synthesis_step(current, d, n, alo, ahi, params.boundary);
  }
  return current;
}

}  // namespace vibdiag
