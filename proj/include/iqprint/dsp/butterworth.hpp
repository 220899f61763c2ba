#pragma once

// Butterworth designs realized as biquad cascades. Analog prototype poles are
// frequency-transformed, then mapped with the bilinear transform using
// pre-warped band edges, and finally grouped into second-order sections.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "iqprint/dsp/biquad.hpp"
#include "iqprint/error.hpp"

namespace iqprint::dsp {

namespace detail {

using zc = std::complex<double>;

inline std::vector<zc> prototype_poles(int order) {
  std::vector<zc> poles;
  for (int k = 1; k <= order; ++k)
    poles.push_back(std::polar(1.0, std::numbers::pi * (2.0 * k + order - 1) / (2.0 * order)));
  return poles;
}

inline double prewarp(double f_hz, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * f_hz / fs); }

inline zc bilinear(zc s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

// Groups digital poles into denominators: conjugate pairs first, then real
// poles two at a time; an odd leftover real pole becomes a first-order term.
struct Denominators {
  std::vector<std::pair<double, double>> quadratic;  // (a1, a2)
  std::vector<double> linear;                        // a1 of 1 + a1 z^-1
};

inline Denominators group_poles(const std::vector<zc>& poles) {
  Denominators d;
  std::vector<double> reals;
  for (const auto& p : poles) {
    const double tol = 1e-9 * std::max(1.0, std::abs(p));
    if (std::abs(p.imag()) <= tol) {
      reals.push_back(p.real());
    } else if (p.imag() > 0.0) {
      d.quadratic.emplace_back(-2.0 * p.real(), std::norm(p));
    }
  }
  std::sort(reals.begin(), reals.end());
  std::size_t r = 0;
  for (; r + 1 < reals.size(); r += 2) d.quadratic.emplace_back(-(reals[r] + reals[r + 1]), reals[r] * reals[r + 1]);
  if (r < reals.size()) d.linear.push_back(-reals[r]);
  return d;
}

inline void normalize_gain(BiquadCascade& c, double freq_hz, double fs) {
  const double mag = std::abs(c.response(freq_hz, fs));
  const double per_section = std::pow(mag, -1.0 / static_cast<double>(c.sections.size()));
  for (auto& s : c.sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
}

}  // namespace detail

/// Bandpass Butterworth of the given prototype order (2*order poles), with
/// -3.01 dB points at `low_hz` and `high_hz`.
inline BiquadCascade design_butterworth_bandpass(double low_hz, double high_hz, int order, double fs) {
  if (order < 1) throw ParameterError("filter order must be >= 1");
  if (!(fs > 0.0)) throw ParameterError("sample rate must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0))
    throw ParameterError("bandpass cutoffs must satisfy 0 < low < high < fs/2 (got " + std::to_string(low_hz) +
                         ", " + std::to_string(high_hz) + " at fs " + std::to_string(fs) + ")");
  const double w1 = detail::prewarp(low_hz, fs);
  const double w2 = detail::prewarp(high_hz, fs);
  const double w0sq = w1 * w2;
  const double bw = w2 - w1;

  std::vector<detail::zc> digital;
  for (const auto& p : detail::prototype_poles(order)) {
    const auto pb = p * bw;
    const auto root = std::sqrt(pb * pb - 4.0 * w0sq);
    digital.push_back(detail::bilinear((pb + root) / 2.0, fs));
    digital.push_back(detail::bilinear((pb - root) / 2.0, fs));
  }
  const auto den = detail::group_poles(digital);
  if (den.quadratic.size() != static_cast<std::size_t>(order) || !den.linear.empty())
    throw ParameterError("bandpass pole grouping failed (degenerate band edges)");

  BiquadCascade c;
  for (const auto& [a1, a2] : den.quadratic) c.sections.push_back({1.0, 0.0, -1.0, a1, a2});
  const double center_hz = fs / std::numbers::pi * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  detail::normalize_gain(c, center_hz, fs);
  return c;
}

/// Lowpass Butterworth with its -3.01 dB point at `cutoff_hz`.
inline BiquadCascade design_butterworth_lowpass(double cutoff_hz, int order, double fs) {
  if (order < 1) throw ParameterError("filter order must be >= 1");
  if (!(fs > 0.0)) throw ParameterError("sample rate must be positive");
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0))
    throw ParameterError("lowpass cutoff must satisfy 0 < cutoff < fs/2 (got " + std::to_string(cutoff_hz) + ")");
  const double wc = detail::prewarp(cutoff_hz, fs);
  std::vector<detail::zc> digital;
  for (const auto& p : detail::prototype_poles(order)) digital.push_back(detail::bilinear(p * wc, fs));
  const auto den = detail::group_poles(digital);

  BiquadCascade c;
  for (const auto& [a1, a2] : den.quadratic) c.sections.push_back({1.0, 2.0, 1.0, a1, a2});
  for (double a1 : den.linear) c.sections.push_back({1.0, 1.0, 0.0, a1, 0.0});
  detail::normalize_gain(c, 0.0, fs);
  return c;
}

}  // namespace iqprint::dsp
