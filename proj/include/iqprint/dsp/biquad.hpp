#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "iqprint/signal.hpp"

namespace iqprint::dsp {

// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct BiquadSection {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> z_inv) const {
    const auto z2 = z_inv * z_inv;
    return (b0 + b1 * z_inv + b2 * z2) / (1.0 + a1 * z_inv + a2 * z2);
  }

  // Both poles strictly inside the unit circle (Jury conditions for order 2).
  bool stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }
};

struct BiquadCascade {
  std::vector<BiquadSection> sections;

  std::complex<double> response(double freq_hz, double fs) const {
    const auto z_inv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
    std::complex<double> h{1.0, 0.0};
    for (const auto& s : sections) h *= s.response(z_inv);
    return h;
  }

  double magnitude_db(double freq_hz, double fs) const { return 20.0 * std::log10(std::abs(response(freq_hz, fs))); }

  bool stable() const {
    for (const auto& s : sections)
      if (!s.stable()) return false;
    return true;
  }

  // Runs the cascade over one real stream in place, starting from zero state.
  void run(std::vector<double>& x) const {
    for (const auto& s : sections) {
      double z1 = 0.0, z2 = 0.0;  // transposed direct form II registers
      for (auto& v : x) {
        const double in = v;
        const double out = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * out + z2;
        z2 = s.b2 * in - s.a2 * out;
        v = out;
      }
    }
  }
};

/// Causal filtering of the I and Q streams, each independently and from a
/// cleared state.
inline ComplexSignal filter_apply(const BiquadCascade& filter, const ComplexSignal& signal) {
  const std::size_t n = signal.size();
  std::vector<double> i(n), q(n);
  for (std::size_t k = 0; k < n; ++k) {
    i[k] = signal.i(k);
    q[k] = signal.q(k);
  }
  filter.run(i);
  filter.run(q);
  std::vector<double> out(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    out[2 * k] = i[k];
    out[2 * k + 1] = q[k];
  }
  return signal.with_samples(std::move(out));
}

}  // namespace iqprint::dsp
