#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <variant>

#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::dsp {

/// Multiplies every sample by exp(j theta).
inline ComplexSignal rotate(const ComplexSignal& signal, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  std::vector<double> out(2 * signal.size());
  for (std::size_t k = 0; k < signal.size(); ++k) {
    const double x = signal.i(k), y = signal.q(k);
    out[2 * k] = x * c - y * s;
    out[2 * k + 1] = x * s + y * c;
  }
  return signal.with_samples(std::move(out));
}

/// Multiplies every sample by a real gain `a` > 0.
inline ComplexSignal scale(const ComplexSignal& signal, double a) {
  if (!(a > 0.0)) throw ParameterError("scale factor must be positive");
  std::vector<double> out(signal.interleaved().begin(), signal.interleaved().end());
  for (auto& v : out) v *= a;
  return signal.with_samples(std::move(out));
}

inline double mean_power(const ComplexSignal& s) {
  double p = 0.0;
  for (double v : s.interleaved()) p += v * v;
  return p / static_cast<double>(s.size());
}

struct Awgn {
  double snr_db = 20.0;
  std::uint64_t seed = 0;
};
struct RayleighFlat {
  std::uint64_t seed = 0;
};
struct RicianFlat {
  double k_factor = 1.0;
  std::uint64_t seed = 0;
};

using ChannelModel = std::variant<Awgn, RayleighFlat, RicianFlat>;

// Circularly-symmetric complex Gaussian with E|n|^2 = power.
inline cplx complex_gaussian(std::mt19937_64& rng, double power) {
  std::normal_distribution<double> g(0.0, std::sqrt(power / 2.0));
  const double re = g(rng);
  return {re, g(rng)};
}

// Adds complex white Gaussian noise at `snr_db` relative to the signal power
// measured over the whole window.
inline ComplexSignal add_awgn(const ComplexSignal& signal, double snr_db, std::mt19937_64& rng) {
  if (!std::isfinite(snr_db)) throw ParameterError("snr_db must be finite");
  const double ps = mean_power(signal);
  if (!(ps > 0.0)) throw ParameterError("cannot set SNR on zero signal");
  const double pn = ps / std::pow(10.0, snr_db / 10.0);
  std::normal_distribution<double> g(0.0, std::sqrt(pn / 2.0));
  std::vector<double> out(signal.interleaved().begin(), signal.interleaved().end());
  for (auto& v : out) v += g(rng);
  return signal.with_samples(std::move(out));
}

inline ComplexSignal apply_flat_gain(const ComplexSignal& signal, cplx h) {
  std::vector<double> out(2 * signal.size());
  for (std::size_t k = 0; k < signal.size(); ++k) {
    const cplx y = signal[k] * h;
    out[2 * k] = y.real();
    out[2 * k + 1] = y.imag();
  }
  return signal.with_samples(std::move(out));
}

// Rician gain with unit mean power: line-of-sight term sqrt(K/(K+1)) plus a
// scattered CN(0, 1/(K+1)) term. K = 0 is Rayleigh.
inline cplx draw_rician_gain(double k_factor, std::mt19937_64& rng) {
  if (!(k_factor >= 0.0)) throw ParameterError("Rician K factor must be >= 0");
  if (std::isinf(k_factor)) return {1.0, 0.0};
  const double los = std::sqrt(k_factor / (k_factor + 1.0));
  return cplx{los, 0.0} + complex_gaussian(rng, 1.0 / (k_factor + 1.0));
}

inline ComplexSignal channel_augment(const ComplexSignal& signal, const ChannelModel& model) {
  if (const auto* m = std::get_if<Awgn>(&model)) {
    std::mt19937_64 rng(m->seed);
    return add_awgn(signal, m->snr_db, rng);
  }
  if (const auto* m = std::get_if<RayleighFlat>(&model)) {
    std::mt19937_64 rng(m->seed);
    return apply_flat_gain(signal, draw_rician_gain(0.0, rng));
  }
  const auto& m = std::get<RicianFlat>(model);
  std::mt19937_64 rng(m.seed);
  return apply_flat_gain(signal, draw_rician_gain(m.k_factor, rng));
}

}  // namespace iqprint::dsp
