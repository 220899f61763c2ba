#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::synth {

/// Hardware imperfections of one transmitter. Fixed for the device lifetime;
/// this vector is the fingerprint.
struct DeviceImpairments {
  double iq_gain_imbalance = 1.0;   // Q branch gain relative to I
  double iq_phase_imbalance = 0.0;  // radians
  cplx dc_offset{0.0, 0.0};
  double cfo_hz = 0.0;
  double phase_noise_std = 0.0;     // radians per sample, random-walk increment
  double pa_cubic_coeff = 0.0;      // y = x + c x |x|^2

  void validate() const {
    if (!(iq_gain_imbalance > 0.0)) throw ParameterError("iq_gain_imbalance must be positive");
    if (!(phase_noise_std >= 0.0)) throw ParameterError("phase_noise_std must be non-negative");
  }
  bool operator==(const DeviceImpairments&) const = default;
};

// Standard deviations used when drawing a device roster.
struct ImpairmentSpread {
  double iq_gain = 0.0;
  double iq_phase = 0.0;
  double dc = 0.0;  // per component
  double cfo_hz = 0.0;
  double phase_noise = 0.0;
  double pa_cubic = 0.0;
  bool operator==(const ImpairmentSpread&) const = default;
};

/// Applies the impairment chain to an ideal baseband waveform, in this fixed
/// order: IQ imbalance, DC offset, PA cubic term, then carrier rotation by
/// CFO plus a Wiener phase-noise process starting at zero phase.
inline std::vector<cplx> impair(const std::vector<cplx>& ideal, const DeviceImpairments& dev, double fs,
                                std::mt19937_64& rng) {
  dev.validate();
  const double cs = std::cos(dev.iq_phase_imbalance), sn = std::sin(dev.iq_phase_imbalance);
  const double w = 2.0 * std::numbers::pi * dev.cfo_hz / fs;
  std::normal_distribution<double> walk(0.0, 1.0);
  std::vector<cplx> out(ideal.size());
  double phi = 0.0;
  for (std::size_t k = 0; k < ideal.size(); ++k) {
    const double i = ideal[k].real(), q = ideal[k].imag();
    cplx x{i, dev.iq_gain_imbalance * (q * cs + i * sn)};
    x += dev.dc_offset;
    x += dev.pa_cubic_coeff * x * std::norm(x);
    if (k > 0 && dev.phase_noise_std > 0.0) phi += dev.phase_noise_std * walk(rng);
    const double theta = w * static_cast<double>(k) + phi;
    out[k] = (theta == 0.0) ? x : x * std::polar(1.0, theta);
  }
  return out;
}

}  // namespace iqprint::synth
