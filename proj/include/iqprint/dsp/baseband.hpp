#pragma once

#include <cmath>
#include <numbers>
#include <variant>

#include "iqprint/dsp/spectrum.hpp"
#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::dsp {

struct NoBaseband {};
struct KnownCenter {
  double freq_hz = 0.0;
};
struct EstimatePsdPeak {
  std::size_t nfft = 1024;
};

using BasebandMode = std::variant<NoBaseband, KnownCenter, EstimatePsdPeak>;

/// Multiplies sample k by exp(-j 2 pi f k / fs), moving content at `f` to 0 Hz.
inline ComplexSignal frequency_shift(const ComplexSignal& signal, double shift_hz) {
  if (std::abs(shift_hz) >= signal.sample_rate_hz() / 2.0)
    throw ParameterError("frequency shift " + std::to_string(shift_hz) + " Hz outside +/- fs/2");
  if (shift_hz == 0.0) return signal;
  const double step = -2.0 * std::numbers::pi * shift_hz / signal.sample_rate_hz();
  std::vector<double> out(2 * signal.size());
  for (std::size_t k = 0; k < signal.size(); ++k) {
    const cplx rot = std::polar(1.0, step * static_cast<double>(k));
    const cplx y = signal[k] * rot;
    out[2 * k] = y.real();
    out[2 * k + 1] = y.imag();
  }
  return signal.with_samples(std::move(out));
}

/// Frequency of the strongest bin of a Welch power spectrum.
inline double psd_peak_frequency(const ComplexSignal& signal, std::size_t nfft = 1024) {
  const auto psd = welch_psd(signal, nfft);
  std::size_t best = 0;
  for (std::size_t k = 1; k < psd.size(); ++k)
    if (psd[k] > psd[best]) best = k;
  if (!(psd[best] > 0.0)) throw ParameterError("no spectral peak: signal has zero power");
  return bin_frequency(best, psd.size(), signal.sample_rate_hz());
}

inline ComplexSignal baseband(const ComplexSignal& signal, const BasebandMode& mode) {
  if (std::holds_alternative<KnownCenter>(mode)) return frequency_shift(signal, std::get<KnownCenter>(mode).freq_hz);
  if (std::holds_alternative<EstimatePsdPeak>(mode))
    return frequency_shift(signal, psd_peak_frequency(signal, std::get<EstimatePsdPeak>(mode).nfft));
  return signal;
}

}  // namespace iqprint::dsp
