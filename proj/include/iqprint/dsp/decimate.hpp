#pragma once

#include <cmath>
#include <vector>

#include "iqprint/dsp/butterworth.hpp"
#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::dsp {

/// Largest integer factor M that keeps fs / M >= 2 * max_content_hz.
inline std::size_t max_decimation(double fs, double max_content_hz) {
  if (!(fs > 0.0) || !(max_content_hz > 0.0)) throw ParameterError("rates must be positive");
  const auto m = static_cast<std::size_t>(std::floor(fs / (2.0 * max_content_hz)));
  if (m < 1) throw ParameterError("content already exceeds Nyquist at the input rate");
  return m;
}

/// Splits the signal into M phase-offset subsequences (offsets 0..M-1), each
/// keeping every M-th sample. The tail remainder is dropped. With `antialias`
/// a third-order Butterworth lowpass at fs/(2M) runs first.
inline std::vector<ComplexSignal> decimate(const ComplexSignal& signal, std::size_t factor, bool antialias) {
  if (factor < 1) throw ParameterError("decimation factor must be >= 1");
  if (signal.size() < factor)
    throw ParameterError("signal of " + std::to_string(signal.size()) + " samples too short for factor " +
                         std::to_string(factor));
  if (factor == 1) return {signal};
  const ComplexSignal src =
      antialias ? filter_apply(design_butterworth_lowpass(signal.sample_rate_hz() / (2.0 * static_cast<double>(factor)),
                                                          3, signal.sample_rate_hz()),
                               signal)
                : signal;
  const std::size_t len = src.size() / factor;
  SignalInfo info = src.info();
  info.sample_rate_hz /= static_cast<double>(factor);
  std::vector<ComplexSignal> out;
  out.reserve(factor);
  for (std::size_t phase = 0; phase < factor; ++phase) {
    std::vector<double> buf(2 * len);
    for (std::size_t k = 0; k < len; ++k) {
      buf[2 * k] = src.i(k * factor + phase);
      buf[2 * k + 1] = src.q(k * factor + phase);
    }
    out.emplace_back(std::move(buf), info);
  }
  return out;
}

}  // namespace iqprint::dsp
