#pragma once

// Two toy baseband modulators with very different morphology: an ADS-B-like
// pulse position scheme and an OFDM-like multicarrier QPSK scheme.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::synth {

enum class Modulator { ppm, multicarrier_qpsk };

inline std::string to_string(Modulator m) { return m == Modulator::ppm ? "ppm" : "multicarrier_qpsk"; }

inline Modulator modulator_from_string(const std::string& s) {
  if (s == "ppm") return Modulator::ppm;
  if (s == "multicarrier_qpsk") return Modulator::multicarrier_qpsk;
  throw ParameterError("unknown modulator '" + s + "'");
}

inline constexpr double kPpmSlotSeconds = 2e-6;
inline constexpr std::size_t kMulticarrierSymbolLen = 64;
inline constexpr std::size_t kSubcarriers = 16;

// Samples in one PPM slot; each slot carries one bit.
inline std::size_t ppm_slot_samples(double fs) {
  const auto n = static_cast<std::size_t>(std::llround(kPpmSlotSeconds * fs));
  if (n < 2) throw ParameterError("sample rate too low for 2 us PPM slots");
  return n;
}

inline std::size_t payload_capacity(Modulator m, std::size_t window_len, double fs) {
  if (m == Modulator::ppm) return window_len / ppm_slot_samples(fs);
  return (window_len / kMulticarrierSymbolLen) * 2 * kSubcarriers;
}

// Occupied subcarrier indices: -8..-1 and 1..8 (DC left empty).
inline std::vector<int> subcarrier_indices() {
  std::vector<int> idx;
  for (int k = -static_cast<int>(kSubcarriers / 2); k <= static_cast<int>(kSubcarriers / 2); ++k)
    if (k != 0) idx.push_back(k);
  return idx;
}

/// Ideal baseband waveform for `bits`, `window_len` samples long. Slots or
/// symbols beyond the payload are silent.
inline std::vector<cplx> modulate(const std::vector<std::uint8_t>& bits, Modulator m, std::size_t window_len,
                                  double fs) {
  if (bits.size() > payload_capacity(m, window_len, fs))
    throw ParameterError("payload exceeds window: " + std::to_string(bits.size()) + " bits, capacity " +
                         std::to_string(payload_capacity(m, window_len, fs)));
  std::vector<cplx> x(window_len, cplx{});
  if (m == Modulator::ppm) {
    // Bit 1 pulses in the first half of its slot, bit 0 in the second half.
    const std::size_t slot = ppm_slot_samples(fs);
    const std::size_t half = slot / 2;
    for (std::size_t b = 0; b < bits.size(); ++b) {
      const std::size_t start = b * slot + (bits[b] ? 0 : half);
      for (std::size_t k = 0; k < half; ++k) x[start + k] = 1.0;
    }
    return x;
  }
  const auto carriers = subcarrier_indices();
  const double amp = 1.0 / std::sqrt(2.0 * static_cast<double>(kSubcarriers));
  const std::size_t bits_per_symbol = 2 * kSubcarriers;
  const std::size_t symbols = (bits.size() + bits_per_symbol - 1) / bits_per_symbol;
  for (std::size_t s = 0; s < symbols; ++s) {
    std::vector<cplx> points(kSubcarriers, cplx{});
    for (std::size_t c = 0; c < kSubcarriers; ++c) {
      const std::size_t b = s * bits_per_symbol + 2 * c;
      if (b >= bits.size()) break;
      const double re = bits[b] ? -amp : amp;
      const double im = (b + 1 < bits.size() && bits[b + 1]) ? -amp : amp;
      points[c] = {re, im};
    }
    for (std::size_t k = 0; k < kMulticarrierSymbolLen; ++k) {
      cplx acc{};
      for (std::size_t c = 0; c < kSubcarriers; ++c) {
        const double ph = 2.0 * std::numbers::pi * carriers[c] * static_cast<double>(k) /
                          static_cast<double>(kMulticarrierSymbolLen);
        acc += points[c] * std::polar(1.0, ph);
      }
      x[s * kMulticarrierSymbolLen + k] = acc;
    }
  }
  return x;
}

}  // namespace iqprint::synth
