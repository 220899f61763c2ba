#pragma once

#include <optional>
#include <vector>

#include "iqprint/dsp/baseband.hpp"
#include "iqprint/dsp/butterworth.hpp"
#include "iqprint/dsp/crop.hpp"
#include "iqprint/dsp/decimate.hpp"

namespace iqprint::dsp {

struct BandpassConfig {
  double low_hz = 25e3;
  double high_hz = 20e6;
  int order = 3;
  bool operator==(const BandpassConfig&) const = default;
};

struct PreprocessConfig {
  BasebandMode baseband = NoBaseband{};
  std::optional<BandpassConfig> bandpass;
  std::size_t decimation = 1;   // M
  bool antialias = true;
  std::size_t crop_parts = 1;   // N, applied per minibatch, not here

  void validate(double fs) const {
    if (decimation < 1) throw ParameterError("decimation factor must be >= 1");
    if (crop_parts < 1) throw ParameterError("crop_parts must be >= 1");
    if (bandpass && !(bandpass->low_hz > 0.0 && bandpass->low_hz < bandpass->high_hz && bandpass->high_hz < fs / 2.0))
      throw ParameterError("bandpass cutoffs must satisfy 0 < low < high < fs/2");
    if (bandpass && bandpass->order < 1) throw ParameterError("bandpass order must be >= 1");
    if (const auto* kc = std::get_if<KnownCenter>(&baseband); kc && std::abs(kc->freq_hz) >= fs / 2.0)
      throw ParameterError("baseband center outside +/- fs/2");
  }

  // Window length after decimation.
  std::size_t output_length(std::size_t input_len) const { return input_len / decimation; }
};

/// Baseband, bandpass, then decimate. Returns the M decimated phases, each a
/// separate training example.
inline std::vector<ComplexSignal> preprocess(const ComplexSignal& signal, const PreprocessConfig& cfg) {
  cfg.validate(signal.sample_rate_hz());
  ComplexSignal s = baseband(signal, cfg.baseband);
  if (cfg.bandpass)
    s = filter_apply(design_butterworth_bandpass(cfg.bandpass->low_hz, cfg.bandpass->high_hz, cfg.bandpass->order,
                                                 s.sample_rate_hz()),
                     s);
  return decimate(s, cfg.decimation, cfg.antialias);
}

}  // namespace iqprint::dsp
