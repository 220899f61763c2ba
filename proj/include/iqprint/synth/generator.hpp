#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqprint/dsp/augment.hpp"
#include "iqprint/error.hpp"
#include "iqprint/sigmf.hpp"
#include "iqprint/signal.hpp"
#include "iqprint/synth/impairments.hpp"
#include "iqprint/synth/modulators.hpp"

namespace iqprint::synth {

struct SynthConfig {
  std::size_t device_count = 10;
  Modulator modulator = Modulator::multicarrier_qpsk;
  double snr_db_min = 15.0;  // equal bounds give a fixed SNR
  double snr_db_max = 15.0;
  std::size_t windows_per_device = 250;
  std::size_t window_len = 6400;
  double sample_rate_hz = 100e6;
  ImpairmentSpread spread{0.06, 0.06, 0.1, 40e3, 1e-3, 0.1};
  SplitFractions split{0.8, 0.0, 0.2};
  std::uint64_t seed = 1;

  void validate() const {
    if (device_count < 2) throw ParameterError("device_count must be >= 2");
    if (windows_per_device < 2) throw ParameterError("windows_per_device must be >= 2");
    if (window_len < 1) throw ParameterError("window_len must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw ParameterError("sample_rate_hz must be positive");
    if (!(snr_db_min <= snr_db_max) || !std::isfinite(snr_db_min) || !std::isfinite(snr_db_max))
      throw ParameterError("snr range must be finite with min <= max");
    for (double s : {spread.iq_gain, spread.iq_phase, spread.dc, spread.cfo_hz, spread.phase_noise, spread.pa_cubic})
      if (!(s >= 0.0)) throw ParameterError("impairment spreads must be >= 0");
  }
};

// Independent RNG stream for (seed, device, window, purpose).
enum class Stream : std::uint32_t { roster = 1, payload = 2, impairment = 3, channel = 4, split = 5 };

inline std::mt19937_64 stream_rng(std::uint64_t seed, Stream purpose, std::uint64_t device = 0, std::uint64_t window = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),   static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(device),
                    static_cast<std::uint32_t>(window),  static_cast<std::uint32_t>(window >> 32)};
  return std::mt19937_64(seq);
}

/// Draws the device roster. Gains and phases are Gaussian around the ideal;
/// phase noise is half-normal and the PA term is compressive (c <= 0).
inline std::vector<DeviceImpairments> draw_devices(const SynthConfig& cfg) {
  cfg.validate();
  auto rng = stream_rng(cfg.seed, Stream::roster);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<DeviceImpairments> devices(cfg.device_count);
  for (auto& d : devices) {
    d.iq_gain_imbalance = std::max(0.1, 1.0 + cfg.spread.iq_gain * n01(rng));
    d.iq_phase_imbalance = cfg.spread.iq_phase * n01(rng);
    const double dc_re = cfg.spread.dc * n01(rng);
    d.dc_offset = {dc_re, cfg.spread.dc * n01(rng)};
    d.cfo_hz = cfg.spread.cfo_hz * n01(rng);
    d.phase_noise_std = std::abs(cfg.spread.phase_noise * n01(rng));
    d.pa_cubic_coeff = -std::abs(cfg.spread.pa_cubic * n01(rng));
  }
  return devices;
}

inline std::vector<std::uint8_t> random_bits(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> bits(n);
  std::bernoulli_distribution coin(0.5);
  for (auto& b : bits) b = coin(rng) ? 1 : 0;
  return bits;
}

/// Modulates `payload_bits` and passes the waveform through the device's
/// impairment chain. No channel noise is added here.
inline ComplexSignal transmit(const std::vector<std::uint8_t>& payload_bits, const DeviceImpairments& device,
                              Modulator modulator, std::size_t window_len, double fs, std::mt19937_64& rng) {
  const auto ideal = modulate(payload_bits, modulator, window_len, fs);
  const auto tx = impair(ideal, device, fs, rng);
  return ComplexSignal::from_complex(tx, SignalInfo{fs, std::nullopt, std::nullopt, std::nullopt});
}

inline std::string device_name(std::size_t d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "device_%03zu", d);
  return buf;
}

// Payload of window `w` of device `d`; drawn independently of the device.
inline std::vector<std::uint8_t> window_payload(const SynthConfig& cfg, std::size_t d, std::size_t w) {
  auto rng = stream_rng(cfg.seed, Stream::payload, d, w);
  return random_bits(payload_capacity(cfg.modulator, cfg.window_len, cfg.sample_rate_hz), rng);
}

// Ideal (unimpaired, noiseless) waveform of window `w` of device `d`.
inline std::vector<cplx> ideal_window(const SynthConfig& cfg, std::size_t d, std::size_t w) {
  return modulate(window_payload(cfg, d, w), cfg.modulator, cfg.window_len, cfg.sample_rate_hz);
}

/// Full labeled dataset: random payload per window, device impairments, AWGN
/// at the configured SNR, then a stratified split.
inline LabeledDataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const auto devices = draw_devices(cfg);
  LabeledDataset ds;
  ds.class_count = cfg.device_count;
  for (std::size_t d = 0; d < cfg.device_count; ++d) ds.class_names.push_back(device_name(d));
  ds.windows.reserve(cfg.device_count * cfg.windows_per_device);
  for (std::size_t d = 0; d < cfg.device_count; ++d) {
    for (std::size_t w = 0; w < cfg.windows_per_device; ++w) {
      auto imp_rng = stream_rng(cfg.seed, Stream::impairment, d, w);
      auto tx = transmit(window_payload(cfg, d, w), devices[d], cfg.modulator, cfg.window_len, cfg.sample_rate_hz,
                         imp_rng);
      auto ch_rng = stream_rng(cfg.seed, Stream::channel, d, w);
      std::uniform_real_distribution<double> snr(cfg.snr_db_min, cfg.snr_db_max);
      const double snr_db = cfg.snr_db_min == cfg.snr_db_max ? cfg.snr_db_min : snr(ch_rng);
      auto rx = dsp::add_awgn(tx, snr_db, ch_rng);
      SignalInfo info = rx.info();
      info.source_id = ds.class_names[d] + "/" + std::to_string(w);
      ds.windows.push_back(LabeledWindow{rx.with_info(std::move(info)), d, Split::train, ds.class_names[d] + "/" + std::to_string(w)});
    }
  }
  return stratified_split(std::move(ds), cfg.split, cfg.seed);
}

/// Dataset on disk: one SigMF recording per class, one annotation per window
/// (label = class name), plus `manifest.json` listing classes and splits.
inline void write_dataset(const LabeledDataset& ds, const std::filesystem::path& dir,
                          sigmf::Datatype datatype = sigmf::Datatype::cf32_le,
                          const nlohmann::json& provenance = nlohmann::json::object()) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "iqprint-dataset/1";
  manifest["class_count"] = ds.class_count;
  manifest["classes"] = nlohmann::json::array();
  manifest["provenance"] = provenance;
  manifest["windows"] = nlohmann::json::array();
  const double fs = ds.windows.at(0).signal.sample_rate_hz();
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    const std::string name = ds.class_name(c);
    sigmf::Meta meta;
    meta.datatype = datatype;
    meta.sample_rate_hz = fs;
    meta.global_extra["core:description"] = "synthetic transmitter " + name;
    std::vector<ComplexSignal> signals;
    std::vector<std::size_t> members;
    for (std::size_t n = 0; n < ds.windows.size(); ++n) {
      if (ds.windows[n].label != c) continue;
      signals.push_back(ds.windows[n].signal);
      members.push_back(n);
      sigmf::Annotation a;
      a.label = name;
      a.extra["iqprint:split"] = to_string(ds.windows[n].split);
      meta.annotations.push_back(std::move(a));
    }
    if (signals.empty()) continue;
    const auto base = dir / name;
    auto [mp, dp] = sigmf::pair_paths(base);
    sigmf::write_capture(meta, signals, mp, dp);
    manifest["classes"].push_back({{"name", name}, {"recording", name}});
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto& w = ds.windows[members[k]];
      manifest["windows"].push_back({{"recording", name},
                                     {"annotation", k},
                                     {"label", c},
                                     {"split", to_string(w.split)},
                                     {"transmission", w.transmission_id.value_or("")}});
    }
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

inline nlohmann::json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": JSON parse error at byte " + std::to_string(e.byte));
  }
}

/// Loads a dataset written by write_dataset.
inline LabeledDataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest = read_manifest(dir);
  LabeledDataset ds;
  try {
    ds.class_count = manifest.at("class_count").get<std::size_t>();
    ds.class_names.resize(ds.class_count);
    std::map<std::string, std::vector<ComplexSignal>> recordings;
    for (std::size_t c = 0; c < manifest.at("classes").size(); ++c) {
      const auto& entry = manifest["classes"][c];
      const auto name = entry.at("name").get<std::string>();
      ds.class_names.at(c) = name;
      auto [mp, dp] = sigmf::pair_paths(dir / entry.at("recording").get<std::string>());
      recordings[entry.at("recording").get<std::string>()] = sigmf::read_capture(mp, dp).signals;
    }
    for (const auto& w : manifest.at("windows")) {
      const auto& sigs = recordings.at(w.at("recording").get<std::string>());
      const auto idx = w.at("annotation").get<std::size_t>();
      if (idx >= sigs.size()) throw FormatError("manifest references missing annotation");
      LabeledWindow lw{sigs[idx], w.at("label").get<std::size_t>(), split_from_string(w.at("split").get<std::string>()),
                       std::nullopt};
      const auto tid = w.value("transmission", std::string{});
      if (!tid.empty()) lw.transmission_id = tid;
      ds.windows.push_back(std::move(lw));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace iqprint::synth
