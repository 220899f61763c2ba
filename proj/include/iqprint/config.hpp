#pragma once

// Run configuration: one JSON document with sections synth, preprocess,
// model, train and paths. Every section and key is optional and defaults as
// below; unknown keys are errors.

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "iqprint/dsp/preprocess.hpp"
#include "iqprint/json_util.hpp"
#include "iqprint/model/spec.hpp"
#include "iqprint/model/train.hpp"
#include "iqprint/sigmf.hpp"
#include "iqprint/synth/generator.hpp"

namespace iqprint {

struct Paths {
  std::string data_dir = "data";          // SigMF dataset + manifest
  std::string store_dir = "store";        // preprocessed windows
  std::string checkpoint = "model.ckpt";
  std::string history = "history.json";
  std::string report = "report.json";
  bool operator==(const Paths&) const = default;
};

struct RunConfig {
  synth::SynthConfig synth;
  sigmf::Datatype datatype = sigmf::Datatype::cf32_le;
  dsp::PreprocessConfig preprocess;
  // class_count and input_len of 0 are filled in from the data.
  model::ModelSpec model = [] {
    model::ModelSpec m;
    m.class_count = 0;
    m.input_len = 0;
    return m;
  }();
  model::TrainConfig train;
  std::size_t eval_batch_size = 64;
  Paths paths;
};

using strict::Reader;
using nlohmann::json;

// --- model spec ---------------------------------------------------------

inline json spec_to_json(const model::ModelSpec& s) {
  return {{"arch", to_string(s.arch)},
          {"class_count", s.class_count},
          {"input_len", s.input_len},
          {"combiner", to_string(s.combiner)},
          {"activation", to_string(s.activation)},
          {"init", nn::to_string(s.init)},
          {"bn_eps", s.bn_eps},
          {"bn_momentum", s.bn_momentum},
          {"cdcn",
           {{"kernel", s.cdcn.kernel},
            {"stride", s.cdcn.stride},
            {"padding", s.cdcn.padding},
            {"conv_channels", s.cdcn.conv_channels},
            {"pool", s.cdcn.pool},
            {"dense", s.cdcn.dense}}},
          {"rdcn",
           {{"hidden", s.rdcn.hidden},
            {"layers", s.rdcn.layers},
            {"bidirectional", s.rdcn.bidirectional},
            {"sequencer_step", s.rdcn.sequencer_step},
            {"binding", to_string(s.rdcn.binding)}}},
          {"ann", {{"hidden1", s.ann.hidden1}, {"hidden2", s.ann.hidden2}}},
          {"cnn",
           {{"kernel", s.cnn.kernel},
            {"stride", s.cnn.stride},
            {"padding", s.cnn.padding},
            {"channels", s.cnn.channels},
            {"pool", s.cnn.pool},
            {"dense", s.cnn.dense}}}};
}

template <typename F>
auto config_enum(const Reader& r, const char* key, F parse) {
  const auto s = r.require<std::string>(key);
  try {
    return parse(s);
  } catch (const ParameterError& e) {
    throw ConfigError("'" + r.join(key) + "': " + e.what());
  }
}

inline void spec_from_json(const Reader& r, model::ModelSpec& s) {
  r.allow({"arch", "class_count", "input_len", "combiner", "activation", "init", "bn_eps", "bn_momentum", "cdcn", "rdcn",
           "ann", "cnn"});
  if (r.has("arch")) s.arch = config_enum(r, "arch", model::arch_from_string);
  r.get("class_count", s.class_count);
  r.get("input_len", s.input_len);
  if (r.has("combiner")) s.combiner = config_enum(r, "combiner", model::combiner_from_string);
  if (r.has("activation")) s.activation = config_enum(r, "activation", model::activation_from_string);
  if (r.has("init")) s.init = config_enum(r, "init", nn::init_criterion_from_string);
  r.get("bn_eps", s.bn_eps);
  r.get("bn_momentum", s.bn_momentum);
  if (r.has("cdcn")) {
    auto c = r.child("cdcn");
    c.allow({"kernel", "stride", "padding", "conv_channels", "pool", "dense"});
    c.get("kernel", s.cdcn.kernel);
    c.get("stride", s.cdcn.stride);
    c.get("padding", s.cdcn.padding);
    c.get("conv_channels", s.cdcn.conv_channels);
    c.get("pool", s.cdcn.pool);
    c.get("dense", s.cdcn.dense);
  }
  if (r.has("rdcn")) {
    auto c = r.child("rdcn");
    c.allow({"hidden", "layers", "bidirectional", "sequencer_step", "binding"});
    c.get("hidden", s.rdcn.hidden);
    c.get("layers", s.rdcn.layers);
    c.get("bidirectional", s.rdcn.bidirectional);
    c.get("sequencer_step", s.rdcn.sequencer_step);
    if (c.has("binding")) s.rdcn.binding = config_enum(c, "binding", model::binding_from_string);
  }
  if (r.has("ann")) {
    auto c = r.child("ann");
    c.allow({"hidden1", "hidden2"});
    c.get("hidden1", s.ann.hidden1);
    c.get("hidden2", s.ann.hidden2);
  }
  if (r.has("cnn")) {
    auto c = r.child("cnn");
    c.allow({"kernel", "stride", "padding", "channels", "pool", "dense"});
    c.get("kernel", s.cnn.kernel);
    c.get("stride", s.cnn.stride);
    c.get("padding", s.cnn.padding);
    c.get("channels", s.cnn.channels);
    c.get("pool", s.cnn.pool);
    c.get("dense", s.cnn.dense);
  }
}

inline model::ModelSpec spec_from_json(const json& j) {
  model::ModelSpec s;
  spec_from_json(Reader(j, "model"), s);
  return s;
}

// --- whole run config ---------------------------------------------------

inline json to_json(const RunConfig& c) {
  json j;
  const auto& sy = c.synth;
  j["synth"] = {{"device_count", sy.device_count},
                {"modulator", synth::to_string(sy.modulator)},
                {"snr_db", sy.snr_db_min == sy.snr_db_max ? json(sy.snr_db_min) : json::array({sy.snr_db_min, sy.snr_db_max})},
                {"windows_per_device", sy.windows_per_device},
                {"window_len", sy.window_len},
                {"sample_rate_hz", sy.sample_rate_hz},
                {"impairment_spread",
                 {{"iq_gain", sy.spread.iq_gain},
                  {"iq_phase", sy.spread.iq_phase},
                  {"dc", sy.spread.dc},
                  {"cfo_hz", sy.spread.cfo_hz},
                  {"phase_noise", sy.spread.phase_noise},
                  {"pa_cubic", sy.spread.pa_cubic}}},
                {"split", {{"train", sy.split.train}, {"val", sy.split.val}, {"test", sy.split.test}}},
                {"seed", sy.seed},
                {"datatype", sigmf::to_string(c.datatype)}};
  const auto& p = c.preprocess;
  json bb;
  if (std::holds_alternative<dsp::NoBaseband>(p.baseband)) bb = {{"mode", "none"}};
  if (const auto* k = std::get_if<dsp::KnownCenter>(&p.baseband)) bb = {{"mode", "known_center"}, {"freq_hz", k->freq_hz}};
  if (const auto* e = std::get_if<dsp::EstimatePsdPeak>(&p.baseband)) bb = {{"mode", "estimate_psd_peak"}, {"nfft", e->nfft}};
  j["preprocess"] = {{"baseband", bb},
                     {"bandpass", p.bandpass ? json{{"low_hz", p.bandpass->low_hz},
                                                    {"high_hz", p.bandpass->high_hz},
                                                    {"order", p.bandpass->order}}
                                             : json(nullptr)},
                     {"decimation", p.decimation},
                     {"antialias", p.antialias},
                     {"crop_parts", p.crop_parts}};
  j["model"] = spec_to_json(c.model);
  const auto& t = c.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"optimizer", model::to_string(t.optimizer)},
                {"amsgrad", t.amsgrad},
                {"lr", t.lr},
                {"weight_decay", t.weight_decay},
                {"patience", t.patience},
                {"factor", t.factor},
                {"early_stop_lr", t.early_stop_lr},
                {"loss", nn::to_string(t.loss)},
                {"val_fraction", t.val_fraction},
                {"seed", t.seed},
                {"eval_batch_size", c.eval_batch_size}};
  j["paths"] = {{"data_dir", c.paths.data_dir},
                {"store_dir", c.paths.store_dir},
                {"checkpoint", c.paths.checkpoint},
                {"history", c.paths.history},
                {"report", c.paths.report}};
  return j;
}

inline RunConfig from_json(const json& doc) {
  RunConfig c;
  Reader root(doc, "");
  root.allow({"synth", "preprocess", "model", "train", "paths"});
  if (root.has("synth")) {
    auto r = root.child("synth");
    r.allow({"device_count", "modulator", "snr_db", "windows_per_device", "window_len", "sample_rate_hz",
             "impairment_spread", "split", "seed", "datatype"});
    auto& s = c.synth;
    r.get("device_count", s.device_count);
    if (r.has("modulator")) s.modulator = config_enum(r, "modulator", synth::modulator_from_string);
    if (r.has("snr_db")) {
      const auto& v = r.raw("snr_db");
      if (v.is_number()) {
        s.snr_db_min = s.snr_db_max = v.get<double>();
      } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        s.snr_db_min = v[0].get<double>();
        s.snr_db_max = v[1].get<double>();
      } else {
        throw ConfigError("'synth.snr_db' must be a number or [min, max]");
      }
    }
    r.get("windows_per_device", s.windows_per_device);
    r.get("window_len", s.window_len);
    r.get("sample_rate_hz", s.sample_rate_hz);
    if (r.has("impairment_spread")) {
      auto i = r.child("impairment_spread");
      i.allow({"iq_gain", "iq_phase", "dc", "cfo_hz", "phase_noise", "pa_cubic"});
      i.get("iq_gain", s.spread.iq_gain);
      i.get("iq_phase", s.spread.iq_phase);
      i.get("dc", s.spread.dc);
      i.get("cfo_hz", s.spread.cfo_hz);
      i.get("phase_noise", s.spread.phase_noise);
      i.get("pa_cubic", s.spread.pa_cubic);
    }
    if (r.has("split")) {
      auto sp = r.child("split");
      sp.allow({"train", "val", "test"});
      sp.get("train", s.split.train);
      sp.get("val", s.split.val);
      sp.get("test", s.split.test);
    }
    r.get("seed", s.seed);
    if (r.has("datatype")) c.datatype = config_enum(r, "datatype", sigmf::datatype_from_string);
  }
  if (root.has("preprocess")) {
    auto r = root.child("preprocess");
    r.allow({"baseband", "bandpass", "decimation", "antialias", "crop_parts"});
    auto& p = c.preprocess;
    if (r.has("baseband")) {
      auto b = r.child("baseband");
      b.allow({"mode", "freq_hz", "nfft"});
      const auto mode = b.require<std::string>("mode");
      if (mode == "none") {
        p.baseband = dsp::NoBaseband{};
      } else if (mode == "known_center") {
        p.baseband = dsp::KnownCenter{b.require<double>("freq_hz")};
      } else if (mode == "estimate_psd_peak") {
        dsp::EstimatePsdPeak e;
        b.get("nfft", e.nfft);
        p.baseband = e;
      } else {
        throw ConfigError("'preprocess.baseband.mode' must be none, known_center or estimate_psd_peak");
      }
    }
    if (r.has("bandpass")) {
      if (r.raw("bandpass").is_null()) {
        p.bandpass.reset();
      } else {
        auto b = r.child("bandpass");
        b.allow({"low_hz", "high_hz", "order"});
        dsp::BandpassConfig bp;
        b.get("low_hz", bp.low_hz);
        b.get("high_hz", bp.high_hz);
        b.get("order", bp.order);
        p.bandpass = bp;
      }
    }
    r.get("decimation", p.decimation);
    r.get("antialias", p.antialias);
    r.get("crop_parts", p.crop_parts);
  }
  if (root.has("model")) spec_from_json(root.child("model"), c.model);
  if (root.has("train")) {
    auto r = root.child("train");
    r.allow({"epochs", "batch_size", "optimizer", "amsgrad", "lr", "weight_decay", "patience", "factor", "early_stop_lr",
             "loss", "val_fraction", "seed", "eval_batch_size"});
    auto& t = c.train;
    r.get("epochs", t.epochs);
    r.get("batch_size", t.batch_size);
    if (r.has("optimizer")) t.optimizer = config_enum(r, "optimizer", model::optimizer_from_string);
    r.get("amsgrad", t.amsgrad);
    r.get("lr", t.lr);
    r.get("weight_decay", t.weight_decay);
    r.get("patience", t.patience);
    r.get("factor", t.factor);
    r.get("early_stop_lr", t.early_stop_lr);
    if (r.has("loss")) t.loss = config_enum(r, "loss", nn::loss_kind_from_string);
    r.get("val_fraction", t.val_fraction);
    r.get("seed", t.seed);
    r.get("eval_batch_size", c.eval_batch_size);
  }
  if (root.has("paths")) {
    auto r = root.child("paths");
    r.allow({"data_dir", "store_dir", "checkpoint", "history", "report"});
    r.get("data_dir", c.paths.data_dir);
    r.get("store_dir", c.paths.store_dir);
    r.get("checkpoint", c.paths.checkpoint);
    r.get("history", c.paths.history);
    r.get("report", c.paths.report);
  }
  return c;
}

/// Checks every section; called before a command does any work.
inline void validate(const RunConfig& c) {
  try {
    c.synth.validate();
    const double sum = c.synth.split.train + c.synth.split.val + c.synth.split.test;
    if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("synth.split fractions must sum to 1");
    c.preprocess.validate(c.synth.sample_rate_hz);
    c.train.validate();
    if (c.eval_batch_size < 1) throw ParameterError("train.eval_batch_size must be >= 1");
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": JSON parse error at byte " + std::to_string(e.byte));
  }
  return from_json(doc);
}

}  // namespace iqprint
