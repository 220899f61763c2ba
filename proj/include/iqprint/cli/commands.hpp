#pragma once

// The five CLI verbs as library calls, so tests can drive them directly.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqprint/config.hpp"
#include "iqprint/model/io.hpp"
#include "iqprint/model/train.hpp"
#include "iqprint/sigmf.hpp"
#include "iqprint/synth/generator.hpp"

namespace iqprint::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// Applies the global --seed override to every seeded section.
inline void apply_seed(RunConfig& c, std::uint64_t seed) {
  c.synth.seed = seed;
  c.train.seed = seed;
}

inline json cmd_generate(const RunConfig& c, std::ostream& log = std::cout) {
  validate(c);
  const auto ds = synth::generate_dataset(c.synth);
  json prov = {{"generator", "iqprint"}, {"synth", to_json(c)["synth"]}};
  synth::write_dataset(ds, c.paths.data_dir, c.datatype, prov);
  std::map<std::string, std::size_t> counts;
  for (const auto& w : ds.windows) ++counts[to_string(w.split)];
  json summary = {{"data_dir", c.paths.data_dir}, {"classes", ds.class_count}, {"windows", ds.windows.size()},
                  {"splits", counts}};
  log << summary.dump() << '\n';
  return summary;
}

/// Moves a per-class fraction of train windows into val when the dataset has
/// no val windows. Deterministic given the seed.
inline void carve_validation(LabeledDataset& ds, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || ds.count(Split::val) > 0) return;
  std::mt19937_64 rng(seed ^ 0x76616c5fu);
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t n = 0; n < ds.windows.size(); ++n)
      if (ds.windows[n].label == c && ds.windows[n].split == Split::train) idx.push_back(n);
    if (idx.size() < 2) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto take = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size()))),
                                              1, idx.size() - 1);
    for (std::size_t k = 0; k < take; ++k) ds.windows[idx[k]].split = Split::val;
  }
}

/// Preprocesses windows into a store; decimation phases become separate
/// entries sharing the source index. `only` restricts to one split.
inline model::WindowStore build_store(const LabeledDataset& ds, const dsp::PreprocessConfig& p,
                                      std::optional<Split> only = std::nullopt) {
  model::WindowStore ws;
  ws.class_count = ds.class_count;
  ws.class_names = ds.class_names;
  for (std::size_t n = 0; n < ds.windows.size(); ++n) {
    const auto& w = ds.windows[n];
    if (only && w.split != *only) continue;
    for (const auto& phase : dsp::preprocess(w.signal, p)) ws.add(phase, w.label, w.split, n);
  }
  return ws;
}

inline json cmd_preprocess(const RunConfig& c, std::ostream& log = std::cout) {
  validate(c);
  auto ds = synth::read_dataset(c.paths.data_dir);
  carve_validation(ds, c.train.val_fraction, c.train.seed);
  const auto ws = build_store(ds, c.preprocess);
  model::write_window_store(ws, c.paths.store_dir);
  json summary = {{"store_dir", c.paths.store_dir}, {"windows", ws.size()}, {"len", ws.len},
                  {"train", ws.subset(Split::train).size()}, {"val", ws.subset(Split::val).size()},
                  {"test", ws.subset(Split::test).size()}};
  log << summary.dump() << '\n';
  return summary;
}

/// Model spec with data-derived fields filled in.
inline model::ModelSpec resolve_spec(const RunConfig& c, std::size_t class_count, std::size_t store_len) {
  model::ModelSpec s = c.model;
  if (s.class_count == 0) s.class_count = class_count;
  if (s.input_len == 0) s.input_len = dsp::crop_length(store_len, c.preprocess.crop_parts);
  if (s.class_count != class_count)
    throw ConfigError("model.class_count " + std::to_string(s.class_count) + " but data has " +
                      std::to_string(class_count) + " classes");
  if (s.input_len != dsp::crop_length(store_len, c.preprocess.crop_parts))
    throw ConfigError("model.input_len " + std::to_string(s.input_len) + " does not match preprocessed length " +
                      std::to_string(dsp::crop_length(store_len, c.preprocess.crop_parts)));
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline json cmd_train(const RunConfig& c, std::ostream& log = std::cout) {
  validate(c);
  const auto ws = model::read_window_store(c.paths.store_dir);
  const auto spec = resolve_spec(c, ws.class_count, ws.len);
  auto m = model::build_model<float>(spec, c.train.seed);
  model::TrainOptions opt;
  opt.crop_parts = c.preprocess.crop_parts;
  opt.on_epoch = [&log](const model::EpochRecord& r) {
    log << "epoch " << r.epoch << " loss " << r.loss << " val_top1 " << r.val_top1 << " lr " << r.lr << '\n';
  };
  const auto hist = model::train(*m, ws.subset(Split::train), ws.subset(Split::val), c.train, opt);
  const json cfg_json = to_json(c);
  json meta = {{"class_names", ws.class_names},
               {"preprocess", cfg_json["preprocess"]},
               {"raw_window_len", ws.len * c.preprocess.decimation},
               {"parameters", m->parameter_count()}};
  if (fs::path(c.paths.checkpoint).has_parent_path()) fs::create_directories(fs::path(c.paths.checkpoint).parent_path());
  model::save_model(*m, c.paths.checkpoint, meta);
  auto hj = hist.to_json();
  hj["model"] = spec_to_json(spec);
  hj["train"] = cfg_json["train"];
  write_json(c.paths.history, hj);
  json summary = {{"checkpoint", c.paths.checkpoint}, {"best_val_top1", hist.best_val_top1},
                  {"best_epoch", hist.best_epoch}, {"epochs_run", hist.epochs.size()}, {"stop_reason", hist.stop_reason}};
  log << summary.dump() << '\n';
  return summary;
}

inline model::EvalReport cmd_eval(const RunConfig& c, std::size_t threads = 1, std::ostream& log = std::cout) {
  validate(c);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto m = model::load_model<float>(c.paths.checkpoint);
  const auto ds = synth::read_dataset(c.paths.data_dir);
  const auto t1 = clock::now();
  const auto ws = build_store(ds, c.preprocess, Split::test);
  const auto t2 = clock::now();
  if (ws.size() == 0) throw ParameterError("eval: dataset has no test windows");
  model::EvalOptions opt;
  opt.crop_parts = c.preprocess.crop_parts;
  opt.crop_seed = c.train.seed ^ 0x74657374u;
  opt.batch_size = c.eval_batch_size;
  opt.threads = threads;
  auto report = model::evaluate(*m, ws, opt);
  report.seconds.load = std::chrono::duration<double>(t1 - t0).count();
  report.seconds.preprocess += std::chrono::duration<double>(t2 - t1).count();
  write_json(c.paths.report, report.to_json());
  log << report.table();
  return report;
}

struct Ranked {
  std::size_t label;
  std::string name;
  double score;        // mean logit
  double probability;  // softmax over mean logits
};

/// Classifies one capture: every window, decimation phase and crop part is
/// scored and the logits are averaged.
inline std::vector<Ranked> cmd_fingerprint(const RunConfig& c, const fs::path& capture, std::ostream& log = std::cout) {
  validate(c);
  const auto ck = nn::read_checkpoint(c.paths.checkpoint);
  auto m = model::from_checkpoint<float>(ck);
  const auto names = ck.meta.value("class_names", std::vector<std::string>{});
  const std::size_t raw_len = ck.meta.value("raw_window_len", std::size_t{0});
  if (raw_len == 0) throw FormatError("checkpoint lacks raw_window_len");
  fs::path base = capture;
  if (base.extension() == ".sigmf-meta" || base.extension() == ".sigmf-data") base.replace_extension();
  const auto [mp, dp] = sigmf::pair_paths(base);
  const auto rec = sigmf::read_capture(mp, dp);

  model::WindowStore ws;
  ws.class_count = m->spec().class_count;
  for (const auto& sig : rec.signals)
    for (const auto& win : window_signal(sig, raw_len, raw_len))
      for (const auto& phase : dsp::preprocess(win, c.preprocess)) ws.add(phase, 0, Split::test, 0);
  const std::size_t parts = c.preprocess.crop_parts;
  model::WindowStore inputs;
  if (parts > 1) {
    inputs.class_count = ws.class_count;
    const std::size_t clen = dsp::crop_length(ws.len, parts);
    inputs.len = clen;
    for (std::size_t n = 0; n < ws.size(); ++n)
      for (std::size_t p = 0; p < parts; ++p) {
        for (std::size_t pl = 0; pl < 2; ++pl)
          inputs.data.insert(inputs.data.end(), ws.window(n) + pl * ws.len + p * clen,
                             ws.window(n) + pl * ws.len + (p + 1) * clen);
        inputs.labels.push_back(0);
        inputs.splits.push_back(Split::test);
        inputs.sources.push_back(n);
      }
  } else {
    inputs = ws;
  }
  const std::size_t cc = m->spec().class_count;
  const auto logits = model::infer_logits(*m, inputs, c.eval_batch_size, 1);
  std::vector<double> mean(cc, 0.0);
  for (std::size_t n = 0; n < inputs.size(); ++n)
    for (std::size_t k = 0; k < cc; ++k) mean[k] += logits[n * cc + k] / static_cast<double>(inputs.size());
  const double mx = *std::max_element(mean.begin(), mean.end());
  double z = 0.0;
  for (double v : mean) z += std::exp(v - mx);
  std::vector<Ranked> out;
  for (std::size_t k = 0; k < cc; ++k)
    out.push_back({k, k < names.size() ? names[k] : std::to_string(k), mean[k], std::exp(mean[k] - mx) / z});
  std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  json j = json::array();
  for (std::size_t r = 0; r < out.size(); ++r)
    j.push_back({{"rank", r + 1}, {"label", out[r].label}, {"name", out[r].name}, {"score", out[r].score},
                 {"probability", out[r].probability}});
  log << json{{"capture", base.string()}, {"inputs", inputs.size()}, {"ranking", j}}.dump(2) << '\n';
  return out;
}

}  // namespace iqprint::cli
