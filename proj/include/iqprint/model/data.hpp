#pragma once

// Fixed-length windows held as planar float arrays, ready for batching.
//
// On disk a store is two files in one directory:
//   windows.bin   float32 little-endian, count x 2 x len (I plane, then Q plane)
//   index.json    {"format": "iqprint-windows/1", "count", "len", "sample_rate_hz",
//                  "class_count", "class_names", "entries": [{"label", "split", "source"}]}

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqprint/dsp/crop.hpp"
#include "iqprint/error.hpp"
#include "iqprint/nn/tensor.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::model {

struct WindowStore {
  std::size_t len = 0;
  double sample_rate_hz = 0.0;
  std::size_t class_count = 0;
  std::vector<std::string> class_names;
  std::vector<float> data;
  std::vector<std::size_t> labels;
  std::vector<Split> splits;
  std::vector<std::size_t> sources;  // originating window, shared by decimation phases

  std::size_t size() const { return labels.size(); }

  void add(const ComplexSignal& s, std::size_t label, Split split, std::size_t source) {
    if (len == 0) {
      len = s.size();
      sample_rate_hz = s.sample_rate_hz();
    }
    if (s.size() != len) throw ShapeError("window store: window length " + std::to_string(s.size()) + " != " + std::to_string(len));
    const std::size_t base = data.size();
    data.resize(base + 2 * len);
    for (std::size_t k = 0; k < len; ++k) {
      data[base + k] = static_cast<float>(s.i(k));
      data[base + len + k] = static_cast<float>(s.q(k));
    }
    labels.push_back(label);
    splits.push_back(split);
    sources.push_back(source);
  }

  const float* window(std::size_t n) const { return data.data() + n * 2 * len; }

  WindowStore subset(Split which) const {
    WindowStore out;
    out.len = len;
    out.sample_rate_hz = sample_rate_hz;
    out.class_count = class_count;
    out.class_names = class_names;
    for (std::size_t n = 0; n < size(); ++n)
      if (splits[n] == which) {
        out.data.insert(out.data.end(), window(n), window(n) + 2 * len);
        out.labels.push_back(labels[n]);
        out.splits.push_back(splits[n]);
        out.sources.push_back(sources[n]);
      }
    return out;
  }

  /// Every window cropped to one part of `parts`, drawn from `scheduler`
  /// keyed by the window's position in this store.
  WindowStore cropped(dsp::CropScheduler& scheduler) const {
    const std::size_t clen = dsp::crop_length(len, scheduler.parts());
    WindowStore out = *this;
    out.len = clen;
    out.data.assign(size() * 2 * clen, 0.0f);
    for (std::size_t n = 0; n < size(); ++n) {
      const std::size_t part = scheduler.next_part(n);
      for (std::size_t p = 0; p < 2; ++p)
        std::copy_n(window(n) + p * len + part * clen, clen, out.data.data() + (2 * n + p) * clen);
    }
    return out;
  }

  template <typename T>
  nn::Tensor<T> batch(const std::vector<std::size_t>& idx) const {
    std::vector<T> v(idx.size() * 2 * len);
    for (std::size_t b = 0; b < idx.size(); ++b)
      for (std::size_t k = 0; k < 2 * len; ++k) v[b * 2 * len + k] = static_cast<T>(window(idx[b])[k]);
    return nn::Tensor<T>({idx.size(), 2, len}, std::move(v));
  }

  std::vector<std::size_t> batch_labels(const std::vector<std::size_t>& idx) const {
    std::vector<std::size_t> l;
    for (auto n : idx) l.push_back(labels[n]);
    return l;
  }
};

inline void write_window_store(const WindowStore& ws, const std::filesystem::path& dir) {
  static_assert(std::endian::native == std::endian::little);
  std::filesystem::create_directories(dir);
  nlohmann::json idx;
  idx["format"] = "iqprint-windows/1";
  idx["count"] = ws.size();
  idx["len"] = ws.len;
  idx["sample_rate_hz"] = ws.sample_rate_hz;
  idx["class_count"] = ws.class_count;
  idx["class_names"] = ws.class_names;
  idx["entries"] = nlohmann::json::array();
  for (std::size_t n = 0; n < ws.size(); ++n)
    idx["entries"].push_back({{"label", ws.labels[n]}, {"split", to_string(ws.splits[n])}, {"source", ws.sources[n]}});
  {
    std::ofstream out(dir / "index.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "index.json").string());
    out << idx.dump(1) << '\n';
  }
  std::ofstream bin(dir / "windows.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot write " + (dir / "windows.bin").string());
  bin.write(reinterpret_cast<const char*>(ws.data.data()), static_cast<std::streamsize>(ws.data.size() * 4));
  if (!bin) throw IoError("write failed: " + (dir / "windows.bin").string());
}

inline WindowStore read_window_store(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw IoError("cannot open " + (dir / "index.json").string());
  WindowStore ws;
  try {
    const auto idx = nlohmann::json::parse(in);
    if (idx.at("format") != "iqprint-windows/1") throw FormatError("unknown window store format");
    ws.len = idx.at("len").get<std::size_t>();
    ws.sample_rate_hz = idx.at("sample_rate_hz").get<double>();
    ws.class_count = idx.at("class_count").get<std::size_t>();
    ws.class_names = idx.at("class_names").get<std::vector<std::string>>();
    for (const auto& e : idx.at("entries")) {
      ws.labels.push_back(e.at("label").get<std::size_t>());
      ws.splits.push_back(split_from_string(e.at("split").get<std::string>()));
      ws.sources.push_back(e.at("source").get<std::size_t>());
    }
    if (ws.labels.size() != idx.at("count").get<std::size_t>()) throw FormatError("window store count mismatch");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "index.json").string() + ": " + e.what());
  }
  ws.data.resize(ws.size() * 2 * ws.len);
  std::ifstream bin(dir / "windows.bin", std::ios::binary);
  if (!bin) throw IoError("cannot open " + (dir / "windows.bin").string());
  if (!bin.read(reinterpret_cast<char*>(ws.data.data()), static_cast<std::streamsize>(ws.data.size() * 4)))
    throw FormatError((dir / "windows.bin").string() + ": data shorter than index promises");
  return ws;
}

}  // namespace iqprint::model
