#pragma once

// Checkpoint container:
//
//   bytes 0..7    magic "IQPCKPT1"
//   bytes 8..15   header length n, uint64 little-endian
//   next n bytes  UTF-8 JSON header
//   remainder     float32 little-endian tensor data, in header order
//
// The header lists each tensor's name, shape, plane axis (null for real
// tensors) and element offset into the data block, plus free-form metadata.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqprint/error.hpp"
#include "iqprint/nn/tensor.hpp"

namespace iqprint::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'I', 'Q', 'P', 'C', 'K', 'P', 'T', '1'};

struct StoredTensor {
  std::string name;
  Shape shape;
  std::optional<int> plane_axis;
  std::vector<float> values;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<StoredTensor> tensors;

  const StoredTensor& find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw FormatError("checkpoint has no tensor '" + name + "'");
  }
};

inline void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = "iqprint-checkpoint/1";
  header["meta"] = ck.meta;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : ck.tensors) {
    if (t.values.size() != numel(t.shape)) throw ShapeError("checkpoint tensor '" + t.name + "' size mismatch");
    header["tensors"].push_back({{"name", t.name},
                                 {"shape", t.shape},
                                 {"plane_axis", t.plane_axis ? nlohmann::json(*t.plane_axis) : nlohmann::json()},
                                 {"offset", offset},
                                 {"count", t.values.size()}});
    offset += t.values.size();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint64_t n = text.size();
  out.write(kCheckpointMagic, 8);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ck.tensors)
    out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 4));
  if (!out) throw IoError("write failed: " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t n = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError(path.string() + ": not an iqprint checkpoint");
  if (!in.read(reinterpret_cast<char*>(&n), 8) || n > (std::uint64_t{1} << 30))
    throw FormatError(path.string() + ": bad header length");
  std::string text(n, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(n))) throw FormatError(path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": header JSON parse error at byte " + std::to_string(e.byte));
  }
  Checkpoint ck;
  try {
    if (header.at("format") != "iqprint-checkpoint/1") throw FormatError(path.string() + ": unknown checkpoint format");
    ck.meta = header.value("meta", nlohmann::json::object());
    for (const auto& t : header.at("tensors")) {
      StoredTensor st;
      st.name = t.at("name").get<std::string>();
      st.shape = t.at("shape").get<Shape>();
      if (!t.at("plane_axis").is_null()) st.plane_axis = t.at("plane_axis").get<int>();
      const auto count = t.at("count").get<std::size_t>();
      if (count != numel(st.shape)) throw FormatError(path.string() + ": tensor '" + st.name + "' count mismatch");
      st.values.resize(count);
      if (!in.read(reinterpret_cast<char*>(st.values.data()), static_cast<std::streamsize>(count * 4)))
        throw FormatError(path.string() + ": data shorter than header promises");
      ck.tensors.push_back(std::move(st));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
  return ck;
}

}  // namespace iqprint::nn
