#pragma once

// Reader and writer for SigMF recordings: a `.sigmf-meta` JSON document next
// to a `.sigmf-data` file of little-endian interleaved samples.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqprint/error.hpp"
#include "iqprint/signal.hpp"

namespace iqprint::sigmf {

static_assert(std::endian::native == std::endian::little, "sample I/O assumes a little-endian host");

enum class Datatype { cf32_le, ci16_le };

inline std::string to_string(Datatype d) { return d == Datatype::cf32_le ? "cf32_le" : "ci16_le"; }

inline Datatype datatype_from_string(const std::string& s) {
  if (s == "cf32_le") return Datatype::cf32_le;
  if (s == "ci16_le") return Datatype::ci16_le;
  throw FormatError("unsupported datatype '" + s + "'");
}

inline std::size_t bytes_per_sample(Datatype d) { return d == Datatype::cf32_le ? 8 : 4; }

// Full-scale int16 maps to 1.0.
inline constexpr double kCi16FullScale = 32768.0;

struct Capture {
  std::uint64_t sample_start = 0;
  std::optional<double> center_freq_hz;
  std::optional<std::string> datetime;
  nlohmann::json extra = nlohmann::json::object();
  bool operator==(const Capture&) const = default;
};

struct Annotation {
  std::uint64_t sample_start = 0;
  std::uint64_t sample_count = 0;
  std::optional<std::string> label;
  nlohmann::json extra = nlohmann::json::object();
  bool operator==(const Annotation&) const = default;
};

struct Meta {
  Datatype datatype = Datatype::cf32_le;
  double sample_rate_hz = 0.0;
  std::string version = "1.0.0";
  std::vector<Capture> captures{Capture{}};
  std::vector<Annotation> annotations;
  // Keys we do not model, kept so foreign files survive a rewrite.
  nlohmann::json global_extra = nlohmann::json::object();
  nlohmann::json top_extra = nlohmann::json::object();
  bool operator==(const Meta&) const = default;
};

namespace detail {

inline nlohmann::json strip(nlohmann::json obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) obj.erase(k);
  return obj;
}

template <typename V>
V required(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw FormatError(where + ": missing required key '" + key + "'");
  try {
    return obj.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <typename V>
std::optional<V> optional_key(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  try {
    return obj.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline Meta meta_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("metadata root is not a JSON object");
  if (!doc.contains("global") || !doc["global"].is_object()) throw FormatError("metadata lacks a 'global' object");
  Meta m;
  const auto& g = doc["global"];
  m.datatype = datatype_from_string(detail::required<std::string>(g, "core:datatype", "global"));
  m.sample_rate_hz = detail::required<double>(g, "core:sample_rate", "global");
  if (!(m.sample_rate_hz > 0.0)) throw FormatError("global: core:sample_rate must be positive");
  m.version = detail::optional_key<std::string>(g, "core:version", "global").value_or("1.0.0");
  m.global_extra = detail::strip(g, {"core:datatype", "core:sample_rate", "core:version"});

  m.captures.clear();
  if (doc.contains("captures")) {
    if (!doc["captures"].is_array()) throw FormatError("'captures' is not an array");
    for (std::size_t n = 0; n < doc["captures"].size(); ++n) {
      const auto& c = doc["captures"][n];
      const std::string where = "captures[" + std::to_string(n) + "]";
      if (!c.is_object()) throw FormatError(where + " is not an object");
      Capture cap;
      cap.sample_start = detail::required<std::uint64_t>(c, "core:sample_start", where);
      cap.center_freq_hz = detail::optional_key<double>(c, "core:frequency", where);
      cap.datetime = detail::optional_key<std::string>(c, "core:datetime", where);
      cap.extra = detail::strip(c, {"core:sample_start", "core:frequency", "core:datetime"});
      m.captures.push_back(std::move(cap));
    }
  }
  if (m.captures.empty()) m.captures.push_back(Capture{});
  for (std::size_t n = 1; n < m.captures.size(); ++n)
    if (m.captures[n].sample_start <= m.captures[n - 1].sample_start)
      throw FormatError("captures must be sorted by unique core:sample_start");

  if (doc.contains("annotations")) {
    if (!doc["annotations"].is_array()) throw FormatError("'annotations' is not an array");
    for (std::size_t n = 0; n < doc["annotations"].size(); ++n) {
      const auto& a = doc["annotations"][n];
      const std::string where = "annotations[" + std::to_string(n) + "]";
      if (!a.is_object()) throw FormatError(where + " is not an object");
      Annotation ann;
      ann.sample_start = detail::required<std::uint64_t>(a, "core:sample_start", where);
      ann.sample_count = detail::required<std::uint64_t>(a, "core:sample_count", where);
      ann.label = detail::optional_key<std::string>(a, "core:label", where);
      ann.extra = detail::strip(a, {"core:sample_start", "core:sample_count", "core:label"});
      if (ann.sample_count == 0) throw FormatError(where + ": core:sample_count must be positive");
      m.annotations.push_back(std::move(ann));
    }
  }
  m.top_extra = detail::strip(doc, {"global", "captures", "annotations"});
  return m;
}

inline nlohmann::json meta_to_json(const Meta& m) {
  nlohmann::json doc = m.top_extra.is_object() ? m.top_extra : nlohmann::json::object();
  nlohmann::json g = m.global_extra.is_object() ? m.global_extra : nlohmann::json::object();
  g["core:datatype"] = to_string(m.datatype);
  g["core:sample_rate"] = m.sample_rate_hz;
  g["core:version"] = m.version;
  doc["global"] = std::move(g);
  auto caps = nlohmann::json::array();
  for (const auto& c : m.captures) {
    nlohmann::json j = c.extra.is_object() ? c.extra : nlohmann::json::object();
    j["core:sample_start"] = c.sample_start;
    if (c.center_freq_hz) j["core:frequency"] = *c.center_freq_hz;
    if (c.datetime) j["core:datetime"] = *c.datetime;
    caps.push_back(std::move(j));
  }
  doc["captures"] = std::move(caps);
  auto anns = nlohmann::json::array();
  for (const auto& a : m.annotations) {
    nlohmann::json j = a.extra.is_object() ? a.extra : nlohmann::json::object();
    j["core:sample_start"] = a.sample_start;
    j["core:sample_count"] = a.sample_count;
    if (a.label) j["core:label"] = *a.label;
    anns.push_back(std::move(j));
  }
  doc["annotations"] = std::move(anns);
  return doc;
}

inline Meta read_meta(const std::filesystem::path& meta_path) {
  std::ifstream in(meta_path, std::ios::binary);
  if (!in) throw IoError("cannot open metadata file " + meta_path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(meta_path.string() + ": JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    return meta_from_json(doc);
  } catch (const FormatError& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }
}

namespace detail {

inline void decode(Datatype dt, const std::vector<char>& raw, std::vector<double>& out) {
  if (dt == Datatype::cf32_le) {
    out.resize(raw.size() / 4);
    for (std::size_t n = 0; n < out.size(); ++n) {
      float v;
      std::memcpy(&v, raw.data() + 4 * n, 4);
      out[n] = static_cast<double>(v);
    }
  } else {
    out.resize(raw.size() / 2);
    for (std::size_t n = 0; n < out.size(); ++n) {
      std::int16_t v;
      std::memcpy(&v, raw.data() + 2 * n, 2);
      out[n] = static_cast<double>(v) / kCi16FullScale;
    }
  }
}

inline void encode(Datatype dt, std::span<const double> values, std::vector<char>& raw) {
  if (dt == Datatype::cf32_le) {
    raw.resize(values.size() * 4);
    for (std::size_t n = 0; n < values.size(); ++n) {
      const float v = static_cast<float>(values[n]);
      std::memcpy(raw.data() + 4 * n, &v, 4);
    }
  } else {
    raw.resize(values.size() * 2);
    for (std::size_t n = 0; n < values.size(); ++n) {
      const double scaled = std::nearbyint(values[n] * kCi16FullScale);
      const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      std::memcpy(raw.data() + 2 * n, &v, 2);
    }
  }
}

// Capture segment governing sample index `k`.
inline const Capture& capture_for(const Meta& m, std::uint64_t k) {
  const Capture* best = &m.captures.front();
  for (const auto& c : m.captures)
    if (c.sample_start <= k) best = &c;
  return *best;
}

}  // namespace detail

struct Recording {
  Meta meta;
  std::vector<ComplexSignal> signals;
};

/// Reads one signal per annotation, or a single signal spanning the whole data
/// file when there are none.
inline Recording read_capture(const std::filesystem::path& meta_path, const std::filesystem::path& data_path) {
  Recording rec{read_meta(meta_path), {}};
  const Meta& m = rec.meta;
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(data_path, ec);
  if (ec) throw IoError("cannot stat data file " + data_path.string() + ": " + ec.message());
  const std::size_t bps = bytes_per_sample(m.datatype);
  if (bytes % bps != 0)
    throw FormatError(data_path.string() + ": data shorter than metadata promises (trailing partial sample)");
  const std::uint64_t total = bytes / bps;
  if (m.captures.back().sample_start >= total && total > 0 && m.captures.size() > 1)
    throw FormatError(data_path.string() + ": data shorter than metadata promises (capture starts at sample " +
                      std::to_string(m.captures.back().sample_start) + ")");

  std::vector<Annotation> ranges = m.annotations;
  if (ranges.empty()) {
    if (total == 0) throw FormatError(data_path.string() + ": data file holds no samples");
    ranges.push_back(Annotation{0, total, std::nullopt, {}});
  }
  for (const auto& a : ranges)
    if (a.sample_start > total || a.sample_count > total - a.sample_start)
      throw FormatError(data_path.string() + ": data shorter than metadata promises (annotation [" +
                        std::to_string(a.sample_start) + ", +" + std::to_string(a.sample_count) + ") vs " +
                        std::to_string(total) + " samples)");

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw IoError("cannot open data file " + data_path.string());
  std::vector<char> raw;
  for (const auto& a : ranges) {
    raw.resize(a.sample_count * bps);
    in.seekg(static_cast<std::streamoff>(a.sample_start * bps));
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError("short read from " + data_path.string());
    std::vector<double> values;
    detail::decode(m.datatype, raw, values);
    const Capture& cap = detail::capture_for(m, a.sample_start);
    SignalInfo info{m.sample_rate_hz, cap.center_freq_hz, cap.datetime, a.label};
    rec.signals.emplace_back(std::move(values), std::move(info));
  }
  return rec;
}

/// Writes `signals` back to back into the data file. When `meta` carries
/// annotations there must be one per signal; their ranges are recomputed from
/// the layout and every other field is kept.
inline void write_capture(Meta meta, const std::vector<ComplexSignal>& signals,
                          const std::filesystem::path& meta_path, const std::filesystem::path& data_path) {
  if (signals.empty()) throw ParameterError("write_capture needs at least one signal");
  for (const auto& s : signals)
    if (s.sample_rate_hz() != meta.sample_rate_hz)
      throw ParameterError("signal sample rate " + std::to_string(s.sample_rate_hz()) +
                           " does not match metadata " + std::to_string(meta.sample_rate_hz));
  if (!meta.annotations.empty() && meta.annotations.size() != signals.size())
    throw ParameterError("annotation count " + std::to_string(meta.annotations.size()) + " != signal count " +
                         std::to_string(signals.size()));
  if (meta.captures.empty()) meta.captures.push_back(Capture{});

  std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open data file for writing: " + data_path.string());
  std::uint64_t cursor = 0;
  std::vector<char> raw;
  for (std::size_t n = 0; n < signals.size(); ++n) {
    detail::encode(meta.datatype, signals[n].interleaved(), raw);
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!meta.annotations.empty()) {
      meta.annotations[n].sample_start = cursor;
      meta.annotations[n].sample_count = signals[n].size();
    }
    cursor += signals[n].size();
  }
  if (!out) throw IoError("write failed: " + data_path.string());
  out.close();

  std::ofstream mout(meta_path, std::ios::trunc);
  if (!mout) throw IoError("cannot open metadata file for writing: " + meta_path.string());
  mout << meta_to_json(meta).dump(2) << '\n';
  if (!mout) throw IoError("write failed: " + meta_path.string());
}

// `<base>.sigmf-meta` / `<base>.sigmf-data` for a recording base name. Accepts
// either file of the pair or the bare base.
inline std::pair<std::filesystem::path, std::filesystem::path> pair_paths(std::filesystem::path p) {
  const auto ext = p.extension().string();
  if (ext == ".sigmf-meta" || ext == ".sigmf-data") p.replace_extension();
  auto meta = p, data = p;
  meta += ".sigmf-meta";
  data += ".sigmf-data";
  return {meta, data};
}

}  // namespace iqprint::sigmf
