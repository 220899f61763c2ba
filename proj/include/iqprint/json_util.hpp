#pragma once

// Strict JSON object reading: every key must be known, every value must have
// the expected type. Errors carry the dotted path of the offending key.

#include <initializer_list>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "iqprint/error.hpp"

namespace iqprint::strict {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  /// Rejects any key not in `known`.
  void allow(std::initializer_list<const char*> known) const {
    std::set<std::string> k(known.begin(), known.end());
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!k.count(it.key())) throw ConfigError("unknown key '" + join(it.key()) + "'");
  }

  bool has(const char* key) const { return obj_.contains(key); }

  template <typename V>
  void get(const char* key, V& out) const {
    if (!obj_.contains(key)) return;
    out = convert<V>(obj_.at(key), key);
  }

  template <typename V>
  V require(const char* key) const {
    if (!obj_.contains(key)) throw ConfigError("missing key '" + join(key) + "'");
    return convert<V>(obj_.at(key), key);
  }

  template <typename V>
  void get_optional(const char* key, std::optional<V>& out) const {
    if (!obj_.contains(key)) return;
    if (obj_.at(key).is_null()) {
      out.reset();
      return;
    }
    out = convert<V>(obj_.at(key), key);
  }

  Reader child(const char* key) const { return Reader(obj_.at(key), join(key)); }
  const json& raw(const char* key) const { return obj_.at(key); }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

 private:
  template <typename V>
  V convert(const json& v, const char* key) const {
    const std::string p = join(key);
    if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) throw ConfigError("'" + p + "' must be a boolean");
    } else if constexpr (std::is_integral_v<V> && std::is_unsigned_v<V>) {
      if (!v.is_number_unsigned()) throw ConfigError("'" + p + "' must be a non-negative integer");
    } else if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer()) throw ConfigError("'" + p + "' must be an integer");
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!v.is_number()) throw ConfigError("'" + p + "' must be a number");
    } else if constexpr (std::is_same_v<V, std::string>) {
      if (!v.is_string()) throw ConfigError("'" + p + "' must be a string");
    }
    try {
      return v.get<V>();
    } catch (const json::exception& e) {
      throw ConfigError("'" + p + "': " + e.what());
    }
  }

  const json& obj_;
  std::string path_;
};

}  // namespace iqprint::strict
