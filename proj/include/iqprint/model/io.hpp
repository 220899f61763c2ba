#pragma once

// Model <-> checkpoint container.

#include <filesystem>
#include <memory>

#include "iqprint/config.hpp"
#include "iqprint/model/model.hpp"
#include "iqprint/nn/checkpoint.hpp"

namespace iqprint::model {

template <typename T>
nn::Checkpoint to_checkpoint(const Model<T>& m, const nlohmann::json& extra = nlohmann::json::object()) {
  nn::Checkpoint ck;
  ck.meta = extra;
  ck.meta["model"] = spec_to_json(m.spec());
  for (const auto& e : m.state()) {
    nn::StoredTensor st;
    st.name = e.name;
    st.shape = e.tensor.shape();
    if (e.plane_axis >= 0) st.plane_axis = e.plane_axis;
    st.values.assign(e.tensor.values().begin(), e.tensor.values().end());
    ck.tensors.push_back(std::move(st));
  }
  return ck;
}

template <typename T>
void save_model(const Model<T>& m, const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object()) {
  nn::write_checkpoint(to_checkpoint(m, extra), path);
}

/// Rebuilds the model described in the checkpoint and loads every tensor.
template <typename T>
std::unique_ptr<Model<T>> from_checkpoint(const nn::Checkpoint& ck) {
  if (!ck.meta.contains("model")) throw FormatError("checkpoint carries no model description");
  auto m = build_model<T>(spec_from_json(ck.meta.at("model")), 0);
  for (auto& e : m->state()) {
    const auto& st = ck.find(e.name);
    if (st.shape != e.tensor.shape())
      throw FormatError("checkpoint tensor '" + e.name + "' has shape " + nn::to_string(st.shape) + ", model expects " +
                        nn::to_string(e.tensor.shape()));
    auto dst = e.tensor.mutable_values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(st.values[k]);
  }
  return m;
}

template <typename T>
std::unique_ptr<Model<T>> load_model(const std::filesystem::path& path) {
  return from_checkpoint<T>(nn::read_checkpoint(path));
}

}  // namespace iqprint::model
