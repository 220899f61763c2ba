#pragma once

// Declarative architecture description and its analytic parameter layout.

#include <cstddef>
#include <string>
#include <vector>

#include "iqprint/error.hpp"
#include "iqprint/nn/complex_ops.hpp"
#include "iqprint/nn/init.hpp"
#include "iqprint/nn/recurrent.hpp"
#include "iqprint/nn/tensor.hpp"

namespace iqprint::model {

using nn::Shape;

enum class Arch { cdcn, rdcn, ann, cnn };
enum class Combiner { channel_a_only, learned_sum, conv_join };
enum class Activation { crelu, zrelu };
// How the RDCN complex linear layer spans the input: one dense map over the
// whole window, or a shared map applied to each sequencer step.
enum class RdcnBinding { full_window, per_step };

inline std::string to_string(Arch a) {
  switch (a) {
    case Arch::cdcn: return "cdcn";
    case Arch::rdcn: return "rdcn";
    case Arch::ann: return "ann";
    case Arch::cnn: return "cnn";
  }
  return "?";
}
inline Arch arch_from_string(const std::string& s) {
  if (s == "cdcn") return Arch::cdcn;
  if (s == "rdcn") return Arch::rdcn;
  if (s == "ann") return Arch::ann;
  if (s == "cnn") return Arch::cnn;
  throw ParameterError("unknown arch '" + s + "' (expected cdcn, rdcn, ann or cnn)");
}
inline std::string to_string(Combiner c) {
  switch (c) {
    case Combiner::channel_a_only: return "channel_a_only";
    case Combiner::learned_sum: return "learned_sum";
    case Combiner::conv_join: return "conv_join";
  }
  return "?";
}
inline Combiner combiner_from_string(const std::string& s) {
  if (s == "channel_a_only") return Combiner::channel_a_only;
  if (s == "learned_sum") return Combiner::learned_sum;
  if (s == "conv_join") return Combiner::conv_join;
  throw ParameterError("unknown combiner '" + s + "'");
}
inline std::string to_string(Activation a) { return a == Activation::crelu ? "crelu" : "zrelu"; }
inline Activation activation_from_string(const std::string& s) {
  if (s == "crelu") return Activation::crelu;
  if (s == "zrelu") return Activation::zrelu;
  throw ParameterError("unknown activation '" + s + "'");
}
inline std::string to_string(RdcnBinding b) { return b == RdcnBinding::full_window ? "full_window" : "per_step"; }
inline RdcnBinding binding_from_string(const std::string& s) {
  if (s == "full_window") return RdcnBinding::full_window;
  if (s == "per_step") return RdcnBinding::per_step;
  throw ParameterError("unknown rdcn binding '" + s + "'");
}

struct CdcnSpec {
  std::size_t kernel = 32, stride = 1, padding = 1;
  std::size_t conv_channels = 16;
  std::size_t pool = 8;
  std::size_t dense = 4096;
  bool operator==(const CdcnSpec&) const = default;
};

struct RdcnSpec {
  std::size_t hidden = 1024;
  std::size_t layers = 1;
  bool bidirectional = false;
  std::size_t sequencer_step = 100;
  RdcnBinding binding = RdcnBinding::full_window;
  bool operator==(const RdcnSpec&) const = default;
};

struct AnnSpec {
  std::size_t hidden1 = 2048, hidden2 = 512;
  bool operator==(const AnnSpec&) const = default;
};

struct CnnSpec {
  std::size_t kernel = 32, stride = 1, padding = 1;
  std::size_t channels = 16;
  std::size_t pool = 8;
  std::size_t dense = 4096;
  bool operator==(const CnnSpec&) const = default;
};

struct ModelSpec {
  Arch arch = Arch::cdcn;
  std::size_t class_count = 10;
  std::size_t input_len = 6400;
  Combiner combiner = Combiner::learned_sum;
  Activation activation = Activation::crelu;
  nn::InitCriterion init = nn::InitCriterion::glorot;
  double bn_eps = 1e-4;
  double bn_momentum = 0.1;
  CdcnSpec cdcn;
  RdcnSpec rdcn;
  AnnSpec ann;
  CnnSpec cnn;

  bool operator==(const ModelSpec&) const = default;

  std::size_t cdcn_conv_len() const { return nn::conv_output_length(input_len, cdcn.kernel, cdcn.stride, cdcn.padding); }
  std::size_t cdcn_pool_len() const { return cdcn_conv_len() / cdcn.pool; }
  std::size_t cnn_conv_len() const { return nn::conv_output_length(input_len, cnn.kernel, cnn.stride, cnn.padding); }
  std::size_t cnn_pool_len() const { return cnn_conv_len() / cnn.pool; }
  std::size_t rdcn_steps() const { return nn::sequence_steps(input_len, rdcn.sequencer_step); }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ParameterError("model spec: " + what);
    };
    need(class_count >= 2, "class_count must be >= 2");
    need(input_len >= 2, "input_len must be >= 2");
    need(bn_eps > 0.0, "bn_eps must be > 0");
    need(bn_momentum > 0.0 && bn_momentum < 1.0, "bn_momentum must be in (0, 1)");
    try {
      switch (arch) {
        case Arch::cdcn:
          need(cdcn.conv_channels >= 1 && cdcn.dense >= 1 && cdcn.pool >= 1, "cdcn sizes must be >= 1");
          need(input_len >= cdcn.kernel, "input_len " + std::to_string(input_len) + " shorter than kernel " +
                                             std::to_string(cdcn.kernel));
          need(cdcn_pool_len() >= 1, "cdcn pool window exceeds convolution output");
          break;
        case Arch::rdcn:
          need(rdcn.hidden >= 1 && rdcn.layers >= 1, "rdcn hidden and layers must be >= 1");
          need(rdcn.sequencer_step >= 1 && rdcn.sequencer_step <= input_len,
               "sequencer_step must be in [1, input_len]");
          break;
        case Arch::ann:
          need(ann.hidden1 >= 1 && ann.hidden2 >= 1, "ann sizes must be >= 1");
          break;
        case Arch::cnn:
          need(cnn.channels >= 1 && cnn.dense >= 1 && cnn.pool >= 1, "cnn sizes must be >= 1");
          need(input_len >= cnn.kernel, "input_len shorter than cnn kernel");
          need(cnn_pool_len() >= 1, "cnn pool window exceeds convolution output");
          break;
      }
    } catch (const ShapeError& e) {
      throw ParameterError(std::string("model spec: ") + e.what());
    }
  }
};

struct ParamShape {
  std::string name;
  Shape shape;
  int plane_axis;  // -1 for real tensors
};

/// Trainable parameter layout of a spec, in the order build_model creates
/// them. Computed without allocating anything.
inline std::vector<ParamShape> parameter_shapes(const ModelSpec& s) {
  s.validate();
  std::vector<ParamShape> p;
  auto bn = [&](const std::string& n, std::size_t c) {
    p.push_back({n + ".gamma", {3, c}, -1});
    p.push_back({n + ".beta", {2, c}, 0});
  };
  auto clin = [&](const std::string& n, std::size_t o, std::size_t f) {
    p.push_back({n + ".wa", {o, f}, -1});
    p.push_back({n + ".wb", {o, f}, -1});
    p.push_back({n + ".bias", {2, o}, 0});
  };
  auto lin = [&](const std::string& n, std::size_t o, std::size_t f) {
    p.push_back({n + ".weight", {o, f}, -1});
    p.push_back({n + ".bias", {o}, -1});
  };
  auto combiner = [&]() {
    if (s.combiner == Combiner::learned_sum) p.push_back({"combine.g", {2}, -1});
    if (s.combiner == Combiner::conv_join) {
      p.push_back({"combine.weight", {2}, -1});
      p.push_back({"combine.bias", {1}, -1});
    }
  };
  const std::size_t c = s.class_count;
  switch (s.arch) {
    case Arch::cdcn: {
      bn("bn_in", 1);
      p.push_back({"conv.wa", {s.cdcn.conv_channels, 1, s.cdcn.kernel}, -1});
      p.push_back({"conv.wb", {s.cdcn.conv_channels, 1, s.cdcn.kernel}, -1});
      p.push_back({"conv.bias", {2, s.cdcn.conv_channels}, 0});
      bn("bn_conv", s.cdcn.conv_channels);
      clin("dense", s.cdcn.dense, s.cdcn.conv_channels * s.cdcn_pool_len());
      combiner();
      lin("out", c, s.cdcn.dense);
      break;
    }
    case Arch::rdcn: {
      bn("bn_in", 1);
      const std::size_t width = s.rdcn.binding == RdcnBinding::full_window ? s.rdcn_steps() * s.rdcn.sequencer_step
                                                                           : s.rdcn.sequencer_step;
      clin("bind", width, width);
      for (const char* plane : {"lstm_a", "lstm_b"}) {
        const auto shapes = nn::Lstm<float>::cell_shapes(s.rdcn.sequencer_step, s.rdcn.hidden, s.rdcn.layers,
                                                         s.rdcn.bidirectional);
        static const char* parts[4] = {"w_ih", "w_hh", "b_ih", "b_hh"};
        for (std::size_t k = 0; k < shapes.size(); ++k)
          p.push_back({std::string(plane) + ".cell" + std::to_string(k / 4) + "." + parts[k % 4], shapes[k], -1});
      }
      const std::size_t dirs = s.rdcn.bidirectional ? 2 : 1;
      lin("out", c, 2 * s.rdcn.hidden * dirs);
      break;
    }
    case Arch::ann:
      lin("fc1", s.ann.hidden1, 2 * s.input_len);
      lin("fc2", s.ann.hidden2, s.ann.hidden1);
      lin("out", c, s.ann.hidden2);
      break;
    case Arch::cnn:
      p.push_back({"conv.weight", {s.cnn.channels, 2, s.cnn.kernel}, -1});
      p.push_back({"conv.bias", {s.cnn.channels}, -1});
      lin("dense", s.cnn.dense, s.cnn.channels * s.cnn_pool_len());
      lin("out", c, s.cnn.dense);
      break;
  }
  return p;
}

inline std::size_t parameter_count(const ModelSpec& s) {
  std::size_t n = 0;
  for (const auto& p : parameter_shapes(s)) n += nn::numel(p.shape);
  return n;
}

}  // namespace iqprint::model
