#pragma once

// The four classifier architectures. Every model maps an input batch
// [B, 2, L] (I and Q planes) to logits [B, C].

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "iqprint/model/spec.hpp"
#include "iqprint/nn/batch_norm.hpp"
#include "iqprint/nn/complex_ops.hpp"
#include "iqprint/nn/init.hpp"
#include "iqprint/nn/real_ops.hpp"
#include "iqprint/nn/recurrent.hpp"
#include "iqprint/nn/tensor.hpp"

namespace iqprint::model {

using nn::Tensor;

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  int plane_axis = -1;
  bool trainable = true;
};

/// LSTM state carried across minibatches within an epoch.
template <typename T>
struct RecurrentContext {
  nn::LstmState<T> a, b;
  void reset() {
    a.reset();
    b.reset();
  }
};

/// Output-channel combination of a complex feature tensor [B, 2, F] -> [B, F].
template <typename T>
struct ChannelCombiner {
  Combiner mode = Combiner::learned_sum;
  Tensor<T> weight, bias;  // learned_sum: weight = (G_a, G_b); conv_join: 1x1 kernel over the plane pair + bias

  Tensor<T> operator()(const Tensor<T>& x) const {
    switch (mode) {
      case Combiner::channel_a_only: return nn::select_plane(x, 0);
      case Combiner::learned_sum: return nn::plane_mix(x, weight, Tensor<T>());
      case Combiner::conv_join: return nn::plane_mix(x, weight, bias);
    }
    throw ParameterError("bad combiner");
  }
};

template <typename T>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelSpec& spec() const { return spec_; }

  /// x [B, 2, input_len] -> logits [B, C]. `ctx` is used only by recurrent
  /// models; null means a fresh zero context.
  virtual Tensor<T> forward(const Tensor<T>& x, bool training, RecurrentContext<T>* ctx = nullptr) = 0;
  virtual bool recurrent() const { return false; }

  /// Parameters and buffers, in a fixed order.
  std::vector<NamedTensor<T>>& state() { return state_; }
  const std::vector<NamedTensor<T>>& state() const { return state_; }

  std::vector<Tensor<T>> parameters() const {
    std::vector<Tensor<T>> p;
    for (const auto& s : state_)
      if (s.trainable) p.push_back(s.tensor);
    return p;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : state_)
      if (s.trainable) n += s.tensor.size();
    return n;
  }

  Tensor<T> find(const std::string& name) const {
    for (const auto& s : state_)
      if (s.name == name) return s.tensor;
    throw ParameterError("model has no tensor '" + name + "'");
  }

 protected:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 3 || x.dim(1) != 2 || x.dim(2) != spec_.input_len)
      throw ShapeError("model input must be [B, 2, " + std::to_string(spec_.input_len) + "], got " +
                       nn::to_string(x.shape()));
  }

  Tensor<T> param(const std::string& name, Shape shape, std::vector<T> values, int plane_axis = -1) {
    auto t = Tensor<T>::parameter(std::move(shape), std::move(values));
    state_.push_back({name, t, plane_axis, true});
    return t;
  }

  void buffer(const std::string& name, const Tensor<T>& t) { state_.push_back({name, t, -1, false}); }

  nn::ComplexBatchNorm<T> batch_norm(const std::string& name, std::size_t channels) {
    nn::ComplexBatchNorm<T> bn(channels, spec_.bn_eps, spec_.bn_momentum);
    state_.push_back({name + ".gamma", bn.gamma, -1, true});
    state_.push_back({name + ".beta", bn.beta, 0, true});
    return bn;
  }

  void register_bn_buffers(const std::string& name, const nn::ComplexBatchNorm<T>& bn) {
    buffer(name + ".running_mean", bn.running_mean);
    buffer(name + ".running_cov", bn.running_cov);
  }

  struct ComplexLinear {
    Tensor<T> wa, wb, bias;
  };

  ComplexLinear complex_weights(const std::string& name, Shape wshape, std::size_t fan_in, std::size_t fan_out,
                                nn::Rng& rng) {
    auto [a, b] = nn::complex_init<T>(nn::numel(wshape), fan_in, fan_out, spec_.init, rng);
    ComplexLinear l;
    l.wa = param(name + ".wa", wshape, std::move(a));
    l.wb = param(name + ".wb", wshape, std::move(b));
    l.bias = param(name + ".bias", {2, wshape[0]}, std::vector<T>(2 * wshape[0], T{0}), 0);
    return l;
  }

  struct Linear {
    Tensor<T> weight, bias;
  };

  Linear linear_weights(const std::string& name, std::size_t out, std::size_t in, nn::Rng& rng) {
    Linear l;
    l.weight = param(name + ".weight", {out, in}, nn::glorot_uniform<T>(out * in, in, out, rng));
    l.bias = param(name + ".bias", {out}, std::vector<T>(out, T{0}));
    return l;
  }

  ChannelCombiner<T> combiner_weights(Combiner mode) {
    ChannelCombiner<T> cb;
    cb.mode = mode;
    if (mode == Combiner::learned_sum) cb.weight = param("combine.g", {2}, {T{1}, T{1}});
    if (mode == Combiner::conv_join) {
      cb.weight = param("combine.weight", {2}, {T{0.5}, T{0.5}});
      cb.bias = param("combine.bias", {1}, {T{0}});
    }
    return cb;
  }

  Tensor<T> activate(const Tensor<T>& z) const {
    return spec_.activation == Activation::crelu ? nn::crelu(z) : nn::zrelu(z);
  }

  ModelSpec spec_;
  std::vector<NamedTensor<T>> state_;
};

template <typename T>
class Cdcn final : public Model<T> {
 public:
  Cdcn(const ModelSpec& spec, nn::Rng& rng) : Model<T>(spec) {
    const auto& c = spec.cdcn;
    bn_in_ = this->batch_norm("bn_in", 1);
    conv_ = this->complex_weights("conv", {c.conv_channels, 1, c.kernel}, c.kernel, c.conv_channels * c.kernel, rng);
    bn_conv_ = this->batch_norm("bn_conv", c.conv_channels);
    const std::size_t flat = c.conv_channels * spec.cdcn_pool_len();
    dense_ = this->complex_weights("dense", {c.dense, flat}, flat, c.dense, rng);
    combiner_ = this->combiner_weights(spec.combiner);
    out_ = this->linear_weights("out", spec.class_count, c.dense, rng);
    this->register_bn_buffers("bn_in", bn_in_);
    this->register_bn_buffers("bn_conv", bn_conv_);
  }

  Tensor<T> forward(const Tensor<T>& x, bool training, RecurrentContext<T>* = nullptr) override {
    this->check_input(x);
    const auto& c = this->spec_.cdcn;
    const std::size_t batch = x.dim(0);
    auto h = bn_in_(nn::reshape(x, {batch, 2, 1, x.dim(2)}), training);
    h = nn::complex_conv1d(h, conv_.wa, conv_.wb, conv_.bias, c.stride, c.padding);
    h = this->activate(bn_conv_(h, training));
    h = nn::pool1d(h, nn::PoolKind::avg, c.pool, c.pool);
    h = nn::reshape(h, {batch, 2, h.dim(2) * h.dim(3)});
    h = this->activate(nn::complex_linear(h, dense_.wa, dense_.wb, dense_.bias));
    return nn::linear(combiner_(h), out_.weight, out_.bias);
  }

  const ChannelCombiner<T>& combiner() const { return combiner_; }

 private:
  nn::ComplexBatchNorm<T> bn_in_, bn_conv_;
  typename Model<T>::ComplexLinear conv_, dense_;
  ChannelCombiner<T> combiner_;
  typename Model<T>::Linear out_;
};

template <typename T>
class Rdcn final : public Model<T> {
 public:
  Rdcn(const ModelSpec& spec, nn::Rng& rng) : Model<T>(spec) {
    const auto& r = spec.rdcn;
    bn_in_ = this->batch_norm("bn_in", 1);
    const std::size_t width = r.binding == RdcnBinding::full_window ? spec.rdcn_steps() * r.sequencer_step
                                                                    : r.sequencer_step;
    bind_ = this->complex_weights("bind", {width, width}, width, width, rng);
    lstm_a_ = nn::Lstm<T>(r.sequencer_step, r.hidden, r.layers, r.bidirectional, rng);
    register_lstm("lstm_a", lstm_a_);
    lstm_b_ = nn::Lstm<T>(r.sequencer_step, r.hidden, r.layers, r.bidirectional, rng);
    register_lstm("lstm_b", lstm_b_);
    out_ = this->linear_weights("out", spec.class_count, 2 * lstm_a_.output_size(), rng);
    this->register_bn_buffers("bn_in", bn_in_);
  }

  bool recurrent() const override { return true; }

  Tensor<T> forward(const Tensor<T>& x, bool training, RecurrentContext<T>* ctx = nullptr) override {
    this->check_input(x);
    const auto& r = this->spec_.rdcn;
    const std::size_t batch = x.dim(0), len = x.dim(2);
    auto h = nn::reshape(bn_in_(nn::reshape(x, {batch, 2, 1, len}), training), {batch, 2, len});
    if (r.binding == RdcnBinding::full_window) {
      h = nn::narrow_last(h, this->spec_.rdcn_steps() * r.sequencer_step);
      h = nn::sequence(nn::complex_linear(h, bind_.wa, bind_.wb, bind_.bias), r.sequencer_step);
    } else {
      h = nn::complex_linear(nn::sequence(h, r.sequencer_step), bind_.wa, bind_.wb, bind_.bias);
    }
    auto features = nn::dual_lstm_head(h, lstm_a_, lstm_b_, ctx ? &ctx->a : nullptr, ctx ? &ctx->b : nullptr);
    return nn::linear(features, out_.weight, out_.bias);
  }

 private:
  void register_lstm(const std::string& name, nn::Lstm<T>& l) {
    for (std::size_t k = 0; k < l.cells.size(); ++k) {
      const std::string p = name + ".cell" + std::to_string(k) + ".";
      this->state_.push_back({p + "w_ih", l.cells[k].w_ih, -1, true});
      this->state_.push_back({p + "w_hh", l.cells[k].w_hh, -1, true});
      this->state_.push_back({p + "b_ih", l.cells[k].b_ih, -1, true});
      this->state_.push_back({p + "b_hh", l.cells[k].b_hh, -1, true});
    }
  }

  nn::ComplexBatchNorm<T> bn_in_;
  typename Model<T>::ComplexLinear bind_;
  nn::Lstm<T> lstm_a_, lstm_b_;
  typename Model<T>::Linear out_;
};

template <typename T>
class Ann final : public Model<T> {
 public:
  Ann(const ModelSpec& spec, nn::Rng& rng) : Model<T>(spec) {
    fc1_ = this->linear_weights("fc1", spec.ann.hidden1, 2 * spec.input_len, rng);
    fc2_ = this->linear_weights("fc2", spec.ann.hidden2, spec.ann.hidden1, rng);
    out_ = this->linear_weights("out", spec.class_count, spec.ann.hidden2, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool, RecurrentContext<T>* = nullptr) override {
    this->check_input(x);
    auto h = nn::reshape(x, {x.dim(0), 2 * x.dim(2)});
    h = nn::relu(nn::linear(h, fc1_.weight, fc1_.bias));
    h = nn::relu(nn::linear(h, fc2_.weight, fc2_.bias));
    return nn::linear(h, out_.weight, out_.bias);
  }

 private:
  typename Model<T>::Linear fc1_, fc2_, out_;
};

template <typename T>
class Cnn final : public Model<T> {
 public:
  Cnn(const ModelSpec& spec, nn::Rng& rng) : Model<T>(spec) {
    const auto& c = spec.cnn;
    conv_w_ = this->param("conv.weight", {c.channels, 2, c.kernel},
                          nn::glorot_uniform<T>(c.channels * 2 * c.kernel, 2 * c.kernel, c.channels * c.kernel, rng));
    conv_b_ = this->param("conv.bias", {c.channels}, std::vector<T>(c.channels, T{0}));
    dense_ = this->linear_weights("dense", c.dense, c.channels * spec.cnn_pool_len(), rng);
    out_ = this->linear_weights("out", spec.class_count, c.dense, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool, RecurrentContext<T>* = nullptr) override {
    this->check_input(x);
    const auto& c = this->spec_.cnn;
    auto h = nn::relu(nn::conv1d(x, conv_w_, conv_b_, c.stride, c.padding));
    h = nn::pool1d(h, nn::PoolKind::avg, c.pool, c.pool);
    h = nn::reshape(h, {x.dim(0), h.dim(1) * h.dim(2)});
    h = nn::relu(nn::linear(h, dense_.weight, dense_.bias));
    return nn::linear(h, out_.weight, out_.bias);
  }

 private:
  Tensor<T> conv_w_, conv_b_;
  typename Model<T>::Linear dense_, out_;
};

/// Builds and initializes a model; identical seeds give identical weights.
template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6d6f64u};
  nn::Rng rng(seq);
  switch (spec.arch) {
    case Arch::cdcn: return std::make_unique<Cdcn<T>>(spec, rng);
    case Arch::rdcn: return std::make_unique<Rdcn<T>>(spec, rng);
    case Arch::ann: return std::make_unique<Ann<T>>(spec, rng);
    case Arch::cnn: return std::make_unique<Cnn<T>>(spec, rng);
  }
  throw ParameterError("unknown arch");
}

}  // namespace iqprint::model
