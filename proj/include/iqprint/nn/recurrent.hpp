#pragma once

// Sequencer reshaping, a real-valued LSTM with backpropagation through time,
// and the two-LSTM head that reads the A and B planes separately.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "iqprint/nn/init.hpp"
#include "iqprint/nn/kernels.hpp"
#include "iqprint/nn/real_ops.hpp"
#include "iqprint/nn/tensor.hpp"

namespace iqprint::nn {

/// Number of whole steps of `step` samples in `len` (tail trimmed).
inline std::size_t sequence_steps(std::size_t len, std::size_t step) {
  if (step < 1) throw ParameterError("sequencer step must be >= 1");
  if (step > len)
    throw ParameterError("sequencer step " + std::to_string(step) + " exceeds signal length " + std::to_string(len));
  return len / step;
}

/// [B, 2, L] -> [B, 2, T, S] with T = floor(L / S); trailing samples dropped.
template <typename T>
Tensor<T> sequence(const Tensor<T>& x, std::size_t step) {
  detail::require_complex(x, 3, "sequence");
  if (x.rank() != 3) throw ShapeError("sequence: expected [B, 2, L], got " + to_string(x.shape()));
  const std::size_t steps = sequence_steps(x.dim(2), step);
  return reshape(narrow_last(x, steps * step), {x.dim(0), 2, steps, step});
}

/// [B, T, H] -> [B, H] at the final step.
template <typename T>
Tensor<T> last_step(const Tensor<T>& x) {
  if (x.rank() != 3) throw ShapeError("last_step: expected [B, T, H], got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), steps = x.dim(1), h = x.dim(2);
  std::vector<T> out(batch * h);
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(x.values().data() + (b * steps + steps - 1) * h, h, out.data() + b * h);
  return make_result<T>({batch, h}, std::move(out), {x}, [batch, steps, h](Node<T>& self) {
    T* g = input_grad(self, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < h; ++k) g[(b * steps + steps - 1) * h + k] += self.grad[b * h + k];
  });
}

/// Reverses the time axis of [B, T, H].
template <typename T>
Tensor<T> reverse_time(const Tensor<T>& x) {
  if (x.rank() != 3) throw ShapeError("reverse_time: expected [B, T, H], got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), steps = x.dim(1), h = x.dim(2);
  std::vector<T> out(x.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < steps; ++t)
      std::copy_n(x.values().data() + (b * steps + t) * h, h, out.data() + (b * steps + steps - 1 - t) * h);
  return make_result<T>(x.shape(), std::move(out), {x}, [batch, steps, h](Node<T>& self) {
    T* g = input_grad(self, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t k = 0; k < h; ++k)
          g[(b * steps + steps - 1 - t) * h + k] += self.grad[(b * steps + t) * h + k];
  });
}

template <typename T>
struct LstmResult {
  Tensor<T> outputs;           // [B, T, H]
  std::vector<T> h_final, c_final;  // [B, H], plain values
};

namespace detail {
inline double sigmoid(double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }
}  // namespace detail

/// One LSTM layer over x [B, T, D]. Gate order (i, f, g, o):
///   c' = f c + i g,  h' = o tanh(c').
/// w_ih [4H, D], w_hh [4H, H], b_ih, b_hh [4H]. h0 and c0 are [B*H] values
/// (empty means zeros); no gradient flows into them.
template <typename T>
LstmResult<T> lstm_sequence(const Tensor<T>& x, const Tensor<T>& w_ih, const Tensor<T>& w_hh, const Tensor<T>& b_ih,
                            const Tensor<T>& b_hh, const std::vector<T>& h0 = {}, const std::vector<T>& c0 = {}) {
  if (x.rank() != 3) throw ShapeError("lstm: expected input [B, T, D], got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), steps = x.dim(1), d = x.dim(2);
  if (w_hh.rank() != 2 || w_hh.dim(0) != 4 * w_hh.dim(1))
    throw ShapeError("lstm: recurrent weight must be [4H, H], got " + to_string(w_hh.shape()));
  const std::size_t h = w_hh.dim(1), g4 = 4 * h;
  if (w_ih.shape() != Shape{g4, d})
    throw ShapeError("lstm: input weight " + to_string(w_ih.shape()) + " does not match step width " + std::to_string(d));
  if (b_ih.shape() != Shape{g4} || b_hh.shape() != Shape{g4}) throw ShapeError("lstm: biases must be [4H]");
  if ((!h0.empty() && h0.size() != batch * h) || (!c0.empty() && c0.size() != batch * h))
    throw ShapeError("lstm: initial state does not match [B, H]");

  auto init_h = std::make_shared<std::vector<T>>(h0.empty() ? std::vector<T>(batch * h, T{0}) : h0);
  auto init_c = std::make_shared<std::vector<T>>(c0.empty() ? std::vector<T>(batch * h, T{0}) : c0);

  // pre[(b*T + t), :] = x W_ih^T + b_ih + b_hh
  std::vector<T> pre(batch * steps * g4);
  for (std::size_t r = 0; r < batch * steps; ++r)
    for (std::size_t k = 0; k < g4; ++k) pre[r * g4 + k] = b_ih[k] + b_hh[k];
  kernels::gemm_nt(x.values().data(), w_ih.values().data(), pre.data(), batch * steps, g4, d);

  // per step: activated gates [B, 4H], cell [B, H], hidden [B, H]
  auto gates = std::make_shared<std::vector<T>>(steps * batch * g4);
  auto cells = std::make_shared<std::vector<T>>(steps * batch * h);
  auto hidden = std::make_shared<std::vector<T>>(steps * batch * h);
  std::vector<T> z(batch * g4);
  for (std::size_t t = 0; t < steps; ++t) {
    const T* hp = t ? hidden->data() + (t - 1) * batch * h : init_h->data();
    const T* cp = t ? cells->data() + (t - 1) * batch * h : init_c->data();
    for (std::size_t b = 0; b < batch; ++b) std::copy_n(pre.data() + (b * steps + t) * g4, g4, z.data() + b * g4);
    kernels::gemm_nt(hp, w_hh.values().data(), z.data(), batch, g4, h);
    T* ga = gates->data() + t * batch * g4;
    T* ct = cells->data() + t * batch * h;
    T* ht = hidden->data() + t * batch * h;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < h; ++k) {
        const T* zr = z.data() + b * g4;
        const double iv = detail::sigmoid(zr[k]), fv = detail::sigmoid(zr[h + k]);
        const double gv = std::tanh(static_cast<double>(zr[2 * h + k])), ov = detail::sigmoid(zr[3 * h + k]);
        T* gr = ga + b * g4;
        gr[k] = static_cast<T>(iv);
        gr[h + k] = static_cast<T>(fv);
        gr[2 * h + k] = static_cast<T>(gv);
        gr[3 * h + k] = static_cast<T>(ov);
        const double cv = fv * cp[b * h + k] + iv * gv;
        ct[b * h + k] = static_cast<T>(cv);
        ht[b * h + k] = static_cast<T>(ov * std::tanh(cv));
      }
  }

  std::vector<T> out(batch * steps * h);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(hidden->data() + (t * batch + b) * h, h, out.data() + (b * steps + t) * h);

  LstmResult<T> res;
  res.h_final.assign(hidden->end() - static_cast<std::ptrdiff_t>(batch * h), hidden->end());
  res.c_final.assign(cells->end() - static_cast<std::ptrdiff_t>(batch * h), cells->end());
  res.outputs = make_result<T>(
      {batch, steps, h}, std::move(out), {x, w_ih, w_hh, b_ih, b_hh},
      [=](Node<T>& self) {
        const T* gout = self.grad.data();
        const T* whh = input_value(self, 2);
        std::vector<T> dgates(batch * steps * g4);  // rows (b*T + t)
        std::vector<T> dh_next(batch * h, T{0}), dc_next(batch * h, T{0}), dg_step(batch * g4);
        T* dwhh = input_grad(self, 2);
        for (std::size_t tt = steps; tt-- > 0;) {
          const T* ga = gates->data() + tt * batch * g4;
          const T* ct = cells->data() + tt * batch * h;
          const T* cp = tt ? cells->data() + (tt - 1) * batch * h : init_c->data();
          const T* hp = tt ? hidden->data() + (tt - 1) * batch * h : init_h->data();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t k = 0; k < h; ++k) {
              const T* gr = ga + b * g4;
              const double iv = gr[k], fv = gr[h + k], gv = gr[2 * h + k], ov = gr[3 * h + k];
              const double tc = std::tanh(static_cast<double>(ct[b * h + k]));
              const double dh = gout[(b * steps + tt) * h + k] + dh_next[b * h + k];
              const double dc = dc_next[b * h + k] + dh * ov * (1.0 - tc * tc);
              T* dr = dg_step.data() + b * g4;
              dr[k] = static_cast<T>(dc * gv * iv * (1.0 - iv));
              dr[h + k] = static_cast<T>(dc * cp[b * h + k] * fv * (1.0 - fv));
              dr[2 * h + k] = static_cast<T>(dc * iv * (1.0 - gv * gv));
              dr[3 * h + k] = static_cast<T>(dh * tc * ov * (1.0 - ov));
              dc_next[b * h + k] = static_cast<T>(dc * fv);
            }
          if (dwhh) kernels::gemm_tn(dg_step.data(), hp, dwhh, g4, h, batch);
          std::fill(dh_next.begin(), dh_next.end(), T{0});
          kernels::gemm_nn(dg_step.data(), whh, dh_next.data(), batch, h, g4);
          for (std::size_t b = 0; b < batch; ++b)
            std::copy_n(dg_step.data() + b * g4, g4, dgates.data() + (b * steps + tt) * g4);
        }
        if (T* dwih = input_grad(self, 1)) kernels::gemm_tn(dgates.data(), input_value(self, 0), dwih, g4, d, batch * steps);
        if (T* dx = input_grad(self, 0)) kernels::gemm_nn(dgates.data(), input_value(self, 1), dx, batch * steps, d, g4);
        if (T* db = input_grad(self, 3)) kernels::add_column_sums(dgates.data(), db, batch * steps, g4);
        if (T* db = input_grad(self, 4)) kernels::add_column_sums(dgates.data(), db, batch * steps, g4);
      });
  return res;
}

template <typename T>
struct LstmCell {
  Tensor<T> w_ih, w_hh, b_ih, b_hh;
};

/// Hidden and cell values per LSTM cell (layer x direction), carried between
/// minibatches without graph linkage.
template <typename T>
struct LstmState {
  std::size_t batch = 0;
  std::vector<std::vector<T>> h, c;

  void reset() {
    batch = 0;
    h.clear();
    c.clear();
  }

  // Fits the stored state to `b` rows: keeps the first rows, zero-fills new ones.
  void fit(std::size_t b, std::size_t cell_count, std::size_t hidden) {
    if (h.size() != cell_count) {
      h.assign(cell_count, std::vector<T>(b * hidden, T{0}));
      c.assign(cell_count, std::vector<T>(b * hidden, T{0}));
    } else if (b != batch) {
      for (auto* v : {&h, &c})
        for (auto& cell : *v) cell.resize(b * hidden, T{0});
    }
    batch = b;
  }
};

/// Stacked, optionally bidirectional LSTM returning the final hidden features.
template <typename T>
struct Lstm {
  std::size_t input = 0, hidden = 0, layers = 1;
  bool bidirectional = false;
  std::vector<LstmCell<T>> cells;  // index layer * dirs + dir

  std::size_t directions() const { return bidirectional ? 2 : 1; }
  std::size_t output_size() const { return hidden * directions(); }

  /// Shapes of (w_ih, w_hh, b_ih, b_hh) per cell.
  static std::vector<Shape> cell_shapes(std::size_t input, std::size_t hidden, std::size_t layers, bool bidirectional) {
    std::vector<Shape> s;
    const std::size_t dirs = bidirectional ? 2 : 1;
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t d = 0; d < dirs; ++d) {
        const std::size_t in = l == 0 ? input : hidden * dirs;
        s.push_back({4 * hidden, in});
        s.push_back({4 * hidden, hidden});
        s.push_back({4 * hidden});
        s.push_back({4 * hidden});
      }
    return s;
  }

  Lstm() = default;
  Lstm(std::size_t input_, std::size_t hidden_, std::size_t layers_, bool bidirectional_, Rng& rng)
      : input(input_), hidden(hidden_), layers(layers_), bidirectional(bidirectional_) {
    if (input < 1 || hidden < 1 || layers < 1) throw ParameterError("lstm: sizes must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    const auto shapes = cell_shapes(input, hidden, layers, bidirectional);
    for (std::size_t k = 0; k < shapes.size(); k += 4) {
      LstmCell<T> cell;
      cell.w_ih = Tensor<T>::parameter(shapes[k], uniform<T>(numel(shapes[k]), bound, rng));
      cell.w_hh = Tensor<T>::parameter(shapes[k + 1], uniform<T>(numel(shapes[k + 1]), bound, rng));
      cell.b_ih = Tensor<T>::parameter(shapes[k + 2], uniform<T>(numel(shapes[k + 2]), bound, rng));
      cell.b_hh = Tensor<T>::parameter(shapes[k + 3], uniform<T>(numel(shapes[k + 3]), bound, rng));
      cells.push_back(std::move(cell));
    }
  }

  /// x [B, T, input] -> [B, output_size()]. With a state, initial (h, c) come
  /// from it and the final values are written back.
  Tensor<T> operator()(const Tensor<T>& x, LstmState<T>* state = nullptr) {
    if (x.rank() != 3 || x.dim(2) != input)
      throw ShapeError("lstm: expected [B, T, " + std::to_string(input) + "], got " + to_string(x.shape()));
    const std::size_t batch = x.dim(0), dirs = directions();
    if (state) state->fit(batch, cells.size(), hidden);
    Tensor<T> layer_in = x;
    Tensor<T> features;
    for (std::size_t l = 0; l < layers; ++l) {
      Tensor<T> outs[2];
      Tensor<T> finals[2];
      for (std::size_t d = 0; d < dirs; ++d) {
        const std::size_t k = l * dirs + d;
        auto& cell = cells[k];
        const Tensor<T> in = d == 0 ? layer_in : reverse_time(layer_in);
        static const std::vector<T> none;
        auto r = lstm_sequence(in, cell.w_ih, cell.w_hh, cell.b_ih, cell.b_hh, state ? state->h[k] : none,
                               state ? state->c[k] : none);
        if (state) {
          state->h[k] = std::move(r.h_final);
          state->c[k] = std::move(r.c_final);
        }
        finals[d] = last_step(r.outputs);
        outs[d] = d == 0 ? r.outputs : reverse_time(r.outputs);
      }
      layer_in = dirs == 2 ? concat_last(outs[0], outs[1]) : outs[0];
      features = dirs == 2 ? concat_last(finals[0], finals[1]) : finals[0];
    }
    return features;
  }
};

/// Runs lstm_a over plane A and lstm_b over plane B of x [B, 2, T, S] and
/// concatenates the final features.
template <typename T>
Tensor<T> dual_lstm_head(const Tensor<T>& x, Lstm<T>& lstm_a, Lstm<T>& lstm_b, LstmState<T>* state_a = nullptr,
                         LstmState<T>* state_b = nullptr) {
  if (x.rank() != 4 || x.dim(1) != 2) throw ShapeError("dual_lstm_head: expected [B, 2, T, S], got " + to_string(x.shape()));
  return concat_last(lstm_a(select_plane(x, 0), state_a), lstm_b(select_plane(x, 1), state_b));
}

}  // namespace iqprint::nn
