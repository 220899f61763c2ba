#pragma once

// Real-valued layers and shape plumbing.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "iqprint/nn/complex_ops.hpp"
#include "iqprint/nn/kernels.hpp"
#include "iqprint/nn/tensor.hpp"

namespace iqprint::nn {

/// Dense layer on the last axis: x [..., F], w [O, F], b [O] -> [..., O].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() < 1 || w.rank() != 2 || w.dim(1) != x.shape().back())
    throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " + to_string(w.shape()));
  const std::size_t f = w.dim(1), o = w.dim(0), n = x.size() / f;
  if (b.shape() != Shape{o}) throw ShapeError("linear: bias must be [" + std::to_string(o) + "]");
  std::vector<T> out(n * o);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(b.values().data(), o, out.data() + r * o);
  kernels::gemm_nt(x.values().data(), w.values().data(), out.data(), n, o, f);
  Shape shape = x.shape();
  shape.back() = o;
  return make_result<T>(std::move(shape), std::move(out), {x, w, b}, [n, f, o](Node<T>& self) {
    const T* g = self.grad.data();
    if (T* gx = input_grad(self, 0)) kernels::gemm_nn(g, input_value(self, 1), gx, n, f, o);
    if (T* gw = input_grad(self, 1)) kernels::gemm_tn(g, input_value(self, 0), gw, o, f, n);
    if (T* gb = input_grad(self, 2)) kernels::add_column_sums(g, gb, n, o);
  });
}

/// Real 1-D convolution: x [B, Cin, L], w [Cout, Cin, K], b [Cout] -> [B, Cout, Lout].
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride, std::size_t padding) {
  if (x.rank() != 3 || w.rank() != 3 || w.dim(1) != x.dim(1))
    throw ShapeError("conv1d: input " + to_string(x.shape()) + " incompatible with kernel " + to_string(w.shape()));
  const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2), cout = w.dim(0), kernel = w.dim(2);
  if (b.shape() != Shape{cout}) throw ShapeError("conv1d: bias must be [Cout]");
  const std::size_t lout = conv_output_length(len, kernel, stride, padding);
  const std::size_t width = cin * kernel, rows = batch * lout;
  auto col = std::make_shared<std::vector<T>>(rows * width);
  detail::im2col(x.values().data(), col->data(), batch, cin, len, cin * len, 0, kernel, stride, padding, lout);
  std::vector<T> o(rows * cout);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(b.values().data(), cout, o.data() + r * cout);
  kernels::gemm_nt(col->data(), w.values().data(), o.data(), rows, cout, width);
  std::vector<T> out(batch * cout * lout);
  detail::rows_to_channels(o.data(), out.data(), batch, cout, lout, cout * lout, 0);
  return make_result<T>({batch, cout, lout}, std::move(out), {x, w, b}, [=](Node<T>& self) {
    std::vector<T> g(rows * cout);
    detail::channels_to_rows(self.grad.data(), g.data(), batch, cout, lout, cout * lout, 0);
    if (T* gw = input_grad(self, 1)) kernels::gemm_tn(g.data(), col->data(), gw, cout, width, rows);
    if (T* gb = input_grad(self, 2)) kernels::add_column_sums(g.data(), gb, rows, cout);
    if (T* gx = input_grad(self, 0)) {
      std::vector<T> dcol(rows * width, T{0});
      kernels::gemm_nn(g.data(), input_value(self, 1), dcol.data(), rows, width, cout);
      detail::col2im_add(dcol.data(), gx, batch, cin, len, cin * len, 0, kernel, stride, padding, lout);
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > T{0} ? v : T{0};
  return make_result<T>(x.shape(), std::move(out), {x}, [](Node<T>& self) {
    T* g = input_grad(self, 0);
    const T* v = input_value(self, 0);
    for (std::size_t n = 0; n < self.grad.size(); ++n)
      if (v[n] > T{0}) g[n] += self.grad[n];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: " + to_string(x.shape()) + " cannot become " + to_string(shape));
  return make_result<T>(std::move(shape), std::vector<T>(x.values().begin(), x.values().end()), {x},
                        [](Node<T>& self) {
                          T* g = input_grad(self, 0);
                          for (std::size_t n = 0; n < self.grad.size(); ++n) g[n] += self.grad[n];
                        });
}

/// Keeps the first `len` entries of the last axis.
template <typename T>
Tensor<T> narrow_last(const Tensor<T>& x, std::size_t len) {
  const std::size_t full = x.shape().back();
  if (len < 1 || len > full) throw ShapeError("narrow_last: length " + std::to_string(len) + " outside [1, " + std::to_string(full) + "]");
  if (len == full) return x;
  const std::size_t lines = x.size() / full;
  std::vector<T> out(lines * len);
  for (std::size_t l = 0; l < lines; ++l) std::copy_n(x.values().data() + l * full, len, out.data() + l * len);
  Shape shape = x.shape();
  shape.back() = len;
  return make_result<T>(std::move(shape), std::move(out), {x}, [lines, full, len](Node<T>& self) {
    T* g = input_grad(self, 0);
    for (std::size_t l = 0; l < lines; ++l)
      for (std::size_t k = 0; k < len; ++k) g[l * full + k] += self.grad[l * len + k];
  });
}

/// Plane `p` of a [B, 2, ...] tensor as [B, ...].
template <typename T>
Tensor<T> select_plane(const Tensor<T>& x, std::size_t p) {
  detail::require_complex(x, 2, "select_plane");
  if (p > 1) throw ShapeError("select_plane: plane must be 0 or 1");
  const std::size_t batch = x.dim(0), ps = x.size() / (2 * batch);
  Shape shape{batch};
  shape.insert(shape.end(), x.shape().begin() + 2, x.shape().end());
  std::vector<T> out(batch * ps);
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(x.values().data() + (2 * b + p) * ps, ps, out.data() + b * ps);
  return make_result<T>(std::move(shape), std::move(out), {x}, [batch, ps, p](Node<T>& self) {
    T* g = input_grad(self, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < ps; ++k) g[(2 * b + p) * ps + k] += self.grad[b * ps + k];
  });
}

/// Concatenation along the last axis.
template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank() || !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin()))
    throw ShapeError("concat_last: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const std::size_t fa = a.shape().back(), fb = b.shape().back(), lines = a.size() / fa;
  std::vector<T> out(lines * (fa + fb));
  for (std::size_t l = 0; l < lines; ++l) {
    std::copy_n(a.values().data() + l * fa, fa, out.data() + l * (fa + fb));
    std::copy_n(b.values().data() + l * fb, fb, out.data() + l * (fa + fb) + fa);
  }
  Shape shape = a.shape();
  shape.back() = fa + fb;
  return make_result<T>(std::move(shape), std::move(out), {a, b}, [lines, fa, fb](Node<T>& self) {
    T* ga = input_grad(self, 0);
    T* gb = input_grad(self, 1);
    for (std::size_t l = 0; l < lines; ++l) {
      const T* g = self.grad.data() + l * (fa + fb);
      if (ga)
        for (std::size_t k = 0; k < fa; ++k) ga[l * fa + k] += g[k];
      if (gb)
        for (std::size_t k = 0; k < fb; ++k) gb[l * fb + k] += g[fa + k];
    }
  });
}

/// Weighted plane sum of a [B, 2, ...] tensor: w[0] * A + w[1] * B (+ bias[0]).
/// `bias` may be an empty Tensor.
template <typename T>
Tensor<T> plane_mix(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  detail::require_complex(x, 2, "plane_mix");
  if (w.shape() != Shape{2}) throw ShapeError("plane_mix: weights must be [2]");
  const bool has_bias = static_cast<bool>(bias);
  if (has_bias && bias.shape() != Shape{1}) throw ShapeError("plane_mix: bias must be [1]");
  const std::size_t batch = x.dim(0), ps = x.size() / (2 * batch);
  const T w0 = w[0], w1 = w[1], c = has_bias ? bias[0] : T{0};
  Shape shape{batch};
  shape.insert(shape.end(), x.shape().begin() + 2, x.shape().end());
  std::vector<T> out(batch * ps);
  const T* v = x.values().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < ps; ++k) out[b * ps + k] = w0 * v[2 * b * ps + k] + w1 * v[(2 * b + 1) * ps + k] + c;
  std::vector<Tensor<T>> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result<T>(std::move(shape), std::move(out), std::move(inputs), [batch, ps, has_bias](Node<T>& self) {
    const T* v = input_value(self, 0);
    const T* wv = input_value(self, 1);
    T* gx = input_grad(self, 0);
    T* gw = input_grad(self, 1);
    T* gc = has_bias ? input_grad(self, 2) : nullptr;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < ps; ++k) {
        const T g = self.grad[b * ps + k];
        const std::size_t ia = 2 * b * ps + k, ib = ia + ps;
        if (gx) {
          gx[ia] += wv[0] * g;
          gx[ib] += wv[1] * g;
        }
        if (gw) {
          gw[0] += v[ia] * g;
          gw[1] += v[ib] * g;
        }
        if (gc) gc[0] += g;
      }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc{0};
  for (T v : x.values()) acc += v;
  return make_result<T>({1}, {acc}, {x}, [](Node<T>& self) {
    T* g = input_grad(self, 0);
    const std::size_t n = self.inputs[0]->value.size();
    for (std::size_t k = 0; k < n; ++k) g[k] += self.grad[0];
  });
}

/// sum(x * weights) with a constant weight vector; handy for projecting a
/// tensor onto a random direction in gradient checks.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::vector<T> weights) {
  if (weights.size() != x.size()) throw ShapeError("weighted_sum: weight count mismatch");
  T acc{0};
  for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * weights[k];
  auto w = std::make_shared<std::vector<T>>(std::move(weights));
  return make_result<T>({1}, {acc}, {x}, [w](Node<T>& self) {
    T* g = input_grad(self, 0);
    for (std::size_t k = 0; k < w->size(); ++k) g[k] += (*w)[k] * self.grad[0];
  });
}

}  // namespace iqprint::nn
