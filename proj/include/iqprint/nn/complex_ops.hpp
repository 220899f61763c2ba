#pragma once

// Complex layers on two-plane tensors. Every complex tensor has the plane
// axis at position 1: [batch, 2, ...]. Plane 0 holds the real (later "A")
// values and plane 1 the imaginary ("B") values.

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "iqprint/nn/kernels.hpp"
#include "iqprint/nn/tensor.hpp"

namespace iqprint::nn {

namespace detail {

template <typename T>
void require_complex(const Tensor<T>& x, std::size_t min_rank, const char* op) {
  if (x.rank() < min_rank || x.dim(1) != 2)
    throw ShapeError(std::string(op) + ": expected [batch, 2, ...] with rank >= " + std::to_string(min_rank) +
                     ", got " + to_string(x.shape()));
}

// x viewed as [batch, 2, rows, last]
struct PlaneView {
  std::size_t batch, rows, last;
  std::size_t plane_size() const { return rows * last; }
};

template <typename T>
PlaneView plane_view(const Tensor<T>& x) {
  const auto& s = x.shape();
  std::size_t rows = 1;
  for (std::size_t a = 2; a + 1 < s.size(); ++a) rows *= s[a];
  return {s[0], rows, s.back()};
}

// Copies plane p of every batch item into a contiguous [batch*rows, last] block.
template <typename T>
void gather_plane(const T* src, T* dst, const PlaneView& v, std::size_t p) {
  const std::size_t ps = v.plane_size();
  for (std::size_t b = 0; b < v.batch; ++b) std::copy_n(src + (2 * b + p) * ps, ps, dst + b * ps);
}

template <typename T>
void scatter_plane(const T* src, T* dst, const PlaneView& v, std::size_t p) {
  const std::size_t ps = v.plane_size();
  for (std::size_t b = 0; b < v.batch; ++b) std::copy_n(src + b * ps, ps, dst + (2 * b + p) * ps);
}

template <typename T>
void scatter_add_plane(const T* src, T* dst, const PlaneView& v, std::size_t p) {
  const std::size_t ps = v.plane_size();
  for (std::size_t b = 0; b < v.batch; ++b)
    for (std::size_t k = 0; k < ps; ++k) dst[(2 * b + p) * ps + k] += src[b * ps + k];
}

}  // namespace detail

/// Complex dense layer on the last axis. x: [B, 2, ..., F]; wa, wb: [O, F]
/// (real and imaginary weight parts); bias: [2, O]. Returns [B, 2, ..., O] with
///   A = wa x - wb y + re(bias),  B = wb x + wa y + im(bias).
template <typename T>
Tensor<T> complex_linear(const Tensor<T>& x, const Tensor<T>& wa, const Tensor<T>& wb, const Tensor<T>& bias) {
  detail::require_complex(x, 3, "complex_linear");
  const auto v = detail::plane_view(x);
  if (wa.rank() != 2 || wa.shape() != wb.shape() || wa.dim(1) != v.last)
    throw ShapeError("complex_linear: weight shape " + to_string(wa.shape()) + " / " + to_string(wb.shape()) +
                     " does not map input features " + std::to_string(v.last));
  const std::size_t o = wa.dim(0);
  if (bias.shape() != Shape{2, o}) throw ShapeError("complex_linear: bias must be [2, " + std::to_string(o) + "]");

  const std::size_t n = v.batch * v.rows;
  auto xs = std::make_shared<std::vector<T>>(n * v.last);
  auto ys = std::make_shared<std::vector<T>>(n * v.last);
  detail::gather_plane(x.values().data(), xs->data(), v, 0);
  detail::gather_plane(x.values().data(), ys->data(), v, 1);
  std::vector<T> oa(n * o), ob(n * o);
  kernels::complex_gemm_forward(xs->data(), ys->data(), wa.values().data(), wb.values().data(), bias.values().data(),
                                bias.values().data() + o, oa.data(), ob.data(), n, v.last, o);
  Shape out_shape = x.shape();
  out_shape.back() = o;
  const detail::PlaneView ov{v.batch, v.rows, o};
  std::vector<T> out(numel(out_shape));
  detail::scatter_plane(oa.data(), out.data(), ov, 0);
  detail::scatter_plane(ob.data(), out.data(), ov, 1);

  return make_result<T>(std::move(out_shape), std::move(out), {x, wa, wb, bias}, [v, ov, n, o, xs, ys](Node<T>& self) {
    std::vector<T> ga(n * o), gb(n * o);
    detail::gather_plane(self.grad.data(), ga.data(), ov, 0);
    detail::gather_plane(self.grad.data(), gb.data(), ov, 1);
    T* gx = input_grad(self, 0);
    std::vector<T> dx, dy;
    if (gx) {
      dx.assign(n * v.last, T{0});
      dy.assign(n * v.last, T{0});
    }
    T* gbias = input_grad(self, 3);
    kernels::complex_gemm_backward(xs->data(), ys->data(), input_value(self, 1), input_value(self, 2), ga.data(),
                                   gb.data(), gx ? dx.data() : nullptr, gx ? dy.data() : nullptr,
                                   input_grad(self, 1), input_grad(self, 2), gbias, gbias ? gbias + o : nullptr, n,
                                   v.last, o);
    if (gx) {
      detail::scatter_add_plane(dx.data(), gx, v, 0);
      detail::scatter_add_plane(dy.data(), gx, v, 1);
    }
  });
}

inline std::size_t conv_output_length(std::size_t len, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (kernel < 1 || stride < 1) throw ShapeError("conv: kernel and stride must be >= 1");
  if (len + 2 * padding < kernel)
    throw ShapeError("conv: input length " + std::to_string(len) + " (+2*" + std::to_string(padding) +
                     " padding) shorter than kernel " + std::to_string(kernel));
  return (len + 2 * padding - kernel) / stride + 1;
}

namespace detail {

// col[(b*lout + t), (c*k + j)] = x[b, c, t*stride + j - pad] for one plane.
template <typename T>
void im2col(const T* x, T* col, std::size_t batch, std::size_t channels, std::size_t len, std::size_t plane_stride,
            std::size_t plane_offset, std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t lout) {
  const std::size_t width = channels * kernel;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < lout; ++t) {
      T* row = col + (b * lout + t) * width;
      for (std::size_t c = 0; c < channels; ++c) {
        const T* src = x + b * plane_stride + plane_offset + c * len;
        for (std::size_t j = 0; j < kernel; ++j) {
          const auto pos = static_cast<long long>(t * stride + j) - static_cast<long long>(pad);
          row[c * kernel + j] = (pos >= 0 && pos < static_cast<long long>(len)) ? src[pos] : T{0};
        }
      }
    }
}

template <typename T>
void col2im_add(const T* col, T* x, std::size_t batch, std::size_t channels, std::size_t len, std::size_t plane_stride,
                std::size_t plane_offset, std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t lout) {
  const std::size_t width = channels * kernel;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < lout; ++t) {
      const T* row = col + (b * lout + t) * width;
      for (std::size_t c = 0; c < channels; ++c) {
        T* dst = x + b * plane_stride + plane_offset + c * len;
        for (std::size_t j = 0; j < kernel; ++j) {
          const auto pos = static_cast<long long>(t * stride + j) - static_cast<long long>(pad);
          if (pos >= 0 && pos < static_cast<long long>(len)) dst[pos] += row[c * kernel + j];
        }
      }
    }
}

// [batch*lout, cout] block <-> [batch, (plane), cout, lout] layout.
template <typename T>
void rows_to_channels(const T* rows, T* out, std::size_t batch, std::size_t cout, std::size_t lout,
                      std::size_t plane_stride, std::size_t plane_offset) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < lout; ++t)
      for (std::size_t c = 0; c < cout; ++c)
        out[b * plane_stride + plane_offset + c * lout + t] = rows[(b * lout + t) * cout + c];
}

template <typename T>
void channels_to_rows(const T* in, T* rows, std::size_t batch, std::size_t cout, std::size_t lout,
                      std::size_t plane_stride, std::size_t plane_offset) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < lout; ++t)
      for (std::size_t c = 0; c < cout; ++c)
        rows[(b * lout + t) * cout + c] = in[b * plane_stride + plane_offset + c * lout + t];
}

}  // namespace detail

/// Complex 1-D convolution (cross-correlation). x: [B, 2, Cin, L];
/// wa, wb: [Cout, Cin, K]; bias: [2, Cout]. Returns [B, 2, Cout, Lout].
/// Each output position is complex_linear applied to the flattened receptive
/// field.
template <typename T>
Tensor<T> complex_conv1d(const Tensor<T>& x, const Tensor<T>& wa, const Tensor<T>& wb, const Tensor<T>& bias,
                         std::size_t stride, std::size_t padding) {
  if (x.rank() != 4 || x.dim(1) != 2)
    throw ShapeError("complex_conv1d: expected [batch, 2, channels, length], got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), cin = x.dim(2), len = x.dim(3);
  if (wa.rank() != 3 || wa.shape() != wb.shape() || wa.dim(1) != cin)
    throw ShapeError("complex_conv1d: kernel shape " + to_string(wa.shape()) + " incompatible with " +
                     std::to_string(cin) + " input channels");
  const std::size_t cout = wa.dim(0), kernel = wa.dim(2);
  if (bias.shape() != Shape{2, cout}) throw ShapeError("complex_conv1d: bias must be [2, Cout]");
  const std::size_t lout = conv_output_length(len, kernel, stride, padding);
  const std::size_t width = cin * kernel, rows = batch * lout;
  const std::size_t in_plane = cin * len, out_plane = cout * lout;

  auto colx = std::make_shared<std::vector<T>>(rows * width);
  auto coly = std::make_shared<std::vector<T>>(rows * width);
  detail::im2col(x.values().data(), colx->data(), batch, cin, len, 2 * in_plane, 0, kernel, stride, padding, lout);
  detail::im2col(x.values().data(), coly->data(), batch, cin, len, 2 * in_plane, in_plane, kernel, stride, padding,
                 lout);
  std::vector<T> oa(rows * cout), ob(rows * cout);
  kernels::complex_gemm_forward(colx->data(), coly->data(), wa.values().data(), wb.values().data(),
                                bias.values().data(), bias.values().data() + cout, oa.data(), ob.data(), rows, width,
                                cout);
  std::vector<T> out(batch * 2 * out_plane);
  detail::rows_to_channels(oa.data(), out.data(), batch, cout, lout, 2 * out_plane, 0);
  detail::rows_to_channels(ob.data(), out.data(), batch, cout, lout, 2 * out_plane, out_plane);

  return make_result<T>(
      {batch, 2, cout, lout}, std::move(out), {x, wa, wb, bias},
      [=](Node<T>& self) {
        std::vector<T> ga(rows * cout), gb(rows * cout);
        detail::channels_to_rows(self.grad.data(), ga.data(), batch, cout, lout, 2 * out_plane, 0);
        detail::channels_to_rows(self.grad.data(), gb.data(), batch, cout, lout, 2 * out_plane, out_plane);
        T* gx = input_grad(self, 0);
        std::vector<T> dcx, dcy;
        if (gx) {
          dcx.assign(rows * width, T{0});
          dcy.assign(rows * width, T{0});
        }
        T* gbias = input_grad(self, 3);
        kernels::complex_gemm_backward(colx->data(), coly->data(), input_value(self, 1), input_value(self, 2),
                                       ga.data(), gb.data(), gx ? dcx.data() : nullptr, gx ? dcy.data() : nullptr,
                                       input_grad(self, 1), input_grad(self, 2), gbias, gbias ? gbias + cout : nullptr,
                                       rows, width, cout);
        if (gx) {
          detail::col2im_add(dcx.data(), gx, batch, cin, len, 2 * in_plane, 0, kernel, stride, padding, lout);
          detail::col2im_add(dcy.data(), gx, batch, cin, len, 2 * in_plane, in_plane, kernel, stride, padding, lout);
        }
      });
}

/// CReLU: ReLU on each plane independently.
template <typename T>
Tensor<T> crelu(const Tensor<T>& z) {
  detail::require_complex(z, 2, "crelu");
  std::vector<T> out(z.values().begin(), z.values().end());
  for (auto& v : out) v = v > T{0} ? v : T{0};
  return make_result<T>(z.shape(), std::move(out), {z}, [](Node<T>& self) {
    T* g = input_grad(self, 0);
    const T* x = input_value(self, 0);
    for (std::size_t n = 0; n < self.grad.size(); ++n)
      if (x[n] > T{0}) g[n] += self.grad[n];
  });
}

/// zReLU: passes z where both planes are >= 0 (phase in [0, pi/2]), else 0.
template <typename T>
Tensor<T> zrelu(const Tensor<T>& z) {
  detail::require_complex(z, 2, "zrelu");
  const std::size_t batch = z.dim(0), ps = z.size() / (2 * batch);
  std::vector<T> out(z.size(), T{0});
  const T* x = z.values().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < ps; ++k) {
      const std::size_t re = 2 * b * ps + k, im = re + ps;
      if (x[re] >= T{0} && x[im] >= T{0}) {
        out[re] = x[re];
        out[im] = x[im];
      }
    }
  return make_result<T>(z.shape(), std::move(out), {z}, [batch, ps](Node<T>& self) {
    T* g = input_grad(self, 0);
    const T* x = input_value(self, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < ps; ++k) {
        const std::size_t re = 2 * b * ps + k, im = re + ps;
        if (x[re] > T{0} && x[im] > T{0}) {
          g[re] += self.grad[re];
          g[im] += self.grad[im];
        }
      }
  });
}

enum class PoolKind { max, avg };

/// Sliding-window pooling over the last axis, each plane and channel
/// independently. Works on any tensor whose last axis is time.
template <typename T>
Tensor<T> pool1d(const Tensor<T>& x, PoolKind kind, std::size_t window, std::size_t stride) {
  if (x.rank() < 2) throw ShapeError("pool1d: rank must be >= 2");
  const std::size_t len = x.shape().back();
  if (window < 1 || stride < 1) throw ParameterError("pool1d: window and stride must be >= 1");
  if (window > len)
    throw ParameterError("pool1d: window " + std::to_string(window) + " exceeds length " + std::to_string(len));
  const std::size_t lout = (len - window) / stride + 1;
  const std::size_t lines = x.size() / len;
  Shape out_shape = x.shape();
  out_shape.back() = lout;
  std::vector<T> out(lines * lout);
  auto argmax = std::make_shared<std::vector<std::size_t>>(kind == PoolKind::max ? lines * lout : 0);
  const T* src = x.values().data();
  for (std::size_t l = 0; l < lines; ++l)
    for (std::size_t t = 0; t < lout; ++t) {
      const T* w = src + l * len + t * stride;
      if (kind == PoolKind::max) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < window; ++j)
          if (w[j] > w[best]) best = j;
        out[l * lout + t] = w[best];
        (*argmax)[l * lout + t] = l * len + t * stride + best;
      } else {
        T acc{0};
        for (std::size_t j = 0; j < window; ++j) acc += w[j];
        out[l * lout + t] = acc / static_cast<T>(window);
      }
    }
  return make_result<T>(std::move(out_shape), std::move(out), {x},
                        [=](Node<T>& self) {
                          T* g = input_grad(self, 0);
                          for (std::size_t l = 0; l < lines; ++l)
                            for (std::size_t t = 0; t < lout; ++t) {
                              const T go = self.grad[l * lout + t];
                              if (kind == PoolKind::max) {
                                g[(*argmax)[l * lout + t]] += go;
                              } else {
                                const T share = go / static_cast<T>(window);
                                for (std::size_t j = 0; j < window; ++j) g[l * len + t * stride + j] += share;
                              }
                            }
                        });
}

}  // namespace iqprint::nn
