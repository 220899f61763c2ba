#pragma once

// Complex batch normalization. Each feature's (real, imag) pair is treated as
// a 2-vector: centered, whitened by (V + eps I)^(-1/2), then scaled by a
// symmetric 2x2 gamma and shifted by a complex beta.
//
// Input layout [B, 2, C, ...]: statistics per channel c over the batch and all
// trailing positions. A rank-3 input [B, 2, F] normalizes each of the F
// features over the batch.

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iqprint/nn/complex_ops.hpp"
#include "iqprint/nn/tensor.hpp"

namespace iqprint::nn {

/// Symmetric 2x2 matrix [[a, b], [b, c]].
struct Sym2 {
  double a = 0, b = 0, c = 0;
};

/// Principal square root of an SPD 2x2 matrix:
/// s = sqrt(det), t = sqrt(tr + 2 s), sqrt(M) = (M + s I) / t.
inline Sym2 sqrt_spd(const Sym2& m) {
  const double det = m.a * m.c - m.b * m.b;
  if (!(det > 0.0) || !(m.a > 0.0)) throw ParameterError("matrix is not positive definite");
  const double s = std::sqrt(det);
  const double t = std::sqrt(m.a + m.c + 2.0 * s);
  return {(m.a + s) / t, m.b / t, (m.c + s) / t};
}

inline Sym2 inverse(const Sym2& m) {
  const double det = m.a * m.c - m.b * m.b;
  return {m.c / det, -m.b / det, m.a / det};
}

inline Sym2 inverse_sqrt_spd(const Sym2& m) { return inverse(sqrt_spd(m)); }

namespace detail {

struct BnView {
  std::size_t batch, channels, inner;  // inner = trailing positions per channel
  std::size_t count() const { return batch * inner; }
  std::size_t index(std::size_t b, std::size_t p, std::size_t c, std::size_t k) const {
    return ((2 * b + p) * channels + c) * inner + k;
  }
};

template <typename T>
BnView bn_view(const Tensor<T>& x) {
  require_complex(x, 3, "complex_batch_norm");
  std::size_t inner = 1;
  for (std::size_t a = 3; a < x.rank(); ++a) inner *= x.dim(a);
  return {x.dim(0), x.dim(2), inner};
}

struct Moments {
  double mr = 0, mi = 0;
  Sym2 cov;
};

template <typename T>
Moments channel_moments(const T* x, const BnView& v, std::size_t c) {
  Moments m;
  const double n = static_cast<double>(v.count());
  for (std::size_t b = 0; b < v.batch; ++b)
    for (std::size_t k = 0; k < v.inner; ++k) {
      m.mr += x[v.index(b, 0, c, k)];
      m.mi += x[v.index(b, 1, c, k)];
    }
  m.mr /= n;
  m.mi /= n;
  for (std::size_t b = 0; b < v.batch; ++b)
    for (std::size_t k = 0; k < v.inner; ++k) {
      const double dr = x[v.index(b, 0, c, k)] - m.mr, di = x[v.index(b, 1, c, k)] - m.mi;
      m.cov.a += dr * dr;
      m.cov.b += dr * di;
      m.cov.c += di * di;
    }
  m.cov.a /= n;
  m.cov.b /= n;
  m.cov.c /= n;
  return m;
}

// Solves S X + X S = G for X (2x2, S symmetric positive definite).
inline Eigen::Matrix2d solve_sylvester(const Sym2& s, const Eigen::Matrix2d& g) {
  Eigen::Matrix4d a;
  const double p = s.a, q = s.b, r = s.c;
  // unknowns ordered (x00, x01, x10, x11)
  a << 2 * p, q, q, 0,  //
      q, p + r, 0, q,   //
      q, 0, p + r, q,   //
      0, q, q, 2 * r;
  const Eigen::Vector4d rhs(g(0, 0), g(0, 1), g(1, 0), g(1, 1));
  const Eigen::Vector4d sol = a.partialPivLu().solve(rhs);
  Eigen::Matrix2d out;
  out << sol(0), sol(1), sol(2), sol(3);
  return out;
}

}  // namespace detail

/// Whitened values (V + eps I)^(-1/2) (x - mean) from batch statistics, with
/// no graph and no affine step. Exposed for checking the whitening contract.
template <typename T>
Tensor<T> complex_whiten(const Tensor<T>& x, double eps) {
  const auto v = detail::bn_view(x);
  const T* xv = x.values().data();
  std::vector<T> out(x.size());
  for (std::size_t c = 0; c < v.channels; ++c) {
    const auto m = detail::channel_moments(xv, v, c);
    const Sym2 w = inverse_sqrt_spd({m.cov.a + eps, m.cov.b, m.cov.c + eps});
    for (std::size_t b = 0; b < v.batch; ++b)
      for (std::size_t k = 0; k < v.inner; ++k) {
        const auto ir = v.index(b, 0, c, k), ii = v.index(b, 1, c, k);
        const double dr = xv[ir] - m.mr, di = xv[ii] - m.mi;
        out[ir] = static_cast<T>(w.a * dr + w.b * di);
        out[ii] = static_cast<T>(w.b * dr + w.c * di);
      }
  }
  return Tensor<T>(x.shape(), std::move(out));
}

/// Functional form. gamma [3, C] holds (rr, ri, ii); beta [2, C];
/// running_mean [2, C] and running_cov [3, C] are plain buffers updated in
/// training mode.
template <typename T>
Tensor<T> complex_batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                             Tensor<T>& running_cov, bool training, double eps = 1e-4, double momentum = 0.1) {
  const auto v = detail::bn_view(x);
  const std::size_t nc = v.channels;
  if (gamma.shape() != Shape{3, nc} || beta.shape() != Shape{2, nc} || running_mean.shape() != Shape{2, nc} ||
      running_cov.shape() != Shape{3, nc})
    throw ShapeError("complex_batch_norm: parameters do not match " + std::to_string(nc) + " channels");
  if (!(eps > 0.0)) throw ParameterError("complex_batch_norm: eps must be > 0");
  if (training && v.batch < 2) throw ShapeError("insufficient batch for covariance");

  struct ChannelState {
    double mr, mi;
    Sym2 w;     // whitening matrix
    Sym2 sqrt;  // its inverse, used in backward
  };
  auto states = std::make_shared<std::vector<ChannelState>>(nc);
  const T* xv = x.values().data();
  const T* gv = gamma.values().data();
  const T* bv = beta.values().data();
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  std::vector<T> out(x.size());

  for (std::size_t c = 0; c < nc; ++c) {
    double mr, mi;
    Sym2 cov;
    if (training) {
      const auto m = detail::channel_moments(xv, v, c);
      mr = m.mr;
      mi = m.mi;
      cov = m.cov;
      auto rm = running_mean.mutable_values();
      auto rc = running_cov.mutable_values();
      rm[c] = static_cast<T>((1 - momentum) * rm[c] + momentum * mr);
      rm[nc + c] = static_cast<T>((1 - momentum) * rm[nc + c] + momentum * mi);
      rc[c] = static_cast<T>((1 - momentum) * rc[c] + momentum * cov.a);
      rc[nc + c] = static_cast<T>((1 - momentum) * rc[nc + c] + momentum * cov.b);
      rc[2 * nc + c] = static_cast<T>((1 - momentum) * rc[2 * nc + c] + momentum * cov.c);
    } else {
      mr = running_mean[c];
      mi = running_mean[nc + c];
      cov = {running_cov[c], running_cov[nc + c], running_cov[2 * nc + c]};
    }
    const Sym2 root = sqrt_spd({cov.a + eps, cov.b, cov.c + eps});
    const Sym2 w = inverse(root);
    (*states)[c] = {mr, mi, w, root};
    const double grr = gv[c], gri = gv[nc + c], gii = gv[2 * nc + c];
    for (std::size_t b = 0; b < v.batch; ++b)
      for (std::size_t k = 0; k < v.inner; ++k) {
        const auto ir = v.index(b, 0, c, k), ii = v.index(b, 1, c, k);
        const double dr = xv[ir] - mr, di = xv[ii] - mi;
        const double hr = w.a * dr + w.b * di, hi = w.b * dr + w.c * di;
        (*xhat)[ir] = hr;
        (*xhat)[ii] = hi;
        out[ir] = static_cast<T>(grr * hr + gri * hi + bv[c]);
        out[ii] = static_cast<T>(gri * hr + gii * hi + bv[nc + c]);
      }
  }

  return make_result<T>(x.shape(), std::move(out), {x, gamma, beta}, [v, nc, training, states, xhat](Node<T>& self) {
    const T* g = self.grad.data();
    const T* gv = input_value(self, 1);
    T* gx = input_grad(self, 0);
    T* dgamma = input_grad(self, 1);
    T* dbeta = input_grad(self, 2);
    const std::size_t n = v.count();
    std::vector<double> hbuf(2 * n), dd(2 * n);
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& st = (*states)[c];
      const double grr = gv[c], gri = gv[nc + c], gii = gv[2 * nc + c];
      double g00 = 0, g01 = 0, g10 = 0, g11 = 0, sbr = 0, sbi = 0;
      Eigen::Matrix2d hd = Eigen::Matrix2d::Zero();  // sum_n h_n d_n^T
      std::size_t j = 0;
      for (std::size_t b = 0; b < v.batch; ++b)
        for (std::size_t k = 0; k < v.inner; ++k, ++j) {
          const auto ir = v.index(b, 0, c, k), ii = v.index(b, 1, c, k);
          const double gr = g[ir], gi = g[ii];
          const double xr = (*xhat)[ir], xi = (*xhat)[ii];
          g00 += gr * xr;
          g01 += gr * xi;
          g10 += gi * xr;
          g11 += gi * xi;
          sbr += gr;
          sbi += gi;
          const double hr = grr * gr + gri * gi, hi = gri * gr + gii * gi;
          hbuf[2 * j] = hr;
          hbuf[2 * j + 1] = hi;
          if (training) {
            // d = sqrt(V + eps) xhat
            const double dr = st.sqrt.a * xr + st.sqrt.b * xi, di = st.sqrt.b * xr + st.sqrt.c * xi;
            hd(0, 0) += hr * dr;
            hd(0, 1) += hr * di;
            hd(1, 0) += hi * dr;
            hd(1, 1) += hi * di;
          }
        }
      if (dgamma) {
        dgamma[c] += static_cast<T>(g00);
        dgamma[nc + c] += static_cast<T>(g01 + g10);
        dgamma[2 * nc + c] += static_cast<T>(g11);
      }
      if (dbeta) {
        dbeta[c] += static_cast<T>(sbr);
        dbeta[nc + c] += static_cast<T>(sbi);
      }
      if (!gx) continue;
      const Sym2& w = st.w;
      Eigen::Matrix2d sym = Eigen::Matrix2d::Zero();
      if (training) {
        Eigen::Matrix2d wm;
        wm << w.a, w.b, w.b, w.c;
        const Eigen::Matrix2d x_sol = detail::solve_sylvester(st.sqrt, -wm * hd * wm);
        sym = (x_sol + x_sol.transpose()) / static_cast<double>(n);
      }
      double mdr = 0, mdi = 0;
      j = 0;
      for (std::size_t b = 0; b < v.batch; ++b)
        for (std::size_t k = 0; k < v.inner; ++k, ++j) {
          const double hr = hbuf[2 * j], hi = hbuf[2 * j + 1];
          double ddr = w.a * hr + w.b * hi, ddi = w.b * hr + w.c * hi;
          if (training) {
            const auto ir = v.index(b, 0, c, k), ii = v.index(b, 1, c, k);
            const double xr = (*xhat)[ir], xi = (*xhat)[ii];
            const double dr = st.sqrt.a * xr + st.sqrt.b * xi, di = st.sqrt.b * xr + st.sqrt.c * xi;
            ddr += sym(0, 0) * dr + sym(0, 1) * di;
            ddi += sym(1, 0) * dr + sym(1, 1) * di;
          }
          dd[2 * j] = ddr;
          dd[2 * j + 1] = ddi;
          mdr += ddr;
          mdi += ddi;
        }
      if (training) {
        mdr /= static_cast<double>(n);
        mdi /= static_cast<double>(n);
      } else {
        mdr = mdi = 0;
      }
      j = 0;
      for (std::size_t b = 0; b < v.batch; ++b)
        for (std::size_t k = 0; k < v.inner; ++k, ++j) {
          gx[v.index(b, 0, c, k)] += static_cast<T>(dd[2 * j] - mdr);
          gx[v.index(b, 1, c, k)] += static_cast<T>(dd[2 * j + 1] - mdi);
        }
    }
  });
}

/// Layer object owning parameters and running statistics.
template <typename T>
struct ComplexBatchNorm {
  Tensor<T> gamma, beta, running_mean, running_cov;
  double eps = 1e-4;
  double momentum = 0.1;

  ComplexBatchNorm() = default;
  explicit ComplexBatchNorm(std::size_t channels, double eps_ = 1e-4, double momentum_ = 0.1)
      : eps(eps_), momentum(momentum_) {
    const T g0 = static_cast<T>(1.0 / std::sqrt(2.0));
    std::vector<T> g(3 * channels, T{0});
    std::vector<T> rc(3 * channels, T{0});
    for (std::size_t c = 0; c < channels; ++c) {
      g[c] = g[2 * channels + c] = g0;
      rc[c] = rc[2 * channels + c] = T{1};
    }
    gamma = Tensor<T>::parameter({3, channels}, std::move(g));
    beta = Tensor<T>::parameter({2, channels}, std::vector<T>(2 * channels, T{0}));
    running_mean = Tensor<T>({2, channels}, T{0});
    running_cov = Tensor<T>({3, channels}, std::move(rc));
  }

  Tensor<T> operator()(const Tensor<T>& x, bool training) {
    return complex_batch_norm(x, gamma, beta, running_mean, running_cov, training, eps, momentum);
  }
};

}  // namespace iqprint::nn
