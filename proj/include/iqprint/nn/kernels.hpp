#pragma once

// Row-major GEMM helpers on raw buffers, backed by Eigen.

#include <cstddef>

#include <Eigen/Core>

namespace iqprint::nn::kernels {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;

inline Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

// C[m,n] += alpha * A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, T alpha = T{1}) {
  MapM<T>(c, ix(m), ix(n)).noalias() += alpha * MapC<T>(a, ix(m), ix(k)) * MapC<T>(b, ix(n), ix(k)).transpose();
}

// C[m,n] += alpha * A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, T alpha = T{1}) {
  MapM<T>(c, ix(m), ix(n)).noalias() += alpha * MapC<T>(a, ix(m), ix(k)) * MapC<T>(b, ix(k), ix(n));
}

// C[m,n] += alpha * A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, T alpha = T{1}) {
  MapM<T>(c, ix(m), ix(n)).noalias() += alpha * MapC<T>(a, ix(k), ix(m)).transpose() * MapC<T>(b, ix(k), ix(n));
}

// out[j] += sum_i a[i, j]
template <typename T>
void add_column_sums(const T* a, T* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += a[r * cols + c];
}

/// Forward of the block form [A -B; B A] [x; y] on row-stacked planes:
///   oa = x A^T - y B^T + br,  ob = x B^T + y A^T + bi.
/// x, y: [n, f]; wa, wb: [o, f]; oa, ob: [n, o] (overwritten).
template <typename T>
void complex_gemm_forward(const T* x, const T* y, const T* wa, const T* wb, const T* br, const T* bi, T* oa, T* ob,
                          std::size_t n, std::size_t f, std::size_t o) {
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < o; ++c) {
      oa[r * o + c] = br ? br[c] : T{0};
      ob[r * o + c] = bi ? bi[c] : T{0};
    }
  gemm_nt(x, wa, oa, n, o, f);
  gemm_nt(y, wb, oa, n, o, f, T{-1});
  gemm_nt(x, wb, ob, n, o, f);
  gemm_nt(y, wa, ob, n, o, f);
}

/// Adjoint of complex_gemm_forward. Any output pointer may be null.
template <typename T>
void complex_gemm_backward(const T* x, const T* y, const T* wa, const T* wb, const T* ga, const T* gb, T* dx, T* dy,
                           T* dwa, T* dwb, T* dbr, T* dbi, std::size_t n, std::size_t f, std::size_t o) {
  if (dwa) {
    gemm_tn(ga, x, dwa, o, f, n);
    gemm_tn(gb, y, dwa, o, f, n);
  }
  if (dwb) {
    gemm_tn(ga, y, dwb, o, f, n, T{-1});
    gemm_tn(gb, x, dwb, o, f, n);
  }
  if (dx) {
    gemm_nn(ga, wa, dx, n, f, o);
    gemm_nn(gb, wb, dx, n, f, o);
  }
  if (dy) {
    gemm_nn(ga, wb, dy, n, f, o, T{-1});
    gemm_nn(gb, wa, dy, n, f, o);
  }
  if (dbr) add_column_sums(ga, dbr, n, o);
  if (dbi) add_column_sums(gb, dbi, n, o);
}

}  // namespace iqprint::nn::kernels
