#pragma once

// Batched dense kernels for the coordinate network. Matrices are
// row-major with a small fixed row count (layer widths) and a long
// column count (samples in flight).
//
// Determinism contract: for every output element the accumulation
// order is a pure function of the operand shapes — never of the thread
// count or the chunk split. Threads always slice output rows, so each
// element is produced by exactly one thread with the same instruction
// sequence. This is what makes `--threads N` bit-identical to
// `--threads 1`.

#include <cstdint>
#include <cstring>
#include <vector>

#include "cqfield/threads.hpp"

namespace cqfield {

template <class Real>
struct Matrix {
  int rows = 0;
  std::int64_t cols = 0;
  std::vector<Real> data;

  Matrix() = default;
  Matrix(int r, std::int64_t c) { resize(r, c); }

  void resize(int r, std::int64_t c) {
    rows = r;
    cols = c;
    data.assign(std::size_t(r) * std::size_t(c), Real(0));
  }

  Real* row(int r) { return data.data() + std::size_t(r) * std::size_t(cols); }
  const Real* row(int r) const { return data.data() + std::size_t(r) * std::size_t(cols); }
  Real& at(int r, std::int64_t c) { return data[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }
  Real at(int r, std::int64_t c) const { return data[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }
};

namespace kernels {

// Microkernel tile sizes tuned for this library's layer shapes.
template <class Real>
struct Tile {
  static constexpr int kRows = 6;
  static constexpr int kCols = 16;
};
template <>
struct Tile<float> {
  static constexpr int kRows = 8;
  static constexpr int kCols = 32;
};

// Y rows [m0, m1) of Y[M x N] = W[M x K] * X[K x N] (+ bias), k ascending.
template <class Real>
void gemm_rows(const Real* w, const Real* bias, const Real* x, Real* y, int m0, int m1,
               int k_dim, std::int64_t n_dim) {
  constexpr int MB = Tile<Real>::kRows;
  constexpr int NB = Tile<Real>::kCols;
  for (int mb = m0; mb < m1; mb += MB) {
    const int mlim = (mb + MB <= m1) ? MB : m1 - mb;
    std::int64_t nb = 0;
    if (mlim == MB) {
      for (; nb + NB <= n_dim; nb += NB) {
        Real acc[MB][NB];
        for (int mi = 0; mi < MB; ++mi) {
          const Real b = bias ? bias[mb + mi] : Real(0);
          for (int ni = 0; ni < NB; ++ni) acc[mi][ni] = b;
        }
        for (int k = 0; k < k_dim; ++k) {
          const Real* xr = x + std::size_t(k) * std::size_t(n_dim) + std::size_t(nb);
          for (int mi = 0; mi < MB; ++mi) {
            const Real a = w[std::size_t(mb + mi) * std::size_t(k_dim) + std::size_t(k)];
            for (int ni = 0; ni < NB; ++ni) acc[mi][ni] += a * xr[ni];
          }
        }
        for (int mi = 0; mi < MB; ++mi) {
          Real* yr = y + std::size_t(mb + mi) * std::size_t(n_dim) + std::size_t(nb);
          for (int ni = 0; ni < NB; ++ni) yr[ni] = acc[mi][ni];
        }
      }
    }
    // remainder columns (and short row groups): same k-ascending order
    for (int mi = 0; mi < mlim; ++mi) {
      const int m = mb + mi;
      Real* yr = y + std::size_t(m) * std::size_t(n_dim);
      const Real b = bias ? bias[m] : Real(0);
      for (std::int64_t n = nb; n < n_dim; ++n) yr[n] = b;
      const Real* wr = w + std::size_t(m) * std::size_t(k_dim);
      for (int k = 0; k < k_dim; ++k) {
        const Real a = wr[k];
        const Real* xr = x + std::size_t(k) * std::size_t(n_dim);
        for (std::int64_t n = nb; n < n_dim; ++n) yr[n] += a * xr[n];
      }
    }
  }
}

// dW[m][k] += sum_n dY[m][n] * X[k][n], dB[m] += sum_n dY[m][n].
// Fixed lane structure (kLanes independent partial sums, chunk-major)
// keeps the reduction order shape-determined.
template <class Real>
void grad_rows(const Real* dy, const Real* x, Real* dw, Real* db, int m0, int m1, int k_dim,
               std::int64_t n_dim) {
  constexpr int kLanes = 16;
  constexpr std::int64_t kChunk = 4096;
  for (std::int64_t c0 = 0; c0 < n_dim; c0 += kChunk) {
    const std::int64_t c1 = (c0 + kChunk < n_dim) ? c0 + kChunk : n_dim;
    for (int m = m0; m < m1; ++m) {
      const Real* dyr = dy + std::size_t(m) * std::size_t(n_dim);
      if (db) {
        Real lanes[kLanes] = {};
        std::int64_t n = c0;
        for (; n + kLanes <= c1; n += kLanes)
          for (int j = 0; j < kLanes; ++j) lanes[j] += dyr[n + j];
        Real tail = Real(0);
        for (; n < c1; ++n) tail += dyr[n];
        Real sum = tail;
        for (int j = 0; j < kLanes; ++j) sum += lanes[j];
        db[m] += sum;
      }
      for (int k = 0; k < k_dim; ++k) {
        const Real* xr = x + std::size_t(k) * std::size_t(n_dim);
        Real lanes[kLanes] = {};
        std::int64_t n = c0;
        for (; n + kLanes <= c1; n += kLanes)
          for (int j = 0; j < kLanes; ++j) lanes[j] += dyr[n + j] * xr[n + j];
        Real tail = Real(0);
        for (; n < c1; ++n) tail += dyr[n] * xr[n];
        Real sum = tail;
        for (int j = 0; j < kLanes; ++j) sum += lanes[j];
        dw[std::size_t(m) * std::size_t(k_dim) + std::size_t(k)] += sum;
      }
    }
  }
}

} // namespace kernels

// Y = W * X + bias(broadcast). W is M x K, X is K x N, Y is M x N.
template <class Real>
void gemm_bias(const Real* w, const Real* bias, const Matrix<Real>& x, Matrix<Real>& y, int m_dim,
               ThreadPool* pool) {
  const int k_dim = x.rows;
  const std::int64_t n_dim = x.cols;
  if (y.rows != m_dim || y.cols != n_dim) y.resize(m_dim, n_dim);
  parallel_for(pool, 0, m_dim, [&](std::int64_t r0, std::int64_t r1, int) {
    kernels::gemm_rows<Real>(w, bias, x.data.data(), y.data.data(), int(r0), int(r1), k_dim,
                             n_dim);
  });
}

// dW += dY * X^T, dB += row sums of dY. dY is M x N, X is K x N.
template <class Real>
void accum_weight_grad(const Matrix<Real>& dy, const Matrix<Real>& x, Real* dw, Real* db,
                       ThreadPool* pool) {
  const int m_dim = dy.rows;
  const int k_dim = x.rows;
  const std::int64_t n_dim = dy.cols;
  parallel_for(pool, 0, m_dim, [&](std::int64_t r0, std::int64_t r1, int) {
    kernels::grad_rows<Real>(dy.data.data(), x.data.data(), dw, db, int(r0), int(r1), k_dim,
                             n_dim);
  });
}

// Out-of-place transpose for the dX pass (source matrices are small).
template <class Real>
void transpose(const Real* w, int rows, int cols, std::vector<Real>& wt) {
  wt.resize(std::size_t(rows) * std::size_t(cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      wt[std::size_t(c) * std::size_t(rows) + std::size_t(r)] =
          w[std::size_t(r) * std::size_t(cols) + std::size_t(c)];
}

} // namespace cqfield
