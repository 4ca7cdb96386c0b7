#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "knerf/common.hpp"

namespace knerf {

// Batched affine kernels. Weights are row-major [out_dim x in_dim], inputs
// and outputs are row-major [batch x dim]. All floating point reductions run
// in a fixed order independent of the thread count, so parallel and serial
// schedules produce bitwise-identical output.
//
// The hot layouts keep the innermost loop contiguous over the output lanes
// (widths are multiples of the vector width in practice) by working with a
// transposed weight scratch; encoded input lengths are odd and would
// otherwise land every row misaligned.

namespace detail {

// acc[0..n) += s * v[0..n)
template <typename T>
inline void axpy(T* __restrict acc, const T* __restrict v, T s, int n) {
#pragma omp simd
  for (int k = 0; k < n; ++k) acc[k] += s * v[k];
}

// Number of fixed reduction partials for parameter gradients. Constant so
// the summation tree is identical for every thread count.
inline constexpr int kGradPartials = 16;

template <typename T>
std::vector<T>& scratch_buffer() {
  static thread_local std::vector<T> buf;
  return buf;
}

template <typename T>
void transpose_to(const T* w, int rows, int cols, T* wt) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) wt[static_cast<int64_t>(c) * rows + r] = w[static_cast<int64_t>(r) * cols + c];
}

}  // namespace detail

// y = x . W^T + b, i.e. per row y[o] = sum_k W[o][k] x[k] + b[o].
template <typename T>
void affine_forward_batch(const T* x, int64_t batch, int in_dim, int out_dim, const T* w,
                          const T* bias, T* y) {
  if (out_dim < 16) {
    // Narrow heads: plain dot products.
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < batch; ++i) {
      const T* xi = x + i * in_dim;
      T* yi = y + i * out_dim;
      for (int o = 0; o < out_dim; ++o) {
        const T* wo = w + static_cast<int64_t>(o) * in_dim;
        T s = bias ? bias[o] : T(0);
#pragma omp simd reduction(+ : s)
        for (int k = 0; k < in_dim; ++k) s += wo[k] * xi[k];
        yi[o] = s;
      }
    }
    return;
  }

  // Transposed weights make the inner update contiguous over outputs.
  std::vector<T> wt(static_cast<size_t>(in_dim) * out_dim);
  detail::transpose_to(w, out_dim, in_dim, wt.data());

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < batch; ++i) {
    const T* xi = x + i * in_dim;
    T* yi = y + i * out_dim;
    if (bias)
      std::memcpy(yi, bias, sizeof(T) * static_cast<size_t>(out_dim));
    else
      std::memset(yi, 0, sizeof(T) * static_cast<size_t>(out_dim));
    for (int k = 0; k < in_dim; ++k)
      detail::axpy(yi, wt.data() + static_cast<int64_t>(k) * out_dim, xi[k], out_dim);
  }
}

// dx = dy . W, i.e. per row dx[k] = sum_o dy[o] W[o][k]. Overwrites dx.
template <typename T>
void affine_backward_input_batch(const T* dy, int64_t batch, int in_dim, int out_dim, const T* w,
                                 T* dx) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < batch; ++i) {
    const T* di = dy + i * out_dim;
    T* xi = dx + i * in_dim;
    std::memset(xi, 0, sizeof(T) * static_cast<size_t>(in_dim));
    for (int o = 0; o < out_dim; ++o)
      detail::axpy(xi, w + static_cast<int64_t>(o) * in_dim, di[o], in_dim);
  }
}

// dW += dy^T . x and db += column sums of dy. Accumulates (caller zeroes).
// The batch is split into kGradPartials fixed contiguous slices; each slice
// is reduced serially in transposed layout (contiguous over outputs) and the
// slices are combined in index order.
template <typename T>
void affine_backward_param_batch(const T* x, const T* dy, int64_t batch, int in_dim, int out_dim,
                                 T* dw_accum, T* db_accum) {
  const int64_t wsize = static_cast<int64_t>(in_dim) * out_dim;

  if (out_dim < 16) {
    const int P = detail::kGradPartials;
    std::vector<T> pw(static_cast<size_t>(P) * wsize, T(0));
    std::vector<T> pb(static_cast<size_t>(P) * out_dim, T(0));
#pragma omp parallel for schedule(static)
    for (int p = 0; p < P; ++p) {
      int64_t lo = batch * p / P, hi = batch * (p + 1) / P;
      T* w_part = pw.data() + static_cast<int64_t>(p) * wsize;
      T* b_part = pb.data() + static_cast<int64_t>(p) * out_dim;
      for (int64_t i = lo; i < hi; ++i) {
        const T* xi = x + i * in_dim;
        const T* di = dy + i * out_dim;
        for (int o = 0; o < out_dim; ++o) {
          detail::axpy(w_part + static_cast<int64_t>(o) * in_dim, xi, di[o], in_dim);
          b_part[o] += di[o];
        }
      }
    }
    for (int p = 0; p < P; ++p) {
      detail::axpy(dw_accum, pw.data() + static_cast<int64_t>(p) * wsize, T(1),
                   static_cast<int>(wsize));
      detail::axpy(db_accum, pb.data() + static_cast<int64_t>(p) * out_dim, T(1), out_dim);
    }
    return;
  }

  const int P = detail::kGradPartials;
  // Partials hold dW^T (in x out) so the inner axpy runs over outputs.
  std::vector<T> pw(static_cast<size_t>(P) * wsize, T(0));
  std::vector<T> pb(static_cast<size_t>(P) * out_dim, T(0));
#pragma omp parallel for schedule(static)
  for (int p = 0; p < P; ++p) {
    int64_t lo = batch * p / P, hi = batch * (p + 1) / P;
    T* wt_part = pw.data() + static_cast<int64_t>(p) * wsize;
    T* b_part = pb.data() + static_cast<int64_t>(p) * out_dim;
    for (int64_t i = lo; i < hi; ++i) {
      const T* xi = x + i * in_dim;
      const T* di = dy + i * out_dim;
      for (int k = 0; k < in_dim; ++k)
        detail::axpy(wt_part + static_cast<int64_t>(k) * out_dim, di, xi[k], out_dim);
      detail::axpy(b_part, di, T(1), out_dim);
    }
  }
  // Combine partials in fixed order, still transposed.
  std::vector<T>& wt_sum = detail::scratch_buffer<T>();
  wt_sum.assign(static_cast<size_t>(wsize), T(0));
  for (int p = 0; p < P; ++p) {
    detail::axpy(wt_sum.data(), pw.data() + static_cast<int64_t>(p) * wsize, T(1),
                 static_cast<int>(wsize));
    detail::axpy(db_accum, pb.data() + static_cast<int64_t>(p) * out_dim, T(1), out_dim);
  }
  for (int k = 0; k < in_dim; ++k)
    for (int o = 0; o < out_dim; ++o)
      dw_accum[static_cast<int64_t>(o) * in_dim + k] += wt_sum[static_cast<int64_t>(k) * out_dim + o];
}

// Single-vector forms used by the contracts and tests.

template <typename T>
std::vector<T> affine_forward(const std::vector<T>& x, const std::vector<T>& w, int out_dim,
                              int in_dim, const std::vector<T>& b) {
  KNERF_REQUIRE(static_cast<int>(x.size()) == in_dim, "affine_forward: x length != W columns");
  KNERF_REQUIRE(static_cast<int64_t>(w.size()) == static_cast<int64_t>(out_dim) * in_dim,
                "affine_forward: W size mismatch");
  KNERF_REQUIRE(static_cast<int>(b.size()) == out_dim, "affine_forward: b length != W rows");
  std::vector<T> y(static_cast<size_t>(out_dim));
  for (int o = 0; o < out_dim; ++o) {
    T s = b[static_cast<size_t>(o)];
    const T* wo = w.data() + static_cast<int64_t>(o) * in_dim;
    for (int k = 0; k < in_dim; ++k) s += wo[k] * x[static_cast<size_t>(k)];
    y[static_cast<size_t>(o)] = s;
  }
  return y;
}

template <typename T>
struct AffineGrads {
  std::vector<T> dx;
  std::vector<T> dw;
  std::vector<T> db;
};

// dx = W^T dy, dW = dy outer x, db = dy.
template <typename T>
AffineGrads<T> affine_backward(const std::vector<T>& x, const std::vector<T>& w, int out_dim,
                               int in_dim, const std::vector<T>& dy) {
  KNERF_REQUIRE(static_cast<int>(x.size()) == in_dim, "affine_backward: x length != W columns");
  KNERF_REQUIRE(static_cast<int64_t>(w.size()) == static_cast<int64_t>(out_dim) * in_dim,
                "affine_backward: W size mismatch");
  KNERF_REQUIRE(static_cast<int>(dy.size()) == out_dim, "affine_backward: dy length != W rows");
  AffineGrads<T> g;
  g.dx.assign(static_cast<size_t>(in_dim), T(0));
  g.dw.assign(w.size(), T(0));
  g.db = dy;
  for (int o = 0; o < out_dim; ++o) {
    const T* wo = w.data() + static_cast<int64_t>(o) * in_dim;
    T* dwo = g.dw.data() + static_cast<int64_t>(o) * in_dim;
    for (int k = 0; k < in_dim; ++k) {
      g.dx[static_cast<size_t>(k)] += wo[k] * dy[static_cast<size_t>(o)];
      dwo[k] = dy[static_cast<size_t>(o)] * x[static_cast<size_t>(k)];
    }
  }
  return g;
}

}  // namespace knerf
