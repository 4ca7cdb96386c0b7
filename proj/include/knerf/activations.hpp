#pragma once

#include <cmath>
#include <cstdint>

#include "knerf/common.hpp"

namespace knerf {

enum class Activation { relu, sigmoid };

template <typename T>
inline T sigmoid_scalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void act_forward(Activation kind, const T* x, T* y, int64_t n) {
  if (kind == Activation::relu) {
#pragma omp simd
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  } else {
    for (int64_t i = 0; i < n; ++i) y[i] = sigmoid_scalar(x[i]);
  }
}

// dx = dy * act'(x). relu'(0) is taken as 0.
template <typename T>
void act_backward(Activation kind, const T* x, const T* dy, T* dx, int64_t n) {
  if (kind == Activation::relu) {
#pragma omp simd
    for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
  } else {
    for (int64_t i = 0; i < n; ++i) {
      T s = sigmoid_scalar(x[i]);
      dx[i] = dy[i] * s * (T(1) - s);
    }
  }
}

// Variant reusing a cached forward output: relu output for relu, sigmoid
// output for sigmoid. Avoids recomputing exp in the hot path.
template <typename T>
void act_backward_from_output(Activation kind, const T* y, const T* dy, T* dx, int64_t n) {
  if (kind == Activation::relu) {
#pragma omp simd
    for (int64_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
  } else {
#pragma omp simd
    for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
  }
}

}  // namespace knerf
