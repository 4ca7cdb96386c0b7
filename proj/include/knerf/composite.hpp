#pragma once

#include <cmath>
#include <vector>

#include "knerf/common.hpp"

namespace knerf {

// Discrete alpha-compositing quadrature of the volume rendering integral:
// alpha_i = 1 - exp(-sigma_i * delta_i), T_i = prod_{j<i} (1 - alpha_j),
// w_i = T_i * alpha_i, color = sum w_i rgb_i (+ remaining transmittance times
// white when compositing on a white background).
template <typename T>
void composite(const T* rgb, const T* sigma, const T* delta, int n, bool white_background,
               T* color_out, T* weights_out, T* trans_remaining_out) {
  T trans = T(1);
  T c0 = 0, c1 = 0, c2 = 0;
  for (int i = 0; i < n; ++i) {
    T alpha = T(1) - std::exp(-sigma[i] * delta[i]);
    T w = trans * alpha;
    if (weights_out) weights_out[i] = w;
    c0 += w * rgb[i * 3 + 0];
    c1 += w * rgb[i * 3 + 1];
    c2 += w * rgb[i * 3 + 2];
    trans *= T(1) - alpha;
  }
  if (white_background) {
    c0 += trans;
    c1 += trans;
    c2 += trans;
  }
  color_out[0] = c0;
  color_out[1] = c1;
  color_out[2] = c2;
  if (trans_remaining_out) *trans_remaining_out = trans;
}

// Gradient of composite() with respect to rgb and sigma. Uses the pure
// transmittance form C = sum_i (T_i - T_{i+1}) rgb_i + T_n * bg, for which
//   dC/d rgb_i  = w_i
//   dC/d sigma_i = delta_i * (rgb_i T_{i+1} - sum_{j>i} w_j rgb_j - T_n bg)
// evaluated with a right-to-left suffix sum; no divisions, stable for
// alpha -> 1.
template <typename T>
void composite_backward(const T* rgb, const T* sigma, const T* delta, int n,
                        bool white_background, const T* d_color, T* d_rgb, T* d_sigma) {
  std::vector<T> trans(static_cast<size_t>(n) + 1);
  trans[0] = T(1);
  for (int i = 0; i < n; ++i)
    trans[static_cast<size_t>(i) + 1] =
        trans[static_cast<size_t>(i)] * std::exp(-sigma[i] * delta[i]);
  T tn = trans[static_cast<size_t>(n)];
  T bg = white_background ? T(1) : T(0);

  T s0 = 0, s1 = 0, s2 = 0;  // suffix sums of w_j * rgb_j
  for (int i = n - 1; i >= 0; --i) {
    T w = trans[static_cast<size_t>(i)] - trans[static_cast<size_t>(i) + 1];
    d_rgb[i * 3 + 0] = w * d_color[0];
    d_rgb[i * 3 + 1] = w * d_color[1];
    d_rgb[i * 3 + 2] = w * d_color[2];
    T tnext = trans[static_cast<size_t>(i) + 1];
    T g = d_color[0] * (rgb[i * 3 + 0] * tnext - s0 - tn * bg) +
          d_color[1] * (rgb[i * 3 + 1] * tnext - s1 - tn * bg) +
          d_color[2] * (rgb[i * 3 + 2] * tnext - s2 - tn * bg);
    d_sigma[i] = delta[i] * g;
    s0 += w * rgb[i * 3 + 0];
    s1 += w * rgb[i * 3 + 1];
    s2 += w * rgb[i * 3 + 2];
  }
}

}  // namespace knerf
