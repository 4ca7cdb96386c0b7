#pragma once

#include <cmath>
#include <vector>

#include "knerf/common.hpp"

namespace knerf {

struct EncodingConfig {
  int levels_position = 10;
  int levels_direction = 4;
  bool include_input = true;
};

enum class EncodeDomain { position, direction };

inline int encoded_length(int d, int levels, bool include_input) {
  KNERF_REQUIRE(levels >= 1, "encoding levels must be >= 1");
  return d * 2 * levels + (include_input ? d : 0);
}

// Fourier features [p?, sin(2^k pi p_i), cos(2^k pi p_i)] for k = 0..levels-1.
// Frequencies are generated with the sine/cosine doubling recurrence from the
// k = 0 values, which is far cheaper than 2*levels libm calls per component
// and is used identically by the backward pass.
template <typename T>
void positional_encode_into(const T* p, int d, int levels, bool include_input, T* out) {
  const T pi = static_cast<T>(3.14159265358979323846);
  int base = 0;
  if (include_input) {
    for (int i = 0; i < d; ++i) out[i] = p[i];
    base = d;
  }
  for (int i = 0; i < d; ++i) {
    T s = std::sin(pi * p[i]);
    T c = std::cos(pi * p[i]);
    for (int k = 0; k < levels; ++k) {
      out[base + 2 * d * k + i] = s;
      out[base + 2 * d * k + d + i] = c;
      T s2 = T(2) * s * c;
      c = c * c - s * s;
      s = s2;
    }
  }
}

// Accumulates d_p += J^T d_out for the encoding above.
template <typename T>
void positional_encode_backward(const T* p, int d, int levels, bool include_input, const T* d_out,
                                T* d_p) {
  const T pi = static_cast<T>(3.14159265358979323846);
  int base = include_input ? d : 0;
  for (int i = 0; i < d; ++i) {
    T acc = include_input ? d_out[i] : T(0);
    T s = std::sin(pi * p[i]);
    T c = std::cos(pi * p[i]);
    T freq = pi;
    for (int k = 0; k < levels; ++k) {
      acc += d_out[base + 2 * d * k + i] * freq * c;
      acc -= d_out[base + 2 * d * k + d + i] * freq * s;
      T s2 = T(2) * s * c;
      c = c * c - s * s;
      s = s2;
      freq *= T(2);
    }
    d_p[i] += acc;
  }
}

template <typename T>
std::vector<T> positional_encode(const std::vector<T>& p, const EncodingConfig& cfg,
                                 EncodeDomain domain) {
  int levels = domain == EncodeDomain::position ? cfg.levels_position : cfg.levels_direction;
  int d = static_cast<int>(p.size());
  std::vector<T> out(static_cast<size_t>(encoded_length(d, levels, cfg.include_input)));
  positional_encode_into(p.data(), d, levels, cfg.include_input, out.data());
  return out;
}

}  // namespace knerf
