#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "knerf/activations.hpp"
#include "knerf/encoding.hpp"
#include "knerf/linalg.hpp"
#include "knerf/radiance_field.hpp"
#include "knerf/tensor.hpp"

namespace knerf {

struct ProjectionConfig {
  int hidden = 128;
  EncodingConfig enc;
  double scene_bound = 3.0;

  int enc_len() const { return encoded_length(3, enc.levels_position, enc.include_input); }
};

// Residual MLP mapping a deformed-space point to the canonical space:
//
//   e  = encode(x / bound)
//   a0 = relu(W0 e)
//   a1 = relu(W1 a0) + a0        (skip-add)
//   a2 = relu(W2 a1)
//   x0 = x + (W3 a2 + b3)        (skip-add; identity when W3 = b3 = 0)
//
// Four affine layers, two residual connections; the final layer starts at
// exactly zero so the module begins as the identity map.
template <typename T>
struct ProjectionField {
  ProjectionConfig cfg;
  ParamSet<T> params;
  int w0 = -1, b0 = -1, w1 = -1, b1 = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1;

  void build_params(const std::string& prefix) {
    int h = cfg.hidden, e = cfg.enc_len();
    w0 = params.add(prefix + ".l0.w", {h, e});
    b0 = params.add(prefix + ".l0.b", {h});
    w1 = params.add(prefix + ".l1.w", {h, h});
    b1 = params.add(prefix + ".l1.b", {h});
    w2 = params.add(prefix + ".l2.w", {h, h});
    b2 = params.add(prefix + ".l2.b", {h});
    w3 = params.add(prefix + ".out.w", {3, h});
    b3 = params.add(prefix + ".out.b", {3});
  }
};

// Hidden layers randomly initialized, final layer exactly zero, so that
// project(x) == x bitwise until training moves the output layer.
template <typename T>
ProjectionField<T> init_projection_identity(const ProjectionConfig& cfg, uint64_t seed,
                                            const std::string& prefix = "proj") {
  ProjectionField<T> p;
  p.cfg = cfg;
  p.build_params(prefix);
  Pcg32 rng(seed);
  p.params.at(p.w0).init_glorot(rng);
  p.params.at(p.w1).init_glorot(rng);
  p.params.at(p.w2).init_glorot(rng);
  // out.w / out.b stay zero.
  return p;
}

template <typename T>
struct ProjectionWorkspace {
  int64_t cap = 0;
  std::vector<T> enc;       // M x E
  std::vector<T> a0;        // M x H
  std::vector<T> r1;        // M x H, relu(W1 a0) before the skip-add
  std::vector<T> a1;        // M x H
  std::vector<T> a2;        // M x H
  std::vector<T> out;       // M x 3
  std::vector<T> d_h1, d_h2, d_enc;

  void ensure(const ProjectionConfig& cfg, int64_t m) {
    if (m <= cap && !enc.empty()) return;
    cap = m;
    enc.resize(m * cfg.enc_len());
    a0.resize(m * cfg.hidden);
    r1.resize(m * cfg.hidden);
    a1.resize(m * cfg.hidden);
    a2.resize(m * cfg.hidden);
    out.resize(m * 3);
    d_h1.resize(m * cfg.hidden);
    d_h2.resize(m * cfg.hidden);
    d_enc.resize(m * cfg.enc_len());
  }
};

template <typename T>
void projection_forward_batch(const ProjectionField<T>& p, const T* pos, int64_t m,
                              ProjectionWorkspace<T>& ws) {
  const ProjectionConfig& cfg = p.cfg;
  ws.ensure(cfg, m);
  const int e = cfg.enc_len(), h = cfg.hidden;

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    T scaled[3];
    detail::scale_point(pos + i * 3, cfg.scene_bound, scaled);
    positional_encode_into(scaled, 3, cfg.enc.levels_position, cfg.enc.include_input,
                           ws.enc.data() + i * e);
  }

  affine_forward_batch(ws.enc.data(), m, e, h, p.params.at(p.w0).data.data(),
                       p.params.at(p.b0).data.data(), ws.a0.data());
  act_forward(Activation::relu, ws.a0.data(), ws.a0.data(), m * h);

  affine_forward_batch(ws.a0.data(), m, h, h, p.params.at(p.w1).data.data(),
                       p.params.at(p.b1).data.data(), ws.r1.data());
  act_forward(Activation::relu, ws.r1.data(), ws.r1.data(), m * h);
#pragma omp simd
  for (int64_t k = 0; k < m * h; ++k) ws.a1[static_cast<size_t>(k)] = ws.r1[static_cast<size_t>(k)] + ws.a0[static_cast<size_t>(k)];

  affine_forward_batch(ws.a1.data(), m, h, h, p.params.at(p.w2).data.data(),
                       p.params.at(p.b2).data.data(), ws.a2.data());
  act_forward(Activation::relu, ws.a2.data(), ws.a2.data(), m * h);

  affine_forward_batch(ws.a2.data(), m, h, 3, p.params.at(p.w3).data.data(),
                       p.params.at(p.b3).data.data(), ws.out.data());
#pragma omp simd
  for (int64_t k = 0; k < m * 3; ++k) ws.out[static_cast<size_t>(k)] += pos[k];
}

// d_out -> parameter grads (optional) and d_pos (optional, ACCUMULATED so the
// caller can chain it with other paths touching the same positions).
template <typename T>
void projection_backward_batch(const ProjectionField<T>& p, const T* pos, int64_t m,
                               ProjectionWorkspace<T>& ws, const T* d_out,
                               GradientStore<T>* gstore, T* d_pos) {
  const ProjectionConfig& cfg = p.cfg;
  const int e = cfg.enc_len(), h = cfg.hidden;

  if (gstore)
    affine_backward_param_batch(ws.a2.data(), d_out, m, h, 3, gstore->of(p.w3).data(),
                                gstore->of(p.b3).data());
  T* d_a2 = ws.d_h1.data();
  affine_backward_input_batch(d_out, m, h, 3, p.params.at(p.w3).data.data(), d_a2);
  act_backward_from_output(Activation::relu, ws.a2.data(), d_a2, d_a2, m * h);

  if (gstore)
    affine_backward_param_batch(ws.a1.data(), d_a2, m, h, h, gstore->of(p.w2).data(),
                                gstore->of(p.b2).data());
  T* d_a1 = ws.d_h2.data();
  affine_backward_input_batch(d_a2, m, h, h, p.params.at(p.w2).data.data(), d_a1);

  // a1 = r1 + a0: d_r1 = d_a1 (masked), d_a0 = d_a1 + W1^T d_r1.
  T* d_r1 = ws.d_h1.data();  // d_a2 is dead
  act_backward_from_output(Activation::relu, ws.r1.data(), d_a1, d_r1, m * h);
  if (gstore)
    affine_backward_param_batch(ws.a0.data(), d_r1, m, h, h, gstore->of(p.w1).data(),
                                gstore->of(p.b1).data());
  std::vector<T>& d_a0_buf = ws.r1;  // forward value no longer needed
  T* d_a0 = d_a0_buf.data();
  affine_backward_input_batch(d_r1, m, h, h, p.params.at(p.w1).data.data(), d_a0);
#pragma omp simd
  for (int64_t k = 0; k < m * h; ++k) d_a0[k] += d_a1[k];
  act_backward_from_output(Activation::relu, ws.a0.data(), d_a0, d_a0, m * h);

  if (gstore)
    affine_backward_param_batch(ws.enc.data(), d_a0, m, e, h, gstore->of(p.w0).data(),
                                gstore->of(p.b0).data());

  if (d_pos) {
    affine_backward_input_batch(d_a0, m, e, h, p.params.at(p.w0).data.data(), ws.d_enc.data());
    const double bound = cfg.scene_bound;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
      T scaled[3];
      detail::scale_point(pos + i * 3, bound, scaled);
      T dp[3] = {0, 0, 0};
      positional_encode_backward(scaled, 3, cfg.enc.levels_position, cfg.enc.include_input,
                                 ws.d_enc.data() + i * e, dp);
      for (int c = 0; c < 3; ++c) {
        T v = pos[i * 3 + c];
        bool inside = v > -static_cast<T>(bound) && v < static_cast<T>(bound);
        // The direct skip x -> out plus the encoding chain.
        d_pos[i * 3 + c] += d_out[i * 3 + c] + (inside ? dp[c] / static_cast<T>(bound) : T(0));
      }
    }
  }
}

// Single-point projection.
template <typename T>
void project(const ProjectionField<T>& p, const T* x1, T* x0) {
  ProjectionWorkspace<T> ws;
  projection_forward_batch(p, x1, 1, ws);
  x0[0] = ws.out[0];
  x0[1] = ws.out[1];
  x0[2] = ws.out[2];
}

// Eq. of the composition: evaluate the field at the projected point; the
// view direction passes through unchanged.
template <typename T>
void composed_eval(const ProjectionField<T>& p, const RadianceField<T>& f, const T* x1,
                   const T* dir, T* rgb_out, T* sigma_out) {
  T x0[3];
  project(p, x1, x0);
  field_eval(f, x0, dir, rgb_out, sigma_out);
}

}  // namespace knerf
