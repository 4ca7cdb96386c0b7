#pragma once

#include <array>
#include <cstring>
#include <string>
#include <vector>

#include "knerf/activations.hpp"
#include "knerf/encoding.hpp"
#include "knerf/linalg.hpp"
#include "knerf/tensor.hpp"

namespace knerf {

struct FieldConfig {
  int width = 128;
  int trunk_depth = 8;
  // Trunk layer whose input is the previous activation concatenated with the
  // encoded position again.
  int skip_layer = 4;
  int color_hidden = 0;  // 0 -> width / 2
  EncodingConfig enc;
  // Sample positions are clamped to [-scene_bound, scene_bound]^3 and scaled
  // to [-1, 1] before encoding, keeping sinusoid arguments well conditioned.
  double scene_bound = 3.0;

  int enc_pos_len() const { return encoded_length(3, enc.levels_position, enc.include_input); }
  int enc_dir_len() const { return encoded_length(3, enc.levels_direction, enc.include_input); }
  int color_hidden_width() const { return color_hidden > 0 ? color_hidden : width / 2; }
};

// An 8-layer ReLU trunk over the encoded position with one skip
// concatenation, a linear density head (ReLU at the output), and a color
// branch that sees the trunk features plus the encoded view direction
// (sigmoid output). Density therefore cannot depend on the direction.
template <typename T>
struct RadianceField {
  FieldConfig cfg;
  ParamSet<T> params;
  std::vector<int> trunk_w, trunk_b;
  int sigma_w = -1, sigma_b = -1;
  int feat_w = -1, feat_b = -1;
  int col0_w = -1, col0_b = -1;
  int col1_w = -1, col1_b = -1;

  int trunk_in_dim(int layer) const {
    if (layer == 0) return cfg.enc_pos_len();
    return cfg.width + (layer == cfg.skip_layer ? cfg.enc_pos_len() : 0);
  }

  void build_params(const std::string& prefix) {
    trunk_w.clear();
    trunk_b.clear();
    for (int l = 0; l < cfg.trunk_depth; ++l) {
      trunk_w.push_back(params.add(prefix + ".trunk" + std::to_string(l) + ".w",
                                   {cfg.width, trunk_in_dim(l)}));
      trunk_b.push_back(params.add(prefix + ".trunk" + std::to_string(l) + ".b", {cfg.width}));
    }
    sigma_w = params.add(prefix + ".sigma.w", {1, cfg.width});
    sigma_b = params.add(prefix + ".sigma.b", {1});
    feat_w = params.add(prefix + ".feature.w", {cfg.width, cfg.width});
    feat_b = params.add(prefix + ".feature.b", {cfg.width});
    col0_w = params.add(prefix + ".color_hidden.w",
                        {cfg.color_hidden_width(), cfg.width + cfg.enc_dir_len()});
    col0_b = params.add(prefix + ".color_hidden.b", {cfg.color_hidden_width()});
    col1_w = params.add(prefix + ".color_out.w", {3, cfg.color_hidden_width()});
    col1_b = params.add(prefix + ".color_out.b", {3});
  }

  static RadianceField init(const FieldConfig& cfg, const std::string& prefix, uint64_t seed) {
    RadianceField f;
    f.cfg = cfg;
    f.build_params(prefix);
    Pcg32 rng(seed);
    for (auto& t : f.params.tensors)
      if (t.shape.size() == 2) t.init_glorot(rng);
    return f;
  }
};

template <typename T>
struct FieldWorkspace {
  int64_t cap = 0;
  std::vector<T> enc_pos;                // M x EP
  std::vector<std::vector<T>> h;         // trunk activations, M x W each
  std::vector<T> skip_cat;               // M x (W + EP)
  std::vector<T> feature;                // M x W (linear)
  std::vector<T> enc_dir;                // M x ED
  std::vector<T> col_cat;                // M x (W + ED)
  std::vector<T> col_h;                  // M x CH (relu)
  std::vector<T> rgb;                    // M x 3 (sigmoid)
  std::vector<T> sigma;                  // M x 1 (relu)
  // backward scratch
  std::vector<T> d_a, d_b, d_cat, d_colcat, d_enc, d_raw3, d_raw1;

  void ensure(const FieldConfig& cfg, int64_t m) {
    if (m <= cap && !h.empty()) return;
    cap = m;
    int ep = cfg.enc_pos_len(), ed = cfg.enc_dir_len(), w = cfg.width;
    int ch = cfg.color_hidden_width();
    enc_pos.resize(m * ep);
    h.assign(static_cast<size_t>(cfg.trunk_depth), {});
    for (auto& hv : h) hv.resize(m * w);
    skip_cat.resize(m * (w + ep));
    feature.resize(m * w);
    enc_dir.resize(m * ed);
    col_cat.resize(m * (w + ed));
    col_h.resize(m * ch);
    rgb.resize(m * 3);
    sigma.resize(m);
    d_a.resize(m * w);
    d_b.resize(m * w);
    d_cat.resize(m * (w + ep));
    d_colcat.resize(m * (w + ed));
    d_enc.resize(m * ep);
    d_raw3.resize(m * 3);
    d_raw1.resize(m);
  }
};

namespace detail {

// Scale-and-clamp into [-1, 1] for encoding.
template <typename T>
inline void scale_point(const T* pos, double bound, T* out) {
  for (int c = 0; c < 3; ++c) {
    T v = pos[c];
    T b = static_cast<T>(bound);
    if (v > b) v = b;
    if (v < -b) v = -b;
    out[c] = v / b;
  }
}

}  // namespace detail

// Forward pass over M samples. Positions in world units, directions unit.
// Results land in ws.rgb (sigmoid) and ws.sigma (relu); all intermediate
// activations stay cached for field_backward_batch.
template <typename T>
void field_forward_batch(const RadianceField<T>& f, const T* pos, const T* dir, int64_t m,
                         FieldWorkspace<T>& ws) {
  const FieldConfig& cfg = f.cfg;
  ws.ensure(cfg, m);
  const int ep = cfg.enc_pos_len(), ed = cfg.enc_dir_len(), w = cfg.width;
  const int ch = cfg.color_hidden_width();

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    T scaled[3];
    detail::scale_point(pos + i * 3, cfg.scene_bound, scaled);
    positional_encode_into(scaled, 3, cfg.enc.levels_position, cfg.enc.include_input,
                           ws.enc_pos.data() + i * ep);
    positional_encode_into(dir + i * 3, 3, cfg.enc.levels_direction, cfg.enc.include_input,
                           ws.enc_dir.data() + i * ed);
  }

  const T* cur = ws.enc_pos.data();
  for (int l = 0; l < cfg.trunk_depth; ++l) {
    const T* input = cur;
    if (l == cfg.skip_layer) {
      // concat(h_{l-1}, enc_pos)
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < m; ++i) {
        std::memcpy(ws.skip_cat.data() + i * (w + ep), cur + i * w, sizeof(T) * w);
        std::memcpy(ws.skip_cat.data() + i * (w + ep) + w, ws.enc_pos.data() + i * ep,
                    sizeof(T) * ep);
      }
      input = ws.skip_cat.data();
    }
    auto& wt = f.params.at(f.trunk_w[static_cast<size_t>(l)]);
    auto& bt = f.params.at(f.trunk_b[static_cast<size_t>(l)]);
    T* out = ws.h[static_cast<size_t>(l)].data();
    affine_forward_batch(input, m, f.trunk_in_dim(l), w, wt.data.data(), bt.data.data(), out);
    act_forward(Activation::relu, out, out, m * w);
    cur = out;
  }

  const T* trunk_out = ws.h.back().data();
  affine_forward_batch(trunk_out, m, w, 1, f.params.at(f.sigma_w).data.data(),
                       f.params.at(f.sigma_b).data.data(), ws.sigma.data());
  act_forward(Activation::relu, ws.sigma.data(), ws.sigma.data(), m);

  affine_forward_batch(trunk_out, m, w, w, f.params.at(f.feat_w).data.data(),
                       f.params.at(f.feat_b).data.data(), ws.feature.data());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    std::memcpy(ws.col_cat.data() + i * (w + ed), ws.feature.data() + i * w, sizeof(T) * w);
    std::memcpy(ws.col_cat.data() + i * (w + ed) + w, ws.enc_dir.data() + i * ed, sizeof(T) * ed);
  }
  affine_forward_batch(ws.col_cat.data(), m, w + ed, ch, f.params.at(f.col0_w).data.data(),
                       f.params.at(f.col0_b).data.data(), ws.col_h.data());
  act_forward(Activation::relu, ws.col_h.data(), ws.col_h.data(), m * ch);
  affine_forward_batch(ws.col_h.data(), m, ch, 3, f.params.at(f.col1_w).data.data(),
                       f.params.at(f.col1_b).data.data(), ws.rgb.data());
  act_forward(Activation::sigmoid, ws.rgb.data(), ws.rgb.data(), m * 3);
}

// Backward pass matching field_forward_batch. `gstore` may be null to skip
// parameter gradients (frozen fields); `d_pos` may be null to skip input
// gradients. d_pos is overwritten with dLoss/d(world position).
template <typename T>
void field_backward_batch(const RadianceField<T>& f, const T* pos, int64_t m,
                          FieldWorkspace<T>& ws, const T* d_rgb, const T* d_sigma,
                          GradientStore<T>* gstore, T* d_pos) {
  const FieldConfig& cfg = f.cfg;
  const int ep = cfg.enc_pos_len(), ed = cfg.enc_dir_len(), w = cfg.width;
  const int ch = cfg.color_hidden_width();
  const T* trunk_out = ws.h.back().data();

  // Color head: sigmoid -> col1 -> relu -> col0 -> split(feature, enc_dir).
  act_backward_from_output(Activation::sigmoid, ws.rgb.data(), d_rgb, ws.d_raw3.data(), m * 3);
  auto& col1w = f.params.at(f.col1_w);
  if (gstore)
    affine_backward_param_batch(ws.col_h.data(), ws.d_raw3.data(), m, ch, 3,
                                gstore->of(f.col1_w).data(), gstore->of(f.col1_b).data());
  T* d_colh = ws.d_a.data();  // m x ch fits inside m x w scratch (ch <= w)
  affine_backward_input_batch(ws.d_raw3.data(), m, ch, 3, col1w.data.data(), d_colh);
  act_backward_from_output(Activation::relu, ws.col_h.data(), d_colh, d_colh, m * ch);

  auto& col0w = f.params.at(f.col0_w);
  if (gstore)
    affine_backward_param_batch(ws.col_cat.data(), d_colh, m, w + ed, ch,
                                gstore->of(f.col0_w).data(), gstore->of(f.col0_b).data());
  affine_backward_input_batch(d_colh, m, w + ed, ch, col0w.data.data(), ws.d_colcat.data());

  // d(trunk_out) accumulates from: feature path, sigma head.
  T* d_feature = ws.d_b.data();  // m x w
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i)
    std::memcpy(d_feature + i * w, ws.d_colcat.data() + i * (w + ed), sizeof(T) * w);
  // (the enc_dir slice of d_colcat is dropped: directions are inputs)

  auto& featw = f.params.at(f.feat_w);
  if (gstore)
    affine_backward_param_batch(trunk_out, d_feature, m, w, w, gstore->of(f.feat_w).data(),
                                gstore->of(f.feat_b).data());
  T* d_trunk = ws.d_a.data();  // m x w
  affine_backward_input_batch(d_feature, m, w, w, featw.data.data(), d_trunk);

  act_backward_from_output(Activation::relu, ws.sigma.data(), d_sigma, ws.d_raw1.data(), m);
  auto& sigw = f.params.at(f.sigma_w);
  if (gstore)
    affine_backward_param_batch(trunk_out, ws.d_raw1.data(), m, w, 1, gstore->of(f.sigma_w).data(),
                                gstore->of(f.sigma_b).data());
  const T* sw = sigw.data.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    T g = ws.d_raw1[static_cast<size_t>(i)];
    T* row = d_trunk + i * w;
#pragma omp simd
    for (int k = 0; k < w; ++k) row[k] += g * sw[k];
  }

  // Trunk, back to front. d_enc accumulates skip and layer-0 contributions.
  std::fill(ws.d_enc.begin(), ws.d_enc.begin() + m * ep, T(0));
  T* d_cur = d_trunk;        // gradient wrt h[l] (post-relu)
  T* d_next = ws.d_b.data();  // scratch for gradient wrt the layer below
  for (int l = cfg.trunk_depth - 1; l >= 0; --l) {
    act_backward_from_output(Activation::relu, ws.h[static_cast<size_t>(l)].data(), d_cur, d_cur,
                             m * w);
    const T* input = l == 0 ? ws.enc_pos.data()
                            : (l == cfg.skip_layer ? ws.skip_cat.data()
                                                   : ws.h[static_cast<size_t>(l - 1)].data());
    int in_dim = f.trunk_in_dim(l);
    auto& wt = f.params.at(f.trunk_w[static_cast<size_t>(l)]);
    if (gstore)
      affine_backward_param_batch(input, d_cur, m, in_dim, w,
                                  gstore->of(f.trunk_w[static_cast<size_t>(l)]).data(),
                                  gstore->of(f.trunk_b[static_cast<size_t>(l)]).data());
    if (l == 0) {
      if (d_pos) {
        affine_backward_input_batch(d_cur, m, in_dim, w, wt.data.data(), ws.d_cat.data());
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < m; ++i) {
          T* de = ws.d_enc.data() + i * ep;
          const T* src = ws.d_cat.data() + i * ep;
#pragma omp simd
          for (int k = 0; k < ep; ++k) de[k] += src[k];
        }
      }
      break;
    }
    if (l == cfg.skip_layer) {
      affine_backward_input_batch(d_cur, m, in_dim, w, wt.data.data(), ws.d_cat.data());
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < m; ++i) {
        std::memcpy(d_next + i * w, ws.d_cat.data() + i * (w + ep), sizeof(T) * w);
        if (d_pos) {
          T* de = ws.d_enc.data() + i * ep;
          const T* src = ws.d_cat.data() + i * (w + ep) + w;
#pragma omp simd
          for (int k = 0; k < ep; ++k) de[k] += src[k];
        }
      }
    } else {
      affine_backward_input_batch(d_cur, m, w, w, wt.data.data(), d_next);
    }
    std::swap(d_cur, d_next);
  }

  if (d_pos) {
    const double bound = cfg.scene_bound;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
      T scaled[3];
      detail::scale_point(pos + i * 3, bound, scaled);
      T dp[3] = {0, 0, 0};
      positional_encode_backward(scaled, 3, cfg.enc.levels_position, cfg.enc.include_input,
                                 ws.d_enc.data() + i * ep, dp);
      for (int c = 0; c < 3; ++c) {
        T v = pos[i * 3 + c];
        bool inside = v > -static_cast<T>(bound) && v < static_cast<T>(bound);
        d_pos[i * 3 + c] = inside ? dp[c] / static_cast<T>(bound) : T(0);
      }
    }
  }
}

// Single-point evaluation: rgb in [0,1]^3 from the sigmoid output, sigma >= 0
// from the ReLU output.
template <typename T>
void field_eval(const RadianceField<T>& f, const T* pos, const T* dir, T* rgb_out, T* sigma_out) {
  FieldWorkspace<T> ws;
  field_forward_batch(f, pos, dir, 1, ws);
  rgb_out[0] = ws.rgb[0];
  rgb_out[1] = ws.rgb[1];
  rgb_out[2] = ws.rgb[2];
  *sigma_out = ws.sigma[0];
}

}  // namespace knerf
