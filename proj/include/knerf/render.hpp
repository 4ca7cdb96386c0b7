#pragma once

#include <cstring>
#include <type_traits>
#include <optional>
#include <vector>

#include "knerf/camera.hpp"
#include "knerf/composite.hpp"
#include "knerf/projection.hpp"
#include "knerf/radiance_field.hpp"
#include "knerf/sampling.hpp"

namespace knerf {

struct RenderOptions {
  int n_coarse = 64;
  int n_fine = 128;
  bool white_background = true;
  bool jitter = false;  // stratified perturbation during training

  void validate() const {
    KNERF_REQUIRE(n_coarse >= 2, "RenderOptions: n_coarse must be >= 2");
    KNERF_REQUIRE(n_fine >= 0, "RenderOptions: n_fine must be >= 0");
  }
};

// Distance past the last sample; lets the final sample absorb all remaining
// transmittance so opaque objects do not leak background.
inline constexpr double kLastDeltaSentinel = 1e10;

template <typename T>
struct RayBatch {
  int64_t n = 0;
  std::vector<T> origin;   // n x 3
  std::vector<T> dir;      // n x 3 (unit)
  std::vector<T> t_near;   // n
  std::vector<T> t_far;    // n
  // Stream id feeding the per-ray rng (pixel index for image renders), so
  // any parallel schedule draws identical jitter.
  std::vector<uint64_t> stream;

  void resize(int64_t count) {
    n = count;
    origin.resize(count * 3);
    dir.resize(count * 3);
    t_near.resize(count);
    t_far.resize(count);
    stream.resize(count);
  }

  void set(int64_t i, const Ray& r, uint64_t stream_id) {
    origin[i * 3 + 0] = static_cast<T>(r.origin.x);
    origin[i * 3 + 1] = static_cast<T>(r.origin.y);
    origin[i * 3 + 2] = static_cast<T>(r.origin.z);
    dir[i * 3 + 0] = static_cast<T>(r.dir.x);
    dir[i * 3 + 1] = static_cast<T>(r.dir.y);
    dir[i * 3 + 2] = static_cast<T>(r.dir.z);
    t_near[i] = static_cast<T>(r.t_near);
    t_far[i] = static_cast<T>(r.t_far);
    stream[i] = stream_id;
  }
};

// One rendering pass (sample positions, field outputs, compositing results)
// kept around for the backward sweep.
template <typename T>
struct PassBuffers {
  int n_samples = 0;
  std::vector<T> t;        // n_rays x n_samples
  std::vector<T> delta;    // n_rays x n_samples
  std::vector<T> pos;      // (n_rays * n_samples) x 3, deformed space
  std::vector<T> dirs;     // (n_rays * n_samples) x 3
  std::vector<T> color;    // n_rays x 3
  std::vector<T> weights;  // n_rays x n_samples
  std::vector<T> trans;    // n_rays
  FieldWorkspace<T> field_ws;
  ProjectionWorkspace<T> proj_ws;
  std::vector<T> d_rgb, d_sigma, d_pos;

  void resize(int64_t n_rays, int samples) {
    n_samples = samples;
    t.resize(n_rays * samples);
    delta.resize(n_rays * samples);
    pos.resize(n_rays * samples * 3);
    dirs.resize(n_rays * samples * 3);
    color.resize(n_rays * 3);
    weights.resize(n_rays * samples);
    trans.resize(n_rays);
  }
};

template <typename T>
struct RenderWorkspace {
  PassBuffers<T> coarse;
  PassBuffers<T> fine;
};

namespace detail {

enum : uint64_t { kStreamStratified = 0xC0A5, kStreamImportance = 0xF1E5 };

template <typename T>
void fill_positions(const RayBatch<T>& rays, const T* t, int n_samples, T* pos, T* dirs) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < rays.n; ++i) {
    const T* o = rays.origin.data() + i * 3;
    const T* d = rays.dir.data() + i * 3;
    for (int s = 0; s < n_samples; ++s) {
      T tv = t[i * n_samples + s];
      int64_t base = (i * n_samples + s) * 3;
      pos[base + 0] = o[0] + tv * d[0];
      pos[base + 1] = o[1] + tv * d[1];
      pos[base + 2] = o[2] + tv * d[2];
      dirs[base + 0] = d[0];
      dirs[base + 1] = d[1];
      dirs[base + 2] = d[2];
    }
  }
}

template <typename T>
void fill_deltas(const T* t, int64_t n_rays, int n_samples, T* delta) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n_rays; ++i) {
    const T* ti = t + i * n_samples;
    T* di = delta + i * n_samples;
    for (int s = 0; s + 1 < n_samples; ++s) di[s] = ti[s + 1] - ti[s];
    di[n_samples - 1] = static_cast<T>(kLastDeltaSentinel);
  }
}

// Runs projection (optional) + field + compositing over one pass.
template <typename T>
void run_pass(const RadianceField<T>& field, const ProjectionField<T>* proj,
              const RayBatch<T>& rays, bool white_background, PassBuffers<T>& pass) {
  int64_t m = rays.n * pass.n_samples;
  const T* field_pos = pass.pos.data();
  if (proj) {
    projection_forward_batch(*proj, pass.pos.data(), m, pass.proj_ws);
    field_pos = pass.proj_ws.out.data();
  }
  field_forward_batch(field, field_pos, pass.dirs.data(), m, pass.field_ws);
  fill_deltas(pass.t.data(), rays.n, pass.n_samples, pass.delta.data());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < rays.n; ++i) {
    composite(pass.field_ws.rgb.data() + i * pass.n_samples * 3,
              pass.field_ws.sigma.data() + i * pass.n_samples,
              pass.delta.data() + i * pass.n_samples, pass.n_samples, white_background,
              pass.color.data() + i * 3, pass.weights.data() + i * pass.n_samples,
              pass.trans.data() + i);
  }
}

// Backward through one pass: d_color -> field (+ projection) gradients.
template <typename T>
void run_pass_backward(const RadianceField<T>& field, const ProjectionField<T>* proj,
                       const RayBatch<T>& rays, bool white_background, PassBuffers<T>& pass,
                       const T* d_color, GradientStore<T>* g_field, GradientStore<T>* g_proj) {
  int64_t m = rays.n * pass.n_samples;
  pass.d_rgb.resize(m * 3);
  pass.d_sigma.resize(m);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < rays.n; ++i) {
    composite_backward(pass.field_ws.rgb.data() + i * pass.n_samples * 3,
                       pass.field_ws.sigma.data() + i * pass.n_samples,
                       pass.delta.data() + i * pass.n_samples, pass.n_samples, white_background,
                       d_color + i * 3, pass.d_rgb.data() + i * pass.n_samples * 3,
                       pass.d_sigma.data() + i * pass.n_samples);
  }
  const T* field_pos = proj ? pass.proj_ws.out.data() : pass.pos.data();
  T* d_field_pos = nullptr;
  if (proj) {
    pass.d_pos.assign(static_cast<size_t>(m) * 3, T(0));
    d_field_pos = pass.d_pos.data();
  }
  field_backward_batch(field, field_pos, m, pass.field_ws, pass.d_rgb.data(),
                       pass.d_sigma.data(), g_field, d_field_pos);
  if (proj) {
    // d_field_pos holds dLoss/d(projected position); chain into the
    // projection module. Gradients wrt the raw sample positions are not
    // needed (rays are fixed inputs).
    projection_backward_batch(*proj, pass.pos.data(), m, pass.proj_ws, d_field_pos, g_proj,
                              static_cast<T*>(nullptr));
  }
}

}  // namespace detail

// Renders a batch of rays: a stratified coarse pass through the coarse field
// and a fine pass through the fine field over the union of coarse and
// importance-sampled points. The projection module, when present, maps every
// sample position before field evaluation; sample placement itself is not
// differentiated through. Results stay in `ws` for an optional backward.
template <typename T>
void render_batch(const RayBatch<T>& rays, std::type_identity_t<const ProjectionField<T>*> proj,
                  const RadianceField<T>& coarse_field, const RadianceField<T>& fine_field,
                  const RenderOptions& opts, uint64_t seed, RenderWorkspace<T>& ws) {
  opts.validate();
  const int nc = opts.n_coarse;
  const int nf_total = opts.n_coarse + opts.n_fine;
  ws.coarse.resize(rays.n, nc);
  ws.fine.resize(rays.n, nf_total);

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < rays.n; ++i) {
    Pcg32 rng(derive_seed(seed, rays.stream[i], detail::kStreamStratified));
    sample_stratified(rays.t_near[i], rays.t_far[i], nc, opts.jitter, rng,
                      ws.coarse.t.data() + i * nc);
  }
  detail::fill_positions(rays, ws.coarse.t.data(), nc, ws.coarse.pos.data(),
                         ws.coarse.dirs.data());
  detail::run_pass(coarse_field, proj, rays, opts.white_background, ws.coarse);

  if (opts.n_fine > 0) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < rays.n; ++i) {
      // Canonical hierarchical sampling: bins between the midpoints of
      // adjacent coarse samples, weighted by the interior coarse weights.
      const T* tc = ws.coarse.t.data() + i * nc;
      const T* wc = ws.coarse.weights.data() + i * nc;
      std::vector<T> edges(static_cast<size_t>(nc) - 1);
      for (int s = 0; s + 1 < nc; ++s) edges[static_cast<size_t>(s)] = T(0.5) * (tc[s] + tc[s + 1]);
      Pcg32 rng(derive_seed(seed, rays.stream[i], detail::kStreamImportance));
      std::vector<T> extra(static_cast<size_t>(opts.n_fine));
      sample_importance(edges.data(), nc - 2, wc + 1, opts.n_fine, opts.jitter, rng, extra.data());
      merge_sorted_strict(tc, nc, extra.data(), opts.n_fine, ws.fine.t.data() + i * nf_total);
    }
  } else {
    std::memcpy(ws.fine.t.data(), ws.coarse.t.data(), sizeof(T) * static_cast<size_t>(rays.n) * nc);
  }
  detail::fill_positions(rays, ws.fine.t.data(), nf_total, ws.fine.pos.data(),
                         ws.fine.dirs.data());
  detail::run_pass(fine_field, proj, rays, opts.white_background, ws.fine);
}

// Backward pass over both rendering passes. Null gradient stores freeze the
// corresponding parameters.
template <typename T>
void render_batch_backward(const RayBatch<T>& rays, std::type_identity_t<const ProjectionField<T>*> proj,
                           const RadianceField<T>& coarse_field,
                           const RadianceField<T>& fine_field, const RenderOptions& opts,
                           RenderWorkspace<T>& ws, const T* d_color_coarse,
                           const T* d_color_fine, GradientStore<T>* g_coarse,
                           GradientStore<T>* g_fine, GradientStore<T>* g_proj) {
  detail::run_pass_backward(fine_field, proj, rays, opts.white_background, ws.fine, d_color_fine,
                            g_fine, g_proj);
  detail::run_pass_backward(coarse_field, proj, rays, opts.white_background, ws.coarse,
                            d_color_coarse, g_coarse, g_proj);
}

template <typename T>
struct RayRender {
  std::array<T, 3> coarse_color;
  std::array<T, 3> fine_color;
  std::vector<T> coarse_weights;
  std::vector<T> fine_weights;
};

// Single-ray convenience wrapper; draws the per-ray streams from `rng`.
template <typename T>
RayRender<T> render_ray(const Ray& ray, std::type_identity_t<const ProjectionField<T>*> proj,
                        const RadianceField<T>& coarse_field, const RadianceField<T>& fine_field,
                        const RenderOptions& opts, Pcg32& rng) {
  RayBatch<T> batch;
  batch.resize(1);
  uint64_t stream = (static_cast<uint64_t>(rng.next_u32()) << 32) | rng.next_u32();
  batch.set(0, ray, stream);
  RenderWorkspace<T> ws;
  render_batch(batch, proj, coarse_field, fine_field, opts, /*seed=*/0xB0F1, ws);
  RayRender<T> out;
  for (int c = 0; c < 3; ++c) {
    out.coarse_color[static_cast<size_t>(c)] = ws.coarse.color[static_cast<size_t>(c)];
    out.fine_color[static_cast<size_t>(c)] = ws.fine.color[static_cast<size_t>(c)];
  }
  out.coarse_weights = ws.coarse.weights;
  out.fine_weights = ws.fine.weights;
  return out;
}

}  // namespace knerf
