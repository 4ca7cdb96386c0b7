#include "knerf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "knerf/digest.hpp"
#include "knerf/metrics.hpp"

namespace knerf {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RayDataset RayDataset::load(const std::string& dir, Split split, bool white_background) {
  auto [manifest, images] = load_dataset(dir, split, white_background);
  KNERF_REQUIRE(!images.empty(), "RayDataset: empty split in " + dir);
  std::vector<Camera> cams;
  for (const auto& frame : manifest.frames) {
    Camera cam;
    cam.width = images[0].width;
    cam.height = images[0].height;
    cam.camera_angle_x = manifest.camera_angle_x;
    cam.c2w = frame.transform_matrix;
    cams.push_back(cam);
  }
  return from_frames(manifest.camera_angle_x, cams, images);
}

RayDataset RayDataset::from_frames(double camera_angle_x, const std::vector<Camera>& cams,
                                   const std::vector<ImageBuffer>& imgs) {
  KNERF_REQUIRE(cams.size() == imgs.size() && !cams.empty(),
                "RayDataset: camera/image mismatch");
  RayDataset data;
  data.width = imgs[0].width;
  data.height = imgs[0].height;
  data.camera_angle_x = camera_angle_x;
  data.cameras = cams;
  data.images = imgs;
  data.t_near = cams[0].t_near;
  data.t_far = cams[0].t_far;

  int64_t ppi = data.pixels_per_image();
  int64_t total = ppi * data.n_images();
  data.origins.resize(total * 3);
  data.dirs.resize(total * 3);
  data.colors.resize(total * 3);
  for (int64_t im = 0; im < data.n_images(); ++im) {
    const Camera& cam = cams[static_cast<size_t>(im)];
    cam.validate();
    for (int j = 0; j < data.height; ++j)
      for (int i = 0; i < data.width; ++i) {
        Ray r = ray_for_pixel(cam, i, j);
        int64_t idx = im * ppi + static_cast<int64_t>(j) * data.width + i;
        data.origins[idx * 3 + 0] = static_cast<float>(r.origin.x);
        data.origins[idx * 3 + 1] = static_cast<float>(r.origin.y);
        data.origins[idx * 3 + 2] = static_cast<float>(r.origin.z);
        data.dirs[idx * 3 + 0] = static_cast<float>(r.dir.x);
        data.dirs[idx * 3 + 1] = static_cast<float>(r.dir.y);
        data.dirs[idx * 3 + 2] = static_cast<float>(r.dir.z);
        const float* px = imgs[static_cast<size_t>(im)].at(i, j);
        data.colors[idx * 3 + 0] = px[0];
        data.colors[idx * 3 + 1] = px[1];
        data.colors[idx * 3 + 2] = px[2];
      }
  }
  return data;
}

void sample_ray_batch(const RayDataset& data, int n, Pcg32& rng, RayBatch<float>* rays,
                      std::vector<float>* gt_colors) {
  KNERF_REQUIRE(data.n_images() > 0, "sample_ray_batch: empty dataset");
  rays->resize(n);
  gt_colors->resize(static_cast<size_t>(n) * 3);
  int64_t ppi = data.pixels_per_image();
  for (int s = 0; s < n; ++s) {
    int64_t im = rng.below(static_cast<uint32_t>(data.n_images()));
    int64_t px = rng.below(static_cast<uint32_t>(ppi));
    int64_t idx = im * ppi + px;
    for (int c = 0; c < 3; ++c) {
      rays->origin[static_cast<size_t>(s) * 3 + c] = data.origins[idx * 3 + c];
      rays->dir[static_cast<size_t>(s) * 3 + c] = data.dirs[idx * 3 + c];
      (*gt_colors)[static_cast<size_t>(s) * 3 + c] = data.colors[idx * 3 + c];
    }
    rays->t_near[static_cast<size_t>(s)] = static_cast<float>(data.t_near);
    rays->t_far[static_cast<size_t>(s)] = static_cast<float>(data.t_far);
    rays->stream[static_cast<size_t>(s)] = static_cast<uint64_t>(s);
  }
}

double mse_loss(const float* coarse, const float* fine, const float* gt, int64_t n_rays,
                float* d_coarse, float* d_fine) {
  KNERF_REQUIRE(n_rays > 0, "mse_loss: empty batch");
  double total = 0;
  float inv_n = 1.0f / static_cast<float>(n_rays);
  for (int64_t i = 0; i < n_rays * 3; ++i) {
    float dc = coarse[i] - gt[i];
    float df = fine[i] - gt[i];
    total += static_cast<double>(dc) * dc + static_cast<double>(df) * df;
    if (d_coarse) d_coarse[i] = 2.0f * dc * inv_n;
    if (d_fine) d_fine[i] = 2.0f * df * inv_n;
  }
  return total / static_cast<double>(n_rays);
}

Pipeline Pipeline::init(const FieldConfig& fc, uint64_t seed) {
  Pipeline p;
  p.field_cfg = fc;
  p.coarse = RadianceField<float>::init(fc, "coarse", derive_seed(seed, 0xC0, 1));
  p.fine = RadianceField<float>::init(fc, "fine", derive_seed(seed, 0xF0, 2));
  return p;
}

void Pipeline::add_identity_projection(const ProjectionConfig& pc, uint64_t seed) {
  proj_cfg = pc;
  proj = init_projection_identity<float>(pc, derive_seed(seed, 0xAF, 3), "proj");
}

Checkpoint Pipeline::to_checkpoint(const std::map<std::string, std::string>& extra_meta) const {
  Checkpoint ckpt;
  ckpt.meta["width"] = std::to_string(field_cfg.width);
  ckpt.meta["trunk_depth"] = std::to_string(field_cfg.trunk_depth);
  ckpt.meta["skip_layer"] = std::to_string(field_cfg.skip_layer);
  ckpt.meta["color_hidden"] = std::to_string(field_cfg.color_hidden_width());
  ckpt.meta["levels_position"] = std::to_string(field_cfg.enc.levels_position);
  ckpt.meta["levels_direction"] = std::to_string(field_cfg.enc.levels_direction);
  ckpt.meta["include_input"] = field_cfg.enc.include_input ? "1" : "0";
  ckpt.meta["scene_bound"] = format_double(field_cfg.scene_bound);
  ckpt.meta["has_projection"] = proj ? "1" : "0";
  if (proj) ckpt.meta["proj_hidden"] = std::to_string(proj_cfg.hidden);
  for (const auto& [k, v] : extra_meta) ckpt.meta[k] = v;

  for (const auto& t : coarse.params.tensors) ckpt.tensors.tensors.push_back(t);
  for (const auto& t : fine.params.tensors) ckpt.tensors.tensors.push_back(t);
  if (proj)
    for (const auto& t : proj->params.tensors) ckpt.tensors.tensors.push_back(t);
  return ckpt;
}

Pipeline Pipeline::from_checkpoint(const Checkpoint& ckpt) {
  auto meta_int = [&](const std::string& key) {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw checkpoint_error("checkpoint missing meta key " + key);
    return std::stoi(it->second);
  };
  FieldConfig fc;
  fc.width = meta_int("width");
  fc.trunk_depth = meta_int("trunk_depth");
  fc.skip_layer = meta_int("skip_layer");
  fc.color_hidden = meta_int("color_hidden");
  fc.enc.levels_position = meta_int("levels_position");
  fc.enc.levels_direction = meta_int("levels_direction");
  fc.enc.include_input = meta_int("include_input") != 0;
  fc.scene_bound = std::stod(ckpt.meta.at("scene_bound"));

  Pipeline p;
  p.field_cfg = fc;
  p.coarse.cfg = fc;
  p.coarse.build_params("coarse");
  p.fine.cfg = fc;
  p.fine.build_params("fine");
  if (meta_int("has_projection") != 0) {
    ProjectionConfig pc;
    pc.hidden = meta_int("proj_hidden");
    pc.enc = fc.enc;
    pc.scene_bound = fc.scene_bound;
    p.proj_cfg = pc;
    ProjectionField<float> proj;
    proj.cfg = pc;
    proj.build_params("proj");
    p.proj = std::move(proj);
  }

  auto fill = [&](ParamSet<float>& dst) {
    for (auto& t : dst.tensors) {
      int src = ckpt.tensors.find(t.name);
      if (src < 0) throw checkpoint_error("checkpoint missing tensor " + t.name);
      const auto& s = ckpt.tensors.at(src);
      if (s.shape != t.shape) throw checkpoint_error("checkpoint shape mismatch for " + t.name);
      t.data = s.data;
    }
  };
  fill(p.coarse.params);
  fill(p.fine.params);
  if (p.proj) fill(p.proj->params);
  return p;
}

ImageBuffer render_image(const Camera& cam, const ProjectionField<float>* proj,
                         const RadianceField<float>& coarse, const RadianceField<float>& fine,
                         const RenderOptions& opts, uint64_t seed) {
  cam.validate();
  ImageBuffer img(cam.width, cam.height);
  const int64_t total = static_cast<int64_t>(cam.width) * cam.height;
  const int64_t chunk = 256;  // bounds activation-cache memory
  RayBatch<float> batch;
  RenderWorkspace<float> ws;
  for (int64_t start = 0; start < total; start += chunk) {
    int64_t count = std::min(chunk, total - start);
    batch.resize(count);
    for (int64_t k = 0; k < count; ++k) {
      int64_t pix = start + k;
      int i = static_cast<int>(pix % cam.width);
      int j = static_cast<int>(pix / cam.width);
      Ray r = ray_for_pixel(cam, i, j);
      r.t_near = cam.t_near;
      r.t_far = cam.t_far;
      batch.set(k, r, static_cast<uint64_t>(pix));
    }
    render_batch(batch, proj, coarse, fine, opts, seed, ws);
    for (int64_t k = 0; k < count; ++k)
      for (int c = 0; c < 3; ++c)
        img.pixels[static_cast<size_t>((start + k) * 3 + c)] =
            std::clamp(ws.fine.color[static_cast<size_t>(k * 3 + c)], 0.0f, 1.0f);
  }
  return img;
}

double validation_psnr(const Pipeline& model, const RayDataset& data, const RenderOptions& opts) {
  RenderOptions eval_opts = opts;
  eval_opts.jitter = false;
  double sum = 0;
  for (size_t i = 0; i < data.cameras.size(); ++i) {
    ImageBuffer img = render_image(data.cameras[i], model.proj ? &*model.proj : nullptr,
                                   model.coarse, model.fine, eval_opts, /*seed=*/0);
    sum += psnr(mse_image(img, data.images[i]));
  }
  return sum / static_cast<double>(data.cameras.size());
}

namespace {

struct ParamSnapshot {
  std::vector<std::vector<float>> coarse, fine, proj;

  static ParamSnapshot capture(const Pipeline& m) {
    ParamSnapshot s;
    for (const auto& t : m.coarse.params.tensors) s.coarse.push_back(t.data);
    for (const auto& t : m.fine.params.tensors) s.fine.push_back(t.data);
    if (m.proj)
      for (const auto& t : m.proj->params.tensors) s.proj.push_back(t.data);
    return s;
  }

  void restore(Pipeline& m) const {
    for (size_t i = 0; i < coarse.size(); ++i) m.coarse.params.tensors[i].data = coarse[i];
    for (size_t i = 0; i < fine.size(); ++i) m.fine.params.tensors[i].data = fine[i];
    if (m.proj)
      for (size_t i = 0; i < proj.size(); ++i) m.proj->params.tensors[i].data = proj[i];
  }
};

std::string fields_digest(const Pipeline& m) {
  ParamSet<float> both;
  for (const auto& t : m.coarse.params.tensors) both.tensors.push_back(t);
  for (const auto& t : m.fine.params.tensors) both.tensors.push_back(t);
  return param_digest(both);
}

StageReport run_stage(const char* stage_name, Pipeline& model, const RayDataset& train,
                      const RayDataset& val, const TrainConfig& cfg, const StageOptions& opts,
                      int iters, bool train_fields, bool train_proj) {
  cfg.validate();
  KNERF_REQUIRE(!train_proj || model.proj.has_value(),
                std::string(stage_name) + ": projection module not initialized");

  StageReport report;
  report.stage = stage_name;
  report.field_digest_before = fields_digest(model);
  auto t_start = std::chrono::steady_clock::now();

  uint64_t stage_hash = fnv1a(stage_name);
  Pcg32 batch_rng(derive_seed(cfg.seed, stage_hash, 0xBA7C4));

  ProjectionField<float>* proj = model.proj ? &*model.proj : nullptr;

  GradientStore<float> g_coarse(model.coarse.params), g_fine(model.fine.params);
  GradientStore<float> g_proj;
  if (proj) g_proj = GradientStore<float>(proj->params);
  AdamState<float> adam_coarse(model.coarse.params), adam_fine(model.fine.params);
  AdamState<float> adam_proj;
  if (proj) adam_proj = AdamState<float>(proj->params);

  RenderOptions train_opts = opts.render;
  train_opts.jitter = true;

  RayBatch<float> batch;
  std::vector<float> gt, d_coarse, d_fine;
  RenderWorkspace<float> ws;

  double best = validation_psnr(model, val, opts.render);
  report.val_psnr_history.emplace_back(0, best);
  report.best_val_psnr = best;
  report.best_iter = 0;
  ParamSnapshot best_params = ParamSnapshot::capture(model);

  for (int iter = 0; iter < iters; ++iter) {
    double lr = lr_schedule(opts.global_iter_offset + iter, cfg);
    sample_ray_batch(train, cfg.batch_rays, batch_rng, &batch, &gt);
    for (int s = 0; s < cfg.batch_rays; ++s)
      batch.stream[static_cast<size_t>(s)] =
          derive_seed(stage_hash, static_cast<uint64_t>(iter), static_cast<uint64_t>(s));

    render_batch(batch, proj, model.coarse, model.fine, train_opts, cfg.seed, ws);
    d_coarse.resize(gt.size());
    d_fine.resize(gt.size());
    double loss = mse_loss(ws.coarse.color.data(), ws.fine.color.data(), gt.data(),
                           cfg.batch_rays, d_coarse.data(), d_fine.data());
    if (!std::isfinite(loss)) {
      report.diverged = true;
      break;
    }
    report.loss_history.push_back(loss);

    if (train_fields) {
      g_coarse.zero();
      g_fine.zero();
    }
    if (train_proj) g_proj.zero();
    render_batch_backward(batch, proj, model.coarse, model.fine, train_opts, ws, d_coarse.data(),
                          d_fine.data(), train_fields ? &g_coarse : nullptr,
                          train_fields ? &g_fine : nullptr, train_proj ? &g_proj : nullptr);
    try {
      if (train_fields) {
        adam_step(model.coarse.params, g_coarse, adam_coarse, lr, cfg);
        adam_step(model.fine.params, g_fine, adam_fine, lr, cfg);
      }
      if (train_proj) adam_step(model.proj->params, g_proj, adam_proj, lr, cfg);
    } catch (const contract_error&) {
      report.diverged = true;
      break;
    }

    bool last = iter + 1 == iters;
    if ((iter + 1) % cfg.eval_every == 0 || last) {
      double v = validation_psnr(model, val, opts.render);
      report.val_psnr_history.emplace_back(iter + 1, v);
      if (v > report.best_val_psnr) {
        report.best_val_psnr = v;
        report.best_iter = iter + 1;
        best_params = ParamSnapshot::capture(model);
      }
      if (opts.regression_floor >= 0 && v < opts.regression_floor - 0.5) break;
    }
  }

  best_params.restore(model);
  report.final_val_psnr = report.best_val_psnr;
  report.field_digest_after = fields_digest(model);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  if (!opts.checkpoint_path.empty()) {
    Checkpoint ckpt = model.to_checkpoint({{"stage", stage_name},
                                           {"best_val_psnr", format_double(report.best_val_psnr)},
                                           {"best_iter", std::to_string(report.best_iter)}});
    save_checkpoint(ckpt, opts.checkpoint_path);
    report.checkpoint_path = opts.checkpoint_path;
  }
  return report;
}

}  // namespace

StageReport pretrain(Pipeline& model, const RayDataset& train, const RayDataset& val,
                     const TrainConfig& cfg, const StageOptions& opts) {
  KNERF_REQUIRE(train.n_images() >= 2, "pretrain: need at least 2 views");
  return run_stage("pretrain", model, train, val, cfg, opts, cfg.iters_pretrain,
                   /*train_fields=*/true, /*train_proj=*/false);
}

StageReport train_projection(Pipeline& model, const RayDataset& train5, const RayDataset& val,
                             const TrainConfig& cfg, const StageOptions& opts) {
  StageReport report = run_stage("projection", model, train5, val, cfg, opts,
                                 cfg.iters_projection, /*train_fields=*/false,
                                 /*train_proj=*/true);
  KNERF_REQUIRE(report.field_digest_before == report.field_digest_after,
                "train_projection: frozen field parameters changed");
  return report;
}

StageReport finetune(Pipeline& model, const RayDataset& train5, const RayDataset& val,
                     const TrainConfig& cfg, const StageOptions& opts) {
  return run_stage("finetune", model, train5, val, cfg, opts, cfg.iters_finetune,
                   /*train_fields=*/true, /*train_proj=*/model.proj.has_value());
}

void StageReport::write_log(const std::string& path) const {
  std::ofstream out(path, std::ios::app);
  if (!out) throw io_error("cannot append stage log: " + path);
  out << "stage=" << stage << "\n";
  out << "iterations=" << loss_history.size() << "\n";
  out << "wall_seconds=" << format_double(wall_seconds) << "\n";
  out << "diverged=" << (diverged ? 1 : 0) << "\n";
  out << "best_iter=" << best_iter << "\n";
  out << "best_val_psnr=" << format_double(best_val_psnr) << "\n";
  out << "final_val_psnr=" << format_double(final_val_psnr) << "\n";
  if (!checkpoint_path.empty()) out << "checkpoint=" << checkpoint_path << "\n";
  out << "field_digest_before=" << field_digest_before << "\n";
  out << "field_digest_after=" << field_digest_after << "\n";
  if (!loss_history.empty()) {
    out << "loss_first=" << format_double(loss_history.front()) << "\n";
    out << "loss_last=" << format_double(loss_history.back()) << "\n";
  }
  for (const auto& [iter, v] : val_psnr_history)
    out << "val_psnr_" << iter << "=" << format_double(v) << "\n";
  out << "\n";
}

}  // namespace knerf
