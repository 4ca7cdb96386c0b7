#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "knerf/adam.hpp"
#include "knerf/checkpoint.hpp"
#include "knerf/dataset.hpp"
#include "knerf/projection.hpp"
#include "knerf/radiance_field.hpp"
#include "knerf/render.hpp"

namespace knerf {

// A dataset flattened into per-pixel rays and target colors; the unit the
// ray batcher draws from.
struct RayDataset {
  int width = 0, height = 0;
  double camera_angle_x = 0;
  std::vector<Camera> cameras;
  std::vector<ImageBuffer> images;      // ground truth
  std::vector<float> origins;           // n_pixels_total x 3
  std::vector<float> dirs;              // n_pixels_total x 3
  std::vector<float> colors;            // n_pixels_total x 3
  double t_near = 2.0, t_far = 6.0;

  int64_t n_images() const { return static_cast<int64_t>(cameras.size()); }
  int64_t pixels_per_image() const { return static_cast<int64_t>(width) * height; }
  int64_t n_pixels() const { return n_images() * pixels_per_image(); }

  static RayDataset load(const std::string& dir, Split split, bool white_background = true);
  static RayDataset from_frames(double camera_angle_x, const std::vector<Camera>& cams,
                                const std::vector<ImageBuffer>& imgs);
};

// (rays, gt colors) drawn uniformly with replacement across all pixels of
// all images.
void sample_ray_batch(const RayDataset& data, int n, Pcg32& rng, RayBatch<float>* rays,
                      std::vector<float>* gt_colors);

// Eq.-style loss: mean over the batch of the summed squared coarse and fine
// color errors. d_coarse/d_fine, when given, receive the gradients.
double mse_loss(const float* coarse, const float* fine, const float* gt, int64_t n_rays,
                float* d_coarse = nullptr, float* d_fine = nullptr);

// The trainable model bundle: coarse + fine fields and, from stage 2 on,
// the shared projection module applied to both passes.
struct Pipeline {
  FieldConfig field_cfg;
  ProjectionConfig proj_cfg;
  RadianceField<float> coarse;
  RadianceField<float> fine;
  std::optional<ProjectionField<float>> proj;

  static Pipeline init(const FieldConfig& fc, uint64_t seed);
  void add_identity_projection(const ProjectionConfig& pc, uint64_t seed);

  Checkpoint to_checkpoint(const std::map<std::string, std::string>& extra_meta = {}) const;
  static Pipeline from_checkpoint(const Checkpoint& ckpt);
};

struct StageReport {
  std::string stage;
  std::vector<double> loss_history;                     // one entry per iteration
  std::vector<std::pair<int64_t, double>> val_psnr_history;  // (iteration, mean PSNR)
  double wall_seconds = 0;
  std::string checkpoint_path;
  bool diverged = false;
  int64_t best_iter = -1;
  double best_val_psnr = 0;
  double final_val_psnr = 0;
  std::string field_digest_before, field_digest_after;

  // Plain-text key=value log, appended to `path`.
  void write_log(const std::string& path) const;
};

struct StageOptions {
  RenderOptions render;
  // Global iteration offset feeding the lr schedule; stages 2 and 3 continue
  // the counter rather than restarting it.
  int64_t global_iter_offset = 0;
  std::string checkpoint_path;  // best-validation params land here (empty: skip)
  // Abort threshold for stage 3: stop early if validation PSNR falls more
  // than 0.5 dB below this value (negative: disabled).
  double regression_floor = -1;
};

// Stage 1: optimize both fields on the canonical-state dataset, no
// projection.
StageReport pretrain(Pipeline& model, const RayDataset& train, const RayDataset& val,
                     const TrainConfig& cfg, const StageOptions& opts);

// Stage 2: freeze the fields, train only the projection module on the 5-view
// deformed-state dataset.
StageReport train_projection(Pipeline& model, const RayDataset& train5, const RayDataset& val,
                             const TrainConfig& cfg, const StageOptions& opts);

// Stage 3: unfreeze everything and fine-tune jointly, keeping the
// best-validation checkpoint.
StageReport finetune(Pipeline& model, const RayDataset& train5, const RayDataset& val,
                     const TrainConfig& cfg, const StageOptions& opts);

// Deterministic full-image render of every camera in `data`; returns mean
// PSNR against the ground-truth images (jitter disabled).
double validation_psnr(const Pipeline& model, const RayDataset& data, const RenderOptions& opts);

ImageBuffer render_image(const Camera& cam, const ProjectionField<float>* proj,
                         const RadianceField<float>& coarse, const RadianceField<float>& fine,
                         const RenderOptions& opts, uint64_t seed);

}  // namespace knerf
