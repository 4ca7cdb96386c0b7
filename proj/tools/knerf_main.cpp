#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "knerf/dataset.hpp"
#include "knerf/metrics.hpp"
#include "knerf/run_config.hpp"
#include "knerf/scene_io.hpp"
#include "knerf/trainer.hpp"

namespace fs = std::filesystem;
using namespace knerf;

namespace {

enum ExitCode {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kMissingPrerequisite = 4,
  kBadCheckpoint = 5,
};

struct CliState {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> views;
  std::optional<int> iters;
  int threads = 0;

  RunConfig load() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (seed) cfg.train.seed = *seed;
    if (out) cfg.out_dir = *out;
    if (views) cfg.views_state0 = *views;
    return cfg;
  }
};

void add_common_flags(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "Run configuration file (JSON)");
  cmd->add_option("--seed", state.seed, "Override the config seed");
  cmd->add_option("--out", state.out, "Override the output directory");
  cmd->add_option("--threads", state.threads, "Worker threads (default: KNERF_THREADS or all)");
}

FieldConfig field_config_from(const RunConfig& cfg) {
  FieldConfig fc;
  fc.width = cfg.field_width;
  fc.scene_bound = cfg.scene_bound;
  return fc;
}

ProjectionConfig proj_config_from(const RunConfig& cfg) {
  ProjectionConfig pc;
  pc.hidden = cfg.proj_hidden;
  pc.scene_bound = cfg.scene_bound;
  return pc;
}

std::string stage_checkpoint(const RunConfig& cfg, const std::string& stage) {
  return cfg.out_dir + "/" + stage + ".knc";
}

Pipeline load_stage_checkpoint(const RunConfig& cfg, const std::string& stage,
                               const std::string& needed_by) {
  std::string path = stage_checkpoint(cfg, stage);
  if (!fs::exists(path))
    throw prerequisite_error(needed_by + " requires the " + stage + " checkpoint at " + path +
                             "; run `knerf " + stage + "` first");
  return Pipeline::from_checkpoint(load_checkpoint(path));
}

int run_gen_scene(const CliState& state) {
  RunConfig cfg = state.load();
  auto scene = resolve_scene(cfg.scene);
  fs::create_directories(cfg.out_dir);
  save_scene(scene, cfg.out_dir + "/scene.json");

  struct Row {
    std::string dir;
    Split split;
    int state;
    int views;
  };
  std::vector<Row> rows = {
      {cfg.state0_dir(), Split::train, 0, cfg.views_state0},
      {cfg.state0_dir(), Split::val, 0, cfg.views_val},
      {cfg.state0_dir(), Split::test, 0, cfg.views_test},
      {cfg.state1_dir(), Split::train, 1, cfg.views_state1},
      {cfg.state1_dir(), Split::val, 1, cfg.views_val},
      {cfg.state1_dir(), Split::test, 1, cfg.views_test},
  };
  std::printf("directory\tsplit\tstate\tviews\n");
  for (const auto& row : rows) {
    emit_dataset(scene, row.state, row.views,
                 derive_seed(cfg.train.seed, 0xD5, static_cast<uint64_t>(row.state),
                             static_cast<uint64_t>(row.split)),
                 row.dir, row.split, cfg.image_size, cfg.image_size);
    std::printf("%s\t%s\t%d\t%d\n", row.dir.c_str(), split_name(row.split), row.state, row.views);
  }
  return kOk;
}

int run_pretrain(const CliState& state) {
  RunConfig cfg = state.load();
  if (state.iters) cfg.train.iters_pretrain = *state.iters;
  fs::create_directories(cfg.out_dir);
  auto train = RayDataset::load(cfg.state0_dir(), Split::train);
  auto val = RayDataset::load(cfg.state0_dir(), Split::val);

  Pipeline model = Pipeline::init(field_config_from(cfg), cfg.train.seed);
  StageOptions opts;
  opts.render = cfg.render;
  opts.checkpoint_path = stage_checkpoint(cfg, "pretrain");
  StageReport report = pretrain(model, train, val, cfg.train, opts);
  report.write_log(cfg.out_dir + "/train.log");
  std::printf("pretrain final_val_psnr=%.4f best_iter=%lld\n", report.final_val_psnr,
              static_cast<long long>(report.best_iter));
  return kOk;
}

int run_project(const CliState& state) {
  RunConfig cfg = state.load();
  if (state.iters) cfg.train.iters_projection = *state.iters;
  Pipeline model = load_stage_checkpoint(cfg, "pretrain", "project");
  auto train5 = RayDataset::load(cfg.state1_dir(), Split::train);
  auto val = RayDataset::load(cfg.state1_dir(), Split::val);

  model.add_identity_projection(proj_config_from(cfg), cfg.train.seed);
  StageOptions opts;
  opts.render = cfg.render;
  opts.global_iter_offset = cfg.train.iters_pretrain;
  opts.checkpoint_path = stage_checkpoint(cfg, "project");
  StageReport report = train_projection(model, train5, val, cfg.train, opts);
  report.write_log(cfg.out_dir + "/train.log");
  std::printf("project final_val_psnr=%.4f best_iter=%lld\n", report.final_val_psnr,
              static_cast<long long>(report.best_iter));
  return kOk;
}

int run_finetune(const CliState& state) {
  RunConfig cfg = state.load();
  if (state.iters) cfg.train.iters_finetune = *state.iters;
  Pipeline model = load_stage_checkpoint(cfg, "project", "finetune");
  auto train5 = RayDataset::load(cfg.state1_dir(), Split::train);
  auto val = RayDataset::load(cfg.state1_dir(), Split::val);

  StageOptions opts;
  opts.render = cfg.render;
  opts.global_iter_offset =
      static_cast<int64_t>(cfg.train.iters_pretrain) + cfg.train.iters_projection;
  opts.checkpoint_path = stage_checkpoint(cfg, "finetune");
  // Stage-2 validation quality is the regression floor for early stopping.
  auto stage2 = load_checkpoint(stage_checkpoint(cfg, "project"));
  if (auto it = stage2.meta.find("best_val_psnr"); it != stage2.meta.end())
    opts.regression_floor = std::stod(it->second);
  StageReport report = finetune(model, train5, val, cfg.train, opts);
  report.write_log(cfg.out_dir + "/train.log");
  std::printf("finetune final_val_psnr=%.4f best_iter=%lld\n", report.final_val_psnr,
              static_cast<long long>(report.best_iter));
  return kOk;
}

int run_render(const CliState& state, const std::string& checkpoint, int orbit, int size) {
  RunConfig cfg = state.load();
  Pipeline model = Pipeline::from_checkpoint(load_checkpoint(checkpoint));
  fs::create_directories(cfg.out_dir);
  int res = size > 0 ? size : cfg.image_size;
  for (int k = 0; k < orbit; ++k) {
    double az = 2.0 * 3.14159265358979323846 * k / orbit;
    double el = 30.0 * 3.14159265358979323846 / 180.0;
    Vec3 eye{4.0 * std::cos(az) * std::cos(el), 4.0 * std::sin(az) * std::cos(el),
             4.0 * std::sin(el)};
    Camera cam;
    cam.width = res;
    cam.height = res;
    cam.camera_angle_x = 0.6911112;
    cam.c2w = look_at_c2w(eye, {0, 0, 0});
    RenderOptions opts = cfg.render;
    opts.jitter = false;
    ImageBuffer img = render_image(cam, model.proj ? &*model.proj : nullptr, model.coarse,
                                   model.fine, opts, cfg.train.seed);
    char name[64];
    std::snprintf(name, sizeof(name), "render_%03d.png", k);
    write_png_rgba8(cfg.out_dir + "/" + name, img);
    std::printf("%s\n", name);
  }
  return kOk;
}

int run_evaluate(const CliState& state, const std::string& checkpoint, const std::string& data_dir,
                 const std::string& split_name_str, const std::string& renders_dir) {
  RunConfig cfg = state.load();
  Split split = split_from_name(split_name_str);
  auto [manifest, gt_images] = load_dataset(data_dir, split);
  if (gt_images.empty()) throw config_error("evaluate: empty " + split_name_str + " split");

  std::vector<std::string> names;
  for (const auto& frame : manifest.frames)
    names.push_back(fs::path(frame.file_path).filename().string());

  std::vector<ImageBuffer> rendered;
  if (!renders_dir.empty()) {
    // Compare pre-rendered images instead of rendering the checkpoint.
    for (const auto& name : names) {
      fs::path p = fs::path(renders_dir) / (name + ".png");
      if (!fs::exists(p)) throw io_error("evaluate: missing render " + p.string());
      rendered.push_back(read_png(p.string()));
    }
  } else {
    Pipeline model = Pipeline::from_checkpoint(load_checkpoint(checkpoint));
    RenderOptions opts = cfg.render;
    opts.jitter = false;
    for (size_t i = 0; i < manifest.frames.size(); ++i) {
      Camera cam;
      cam.width = gt_images[i].width;
      cam.height = gt_images[i].height;
      cam.camera_angle_x = manifest.camera_angle_x;
      cam.c2w = manifest.frames[i].transform_matrix;
      rendered.push_back(render_image(cam, model.proj ? &*model.proj : nullptr, model.coarse,
                                      model.fine, opts, cfg.train.seed));
    }
  }

  auto report = MetricReport::from_pairs(names, rendered, gt_images);
  std::string table = report.to_table();
  std::fputs(table.c_str(), stdout);
  fs::create_directories(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/metrics.txt");
  out << table;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot articulated-object view synthesis: pretrain a radiance field on one "
               "state, then reconstruct a deformed state from 5 images via a projection module"};
  app.require_subcommand(1);

  CliState state;
  std::string checkpoint, data_dir, split = "test", renders_dir;
  int orbit = 4, size = 0;

  auto* gen = app.add_subcommand("gen-scene", "Generate datasets for both states of a scene");
  add_common_flags(gen, state);
  gen->add_option("--views", state.views, "Training views for state 0");

  auto* pre = app.add_subcommand("pretrain", "Stage 1: train the fields on state-0 images");
  add_common_flags(pre, state);
  pre->add_option("--iters", state.iters, "Override iteration count");

  auto* proj = app.add_subcommand("project", "Stage 2: train the projection on 5 state-1 images");
  add_common_flags(proj, state);
  proj->add_option("--iters", state.iters, "Override iteration count");

  auto* fine = app.add_subcommand("finetune", "Stage 3: unfreeze everything and fine-tune");
  add_common_flags(fine, state);
  fine->add_option("--iters", state.iters, "Override iteration count");

  auto* pipe = app.add_subcommand("pipeline", "Run pretrain, project and finetune in sequence");
  add_common_flags(pipe, state);

  auto* ren = app.add_subcommand("render", "Render an orbit of poses from a checkpoint");
  add_common_flags(ren, state);
  ren->add_option("--checkpoint", checkpoint, "Checkpoint to render")->required();
  ren->add_option("--orbit", orbit, "Number of orbit poses");
  ren->add_option("--size", size, "Image size (default: config image_size)");

  auto* eval = app.add_subcommand("evaluate", "Render a test split and report MSE/PSNR/SSIM");
  add_common_flags(eval, state);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
  eval->add_option("--data", data_dir, "Dataset directory")->required();
  eval->add_option("--split", split, "Dataset split (train|val|test)");
  eval->add_option("--renders", renders_dir,
                   "Compare existing PNGs from this directory instead of rendering");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  int threads = state.threads;
  if (threads <= 0)
    if (const char* env = std::getenv("KNERF_THREADS")) threads = std::atoi(env);
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (gen->parsed()) return run_gen_scene(state);
    if (pre->parsed()) return run_pretrain(state);
    if (proj->parsed()) return run_project(state);
    if (fine->parsed()) return run_finetune(state);
    if (pipe->parsed()) {
      int rc = run_pretrain(state);
      if (rc == kOk) rc = run_project(state);
      if (rc == kOk) rc = run_finetune(state);
      return rc;
    }
    if (ren->parsed()) return run_render(state, checkpoint, orbit, size);
    if (eval->parsed()) {
      if (renders_dir.empty() && checkpoint.empty())
        throw config_error("evaluate: provide --checkpoint or --renders");
      return run_evaluate(state, checkpoint, data_dir, split, renders_dir);
    }
  } catch (const prerequisite_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kMissingPrerequisite;
  } catch (const checkpoint_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadCheckpoint;
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoError;
  } catch (const contract_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return kConfigError;
}
