#include "knerf/run_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "knerf/common.hpp"

namespace knerf {

using nlohmann::ordered_json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "scene",          "out_dir",        "data_state0",      "data_state1",
      "views_state0",   "views_state1",   "views_val",        "views_test",
      "image_size",     "field_width",    "proj_hidden",      "scene_bound",
      "batch_rays",     "iters_pretrain", "iters_projection", "iters_finetune",
      "base_lr",        "beta1",          "beta2",            "adam_eps",
      "decay_denominator", "seed",        "eval_every",       "n_coarse",
      "n_fine",         "white_background", "jitter"};
  return keys;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path);
  ordered_json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw config_error("malformed config " + path + ": " + e.what());
  }
  if (!root.is_object()) throw config_error("config must be a JSON object: " + path);

  for (auto it = root.begin(); it != root.end(); ++it)
    if (!known_keys().count(it.key()))
      throw config_error("unknown config key '" + it.key() + "' in " + path);

  RunConfig cfg;
  try {
    cfg.scene = root.value("scene", cfg.scene);
    cfg.out_dir = root.value("out_dir", cfg.out_dir);
    cfg.data_state0 = root.value("data_state0", cfg.data_state0);
    cfg.data_state1 = root.value("data_state1", cfg.data_state1);
    cfg.views_state0 = root.value("views_state0", cfg.views_state0);
    cfg.views_state1 = root.value("views_state1", cfg.views_state1);
    cfg.views_val = root.value("views_val", cfg.views_val);
    cfg.views_test = root.value("views_test", cfg.views_test);
    cfg.image_size = root.value("image_size", cfg.image_size);
    cfg.field_width = root.value("field_width", cfg.field_width);
    cfg.proj_hidden = root.value("proj_hidden", cfg.proj_hidden);
    cfg.scene_bound = root.value("scene_bound", cfg.scene_bound);
    cfg.train.batch_rays = root.value("batch_rays", cfg.train.batch_rays);
    cfg.train.iters_pretrain = root.value("iters_pretrain", cfg.train.iters_pretrain);
    cfg.train.iters_projection = root.value("iters_projection", cfg.train.iters_projection);
    cfg.train.iters_finetune = root.value("iters_finetune", cfg.train.iters_finetune);
    cfg.train.base_lr = root.value("base_lr", cfg.train.base_lr);
    cfg.train.beta1 = root.value("beta1", cfg.train.beta1);
    cfg.train.beta2 = root.value("beta2", cfg.train.beta2);
    cfg.train.adam_eps = root.value("adam_eps", cfg.train.adam_eps);
    cfg.train.decay_denominator = root.value("decay_denominator", cfg.train.decay_denominator);
    cfg.train.seed = root.value("seed", cfg.train.seed);
    cfg.train.eval_every = root.value("eval_every", cfg.train.eval_every);
    cfg.render.n_coarse = root.value("n_coarse", cfg.render.n_coarse);
    cfg.render.n_fine = root.value("n_fine", cfg.render.n_fine);
    cfg.render.white_background = root.value("white_background", cfg.render.white_background);
    cfg.render.jitter = root.value("jitter", cfg.render.jitter);
  } catch (const std::exception& e) {
    throw config_error("bad value in config " + path + ": " + e.what());
  }
  return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  ordered_json root;
  root["scene"] = cfg.scene;
  root["out_dir"] = cfg.out_dir;
  if (!cfg.data_state0.empty()) root["data_state0"] = cfg.data_state0;
  if (!cfg.data_state1.empty()) root["data_state1"] = cfg.data_state1;
  root["views_state0"] = cfg.views_state0;
  root["views_state1"] = cfg.views_state1;
  root["views_val"] = cfg.views_val;
  root["views_test"] = cfg.views_test;
  root["image_size"] = cfg.image_size;
  root["field_width"] = cfg.field_width;
  root["proj_hidden"] = cfg.proj_hidden;
  root["scene_bound"] = cfg.scene_bound;
  root["batch_rays"] = cfg.train.batch_rays;
  root["iters_pretrain"] = cfg.train.iters_pretrain;
  root["iters_projection"] = cfg.train.iters_projection;
  root["iters_finetune"] = cfg.train.iters_finetune;
  root["base_lr"] = cfg.train.base_lr;
  root["beta1"] = cfg.train.beta1;
  root["beta2"] = cfg.train.beta2;
  root["adam_eps"] = cfg.train.adam_eps;
  root["decay_denominator"] = cfg.train.decay_denominator;
  root["seed"] = cfg.train.seed;
  root["eval_every"] = cfg.train.eval_every;
  root["n_coarse"] = cfg.render.n_coarse;
  root["n_fine"] = cfg.render.n_fine;
  root["white_background"] = cfg.render.white_background;
  root["jitter"] = cfg.render.jitter;
  std::ofstream out(path);
  if (!out) throw io_error("cannot write config: " + path);
  out << root.dump(4) << "\n";
}

}  // namespace knerf
