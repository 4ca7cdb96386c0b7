#pragma once

#include <string>

#include "knerf/adam.hpp"
#include "knerf/render.hpp"

namespace knerf {

// Declarative run configuration shared by every CLI subcommand. JSON file
// (same grammar family as the dataset manifests) with flag overrides; any
// unknown key is rejected.
struct RunConfig {
  std::string scene = "hinge-box";     // builtin name or scene file path
  std::string out_dir = "out";
  std::string data_state0;             // dataset directory, canonical state
  std::string data_state1;             // dataset directory, deformed state
  int views_state0 = 60;
  int views_state1 = 5;
  int views_val = 8;
  int views_test = 8;
  int image_size = 64;
  int field_width = 128;
  int proj_hidden = 128;
  double scene_bound = 3.0;
  TrainConfig train;
  RenderOptions render;

  // Paths default to <out_dir>/state{0,1} when unset.
  std::string state0_dir() const { return data_state0.empty() ? out_dir + "/state0" : data_state0; }
  std::string state1_dir() const { return data_state1.empty() ? out_dir + "/state1" : data_state1; }
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace knerf
