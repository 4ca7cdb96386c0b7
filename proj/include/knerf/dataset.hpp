#pragma once

#include <string>
#include <utility>
#include <vector>

#include "knerf/geometry.hpp"
#include "knerf/image.hpp"

namespace knerf {

// Blender-format camera manifest: transforms_<split>.json with fields
// "camera_angle_x" and "frames" of {"file_path", "transform_matrix"}.
// file_path is stored without extension, as the original loaders expect.
struct DatasetFrame {
  std::string file_path;
  Mat4 transform_matrix;
};

struct DatasetManifest {
  double camera_angle_x = 0;
  std::vector<DatasetFrame> frames;
};

enum class Split { train, val, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

// Writes transforms_<split>.json plus one RGBA8 PNG per frame under
// dir/<split>/. Manifest bytes are deterministic for identical inputs.
void save_dataset(const DatasetManifest& manifest, const std::vector<ImageBuffer>& images,
                  const std::string& dir, Split split);

// Loads manifest + images; RGBA is composited over white when
// white_background is set. All frames must agree on image dimensions and
// every rotation block must be orthonormal within 1e-4.
std::pair<DatasetManifest, std::vector<ImageBuffer>> load_dataset(const std::string& dir,
                                                                  Split split,
                                                                  bool white_background = true);

}  // namespace knerf
