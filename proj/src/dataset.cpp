#include "knerf/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace knerf {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw config_error("unknown split: " + name);
}

void save_dataset(const DatasetManifest& manifest, const std::vector<ImageBuffer>& images,
                  const std::string& dir, Split split) {
  KNERF_REQUIRE(manifest.frames.size() == images.size(),
                "save_dataset: frame/image count mismatch");
  std::error_code ec;
  fs::create_directories(fs::path(dir) / split_name(split), ec);
  if (ec) throw io_error("cannot create dataset directory: " + dir);

  ordered_json root;
  root["camera_angle_x"] = manifest.camera_angle_x;
  root["frames"] = ordered_json::array();
  for (size_t i = 0; i < manifest.frames.size(); ++i) {
    const auto& f = manifest.frames[i];
    ordered_json frame;
    frame["file_path"] = f.file_path;
    ordered_json mat = ordered_json::array();
    for (int r = 0; r < 4; ++r) {
      ordered_json row = ordered_json::array();
      for (int c = 0; c < 4; ++c) row.push_back(f.transform_matrix.at(r, c));
      mat.push_back(row);
    }
    frame["transform_matrix"] = mat;
    root["frames"].push_back(frame);

    // file_path is extension-free by Blender convention.
    fs::path img_path = fs::path(dir) / (f.file_path + ".png");
    write_png_rgba8(img_path.string(), images[i]);
  }

  std::ofstream out(fs::path(dir) / ("transforms_" + std::string(split_name(split)) + ".json"));
  if (!out) throw io_error("cannot write manifest in " + dir);
  out << root.dump(4) << "\n";
}

std::pair<DatasetManifest, std::vector<ImageBuffer>> load_dataset(const std::string& dir,
                                                                  Split split,
                                                                  bool white_background) {
  fs::path manifest_path = fs::path(dir) / ("transforms_" + std::string(split_name(split)) + ".json");
  std::ifstream in(manifest_path);
  if (!in) throw io_error("missing manifest: " + manifest_path.string());

  ordered_json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw io_error("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!root.contains("camera_angle_x") || !root.contains("frames"))
    throw io_error("manifest missing camera_angle_x or frames: " + manifest_path.string());

  DatasetManifest manifest;
  manifest.camera_angle_x = root["camera_angle_x"].get<double>();
  std::vector<ImageBuffer> images;
  for (const auto& frame : root["frames"]) {
    DatasetFrame f;
    f.file_path = frame.at("file_path").get<std::string>();
    const auto& mat = frame.at("transform_matrix");
    if (mat.size() != 4) throw io_error("transform_matrix must be 4x4");
    for (int r = 0; r < 4; ++r) {
      if (mat[static_cast<size_t>(r)].size() != 4) throw io_error("transform_matrix must be 4x4");
      for (int c = 0; c < 4; ++c)
        f.transform_matrix.at(r, c) = mat[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
    }
    if (f.transform_matrix.rotation().orthonormality_error() > 1e-4)
      throw io_error("frame rotation not orthonormal: " + f.file_path);

    fs::path img_path = fs::path(dir) / f.file_path;
    if (!fs::exists(img_path)) img_path = fs::path(dir) / (f.file_path + ".png");
    if (!fs::exists(img_path)) throw io_error("missing image: " + img_path.string());
    images.push_back(read_png(img_path.string(), white_background));
    manifest.frames.push_back(std::move(f));
  }

  for (size_t i = 1; i < images.size(); ++i)
    if (images[i].width != images[0].width || images[i].height != images[0].height)
      throw io_error("frame dimensions disagree within split in " + dir);

  return {std::move(manifest), std::move(images)};
}

}  // namespace knerf
