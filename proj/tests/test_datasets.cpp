#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <png.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "knerf/checkpoint.hpp"
#include "knerf/dataset.hpp"
#include "knerf/rng.hpp"

using namespace knerf;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("knerf_datasets_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

// Test-only RGBA writer with a controllable alpha channel.
void write_rgba_with_alpha(const std::string& path, int w, int h,
                           const std::vector<std::array<uint8_t, 4>>& px) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(static_cast<size_t>(w) * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 4; ++c)
        row[static_cast<size_t>(x) * 4 + static_cast<size_t>(c)] =
            px[static_cast<size_t>(y) * w + x][static_cast<size_t>(c)];
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

ImageBuffer noise_image(int w, int h, uint64_t seed) {
  ImageBuffer img(w, h);
  Pcg32 rng(seed);
  for (auto& v : img.pixels) v = rng.uniform_f();
  return img;
}

DatasetManifest tiny_manifest(int n_frames, const char* split) {
  DatasetManifest m;
  m.camera_angle_x = 0.6911112;
  for (int i = 0; i < n_frames; ++i) {
    DatasetFrame f;
    f.file_path = std::string("./") + split + "/r_" + std::to_string(i);
    f.transform_matrix = Mat4::identity();
    f.transform_matrix.at(2, 3) = 4.0;
    m.frames.push_back(f);
  }
  return m;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("alpha compositing over white on load") {
  std::string dir = temp_dir("alpha");
  std::vector<std::array<uint8_t, 4>> px = {
      {0, 0, 0, 0},        // fully transparent -> white
      {255, 0, 0, 255},    // opaque red
      {0, 255, 0, 127},    // half green over white
      {255, 255, 255, 255}};
  write_rgba_with_alpha(dir + "/px.png", 2, 2, px);
  auto img = read_png(dir + "/px.png", /*composite_over_white=*/true);
  CHECK(img.at(0, 0)[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(img.at(0, 0)[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(img.at(0, 0)[2] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(img.at(1, 0)[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(img.at(1, 0)[1] == doctest::Approx(0.0).epsilon(1e-6));
  float a = 127.0f / 255.0f;
  CHECK(img.at(0, 1)[0] == doctest::Approx(1.0f - a).epsilon(1e-5));
  CHECK(img.at(0, 1)[1] == doctest::Approx(1.0f * a + (1.0f - a)).epsilon(1e-5));
}

TEST_CASE("dataset save/load round trip within 8-bit quantization") {
  std::string dir = temp_dir("roundtrip");
  auto manifest = tiny_manifest(3, "train");
  std::vector<ImageBuffer> images = {noise_image(16, 12, 1), noise_image(16, 12, 2),
                                     noise_image(16, 12, 3)};
  save_dataset(manifest, images, dir, Split::train);
  auto [loaded, imgs] = load_dataset(dir, Split::train);
  CHECK(loaded.camera_angle_x == manifest.camera_angle_x);
  REQUIRE(loaded.frames.size() == 3u);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(loaded.frames[i].file_path == manifest.frames[i].file_path);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        CHECK(loaded.frames[i].transform_matrix.at(r, c) ==
              manifest.frames[i].transform_matrix.at(r, c));
    REQUIRE(imgs[i].pixels.size() == images[i].pixels.size());
    for (size_t k = 0; k < imgs[i].pixels.size(); ++k)
      CHECK(std::abs(imgs[i].pixels[k] - images[i].pixels[k]) <= 1.0f / 255.0f);
  }

  // Byte-identical manifests on re-save.
  std::string bytes = file_bytes(dir + "/transforms_train.json");
  std::string dir2 = temp_dir("roundtrip2");
  save_dataset(manifest, images, dir2, Split::train);
  CHECK(file_bytes(dir2 + "/transforms_train.json") == bytes);
}

TEST_CASE("manifest grammar: exact field names, consumable by a Blender-convention reader") {
  std::string dir = temp_dir("grammar");
  auto manifest = tiny_manifest(2, "test");
  std::vector<ImageBuffer> images = {noise_image(8, 8, 4), noise_image(8, 8, 5)};
  save_dataset(manifest, images, dir, Split::test);

  std::string raw = file_bytes(dir + "/transforms_test.json");
  for (const char* field : {"camera_angle_x", "frames", "file_path", "transform_matrix"})
    CHECK(raw.find(std::string("\"") + field + "\"") != std::string::npos);

  // Independent reader following the published convention: parse the JSON
  // directly, append ".png" to file_path, build the focal from the angle.
  auto root = nlohmann::json::parse(raw);
  double angle = root["camera_angle_x"].get<double>();
  double focal = 0.5 * 8 / std::tan(0.5 * angle);
  CHECK(focal > 0);
  REQUIRE(root["frames"].is_array());
  for (const auto& frame : root["frames"]) {
    fs::path img = fs::path(dir) / (frame["file_path"].get<std::string>() + ".png");
    CHECK(fs::exists(img));
    CHECK(frame["transform_matrix"].size() == 4u);
    for (const auto& row : frame["transform_matrix"]) CHECK(row.size() == 4u);
  }
}

TEST_CASE("load errors: missing manifest, missing image, inconsistent dimensions") {
  std::string dir = temp_dir("errors");
  CHECK_THROWS_AS(load_dataset(dir, Split::train), io_error);

  // Manifest referencing a missing image.
  {
    std::ofstream out(dir + "/transforms_train.json");
    out << R"({"camera_angle_x": 0.69, "frames": [{"file_path": "./train/r_0",
           "transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,4],[0,0,0,1]]}]})";
  }
  CHECK_THROWS_AS(load_dataset(dir, Split::train), io_error);

  // Frames with disagreeing dimensions.
  std::string dir2 = temp_dir("dims");
  auto manifest = tiny_manifest(2, "train");
  fs::create_directories(dir2 + "/train");
  {
    std::ofstream out(dir2 + "/transforms_train.json");
    nlohmann::ordered_json root;
    root["camera_angle_x"] = 0.69;
    root["frames"] = nlohmann::ordered_json::array();
    for (int i = 0; i < 2; ++i) {
      nlohmann::ordered_json f;
      f["file_path"] = "./train/r_" + std::to_string(i);
      f["transform_matrix"] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 4}, {0, 0, 0, 1}};
      root["frames"].push_back(f);
    }
    out << root.dump(2);
  }
  write_png_rgba8(dir2 + "/train/r_0.png", noise_image(8, 8, 1));
  write_png_rgba8(dir2 + "/train/r_1.png", noise_image(16, 8, 2));
  CHECK_THROWS_AS(load_dataset(dir2, Split::train), io_error);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Checkpoint ckpt;
  ckpt.meta["stage"] = "pretrain";
  ckpt.meta["width"] = "64";
  Pcg32 rng(9);
  ckpt.tensors.add("coarse.trunk0.w", {8, 5});
  ckpt.tensors.add("coarse.trunk0.b", {8});
  for (auto& t : ckpt.tensors.tensors)
    for (auto& v : t.data) v = rng.uniform_f() * 2.0f - 1.0f;

  std::string path = temp_dir("ckpt") + "/model.knc";
  save_checkpoint(ckpt, path);
  auto loaded = load_checkpoint(path);
  CHECK(loaded.meta.at("stage") == "pretrain");
  CHECK(loaded.meta.at("width") == "64");
  REQUIRE(loaded.tensors.tensors.size() == 2u);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(loaded.tensors.tensors[i].name == ckpt.tensors.tensors[i].name);
    CHECK(loaded.tensors.tensors[i].shape == ckpt.tensors.tensors[i].shape);
    CHECK(loaded.tensors.tensors[i].data == ckpt.tensors.tensors[i].data);
  }
}

TEST_CASE("checkpoint errors: truncation names the tensor, version rejected, trailing bytes") {
  Checkpoint ckpt;
  ckpt.tensors.add("fine.sigma.w", {4, 4});
  std::string dir = temp_dir("ckpt_err");
  std::string path = dir + "/model.knc";
  save_checkpoint(ckpt, path);

  // Truncate by 4 bytes.
  std::string bytes = file_bytes(path);
  {
    std::ofstream out(dir + "/trunc.knc", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 4));
  }
  try {
    load_checkpoint(dir + "/trunc.knc");
    CHECK(false);
  } catch (const checkpoint_error& e) {
    CHECK(std::string(e.what()).find("fine.sigma.w") != std::string::npos);
  }

  // Unknown version.
  {
    std::string v2 = bytes;
    v2.replace(v2.find("knerf-checkpoint 1"), 18, "knerf-checkpoint 9");
    std::ofstream out(dir + "/badver.knc", std::ios::binary);
    out.write(v2.data(), static_cast<std::streamsize>(v2.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir + "/badver.knc"), checkpoint_error);

  // Payload longer than the header declares.
  {
    std::ofstream out(dir + "/long.knc", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    float extra = 1.0f;
    out.write(reinterpret_cast<const char*>(&extra), 4);
  }
  CHECK_THROWS_AS(load_checkpoint(dir + "/long.knc"), checkpoint_error);

  CHECK_THROWS_AS(load_checkpoint(dir + "/missing.knc"), checkpoint_error);
}
