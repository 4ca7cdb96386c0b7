#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "knerf/scene.hpp"
#include "knerf/scene_io.hpp"

using namespace knerf;
namespace fs = std::filesystem;

namespace {

Camera head_on_camera(double distance, int size = 65) {
  Camera cam;
  cam.width = size;
  cam.height = size;
  cam.camera_angle_x = 0.6911112;
  cam.c2w = look_at_c2w({0, 0, distance}, {0, 0, 0}, {0, 1, 0});
  return cam;
}

std::string temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("knerf_scenegen_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("oracle_render: empty region is all white and renders are bitwise deterministic") {
  auto scene = builtin_scene("hinge-box");
  Camera cam;
  cam.width = 32;
  cam.height = 32;
  cam.camera_angle_x = 0.6911112;
  cam.c2w = look_at_c2w({0, 0, 4}, {0, 0, 8}, {0, 1, 0});  // looking away
  auto img = oracle_render(scene, 0, cam);
  for (float v : img.pixels) CHECK(v == 1.0f);

  Camera toward = head_on_camera(4.0, 33);
  auto a = oracle_render(scene, 1, toward);
  auto b = oracle_render(scene, 1, toward);
  CHECK(a.pixels == b.pixels);
}

TEST_CASE("oracle_render: head-on box face shade equals albedo*(0.3+0.7)") {
  ArticulatedScene scene;
  scene.name = "single-box";
  RigidPart box;
  box.id = "box";
  box.kind = PrimitiveKind::box;
  box.half_extents = {0.5, 0.5, 0.5};
  box.albedo = {0.6, 0.4, 0.2};
  box.pose_per_state = {RigidPose{}, RigidPose{}};
  scene.parts = {box};
  scene.validate();

  Camera cam = head_on_camera(4.0, 65);
  auto img = oracle_render(scene, 0, cam);
  const float* center = img.at(32, 32);
  // Center ray hits the +z face head on: lambert = 1.
  CHECK(center[0] == doctest::Approx(0.6 * 1.0).epsilon(1e-4));
  CHECK(center[1] == doctest::Approx(0.4 * 1.0).epsilon(1e-4));
  CHECK(center[2] == doctest::Approx(0.2 * 1.0).epsilon(1e-4));
}

TEST_CASE("oracle_render: sphere silhouette fraction matches the analytic projection") {
  ArticulatedScene scene;
  scene.name = "single-sphere";
  RigidPart ball;
  ball.id = "ball";
  ball.kind = PrimitiveKind::sphere;
  ball.radius = 0.8;
  ball.albedo = {0.5, 0.1, 0.1};
  ball.pose_per_state = {RigidPose{}, RigidPose{}};
  scene.parts = {ball};
  scene.validate();

  const double dist = 4.0;
  Camera cam = head_on_camera(dist, 257);
  auto img = oracle_render(scene, 0, cam);
  int64_t hits = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      if (img.at(x, y)[0] < 0.999f) ++hits;
  double fraction = static_cast<double>(hits) / (cam.width * cam.height);

  // The silhouette cone half-angle is asin(r/D); on the image plane at focal
  // f it projects to a disc of radius f*tan(alpha).
  double alpha = std::asin(ball.radius / dist);
  double rpix = cam.focal() * std::tan(alpha);
  double expect = M_PI * rpix * rpix / (cam.width * cam.height);
  CHECK(std::abs(fraction - expect) / expect <= 0.02);
}

TEST_CASE("gt_correspondence: static, translated, rotated parts") {
  auto scene = builtin_scene("slide-box");
  // Static part maps to itself.
  Vec3 on_anchor{-0.55, 0.1, 0.05};
  auto same = gt_correspondence(scene, 1, 0, on_anchor);
  REQUIRE(same.has_value());
  CHECK((*same - on_anchor).norm() <= 1e-12);

  // Moving part: state1 -> state0 subtracts the slide.
  Vec3 on_slider_s1{0.75, 0.05, -0.1};
  auto mapped = gt_correspondence(scene, 1, 0, on_slider_s1);
  REQUIRE(mapped.has_value());
  CHECK((*mapped - Vec3{0.45, 0.05, -0.1}).norm() <= 1e-12);

  // Free space maps to nothing.
  CHECK(!gt_correspondence(scene, 1, 0, Vec3{0, 2.5, 0}).has_value());

  // Rotation + translation against an independent homogeneous-matrix oracle.
  ArticulatedScene rot;
  rot.name = "rot";
  RigidPart part;
  part.id = "part";
  part.kind = PrimitiveKind::box;
  part.half_extents = {0.4, 0.3, 0.2};
  part.albedo = {0.5, 0.5, 0.5};
  Mat3 r30 = axis_angle_to_matrix({0, 0, 30.0 * M_PI / 180.0});
  RigidPose pose1;
  pose1.rotation = r30;
  pose1.translation = {0.2, -0.1, 0.3};
  part.pose_per_state = {RigidPose{}, pose1};
  rot.parts = {part};
  rot.validate();

  Mat4 a_from = Mat4::from_rt(pose1.rotation, pose1.translation);  // state 1
  Mat4 a_to = Mat4::identity();                                    // state 0
  // Oracle: x0 = A_to * A_from^{-1} * x1 via explicit homogeneous matrices.
  Mat4 inv = Mat4::from_rt(r30.transposed(), (r30.transposed() * pose1.translation) * -1.0);
  Mat4 compose = a_to * inv;

  Pcg32 rng(404);
  for (int i = 0; i < 200; ++i) {
    Vec3 local{rng.uniform_in(-0.4, 0.4), rng.uniform_in(-0.3, 0.3), rng.uniform_in(-0.2, 0.2)};
    Vec3 x1 = pose1.apply(local);
    auto got = gt_correspondence(rot, 1, 0, x1);
    REQUIRE(got.has_value());
    Vec3 want = compose.transform_point(x1);
    CHECK((*got - want).norm() <= 1e-9);
  }
}

TEST_CASE("gt_correspondence round trip is the identity on part interiors") {
  for (const auto& name : builtin_scene_names()) {
    auto scene = builtin_scene(name);
    for (const auto& part : scene.parts) {
      auto pts = sample_surface_points(scene, 0, part.id, 50, 11);
      for (const auto& p : pts) {
        // Pull the surface point slightly inside to stay unambiguous.
        Vec3 inward = (part.pose_per_state[0].apply({0, 0, 0}) - p) * 1e-3;
        Vec3 x = p + inward;
        auto fwd = gt_correspondence(scene, 0, 1, x);
        if (!fwd) continue;
        auto back = gt_correspondence(scene, 1, 0, *fwd);
        REQUIRE(back.has_value());
        CHECK((*back - x).norm() <= 1e-9);
      }
    }
  }
}

TEST_CASE("gt_correspondence rejects points strictly inside two parts") {
  ArticulatedScene bad;
  bad.name = "overlap";
  RigidPart a;
  a.id = "a";
  a.kind = PrimitiveKind::box;
  a.half_extents = {0.5, 0.5, 0.5};
  a.albedo = {0.5, 0.5, 0.5};
  a.pose_per_state = {RigidPose{}, RigidPose{}};
  RigidPart b = a;
  b.id = "b";
  bad.parts = {a, b};  // deliberately coincident; skip validate()
  CHECK_THROWS_AS(gt_correspondence(bad, 0, 1, Vec3{0, 0, 0}), contract_error);
  CHECK_THROWS_AS(bad.validate(), contract_error);
}

TEST_CASE("hinge-box: moving-part surface maps onto the same part's surface") {
  auto scene = builtin_scene("hinge-box");
  const RigidPart* lid = &scene.parts[1];
  REQUIRE(lid->id == "lid");
  auto pts = sample_surface_points(scene, 0, "lid", 300, 21);
  for (const auto& p : pts) {
    auto mapped = gt_correspondence(scene, 0, 1, p);
    REQUIRE(mapped.has_value());
    Vec3 local = lid->pose_per_state[1].invert(*mapped);
    double dx = std::abs(local.x) - lid->half_extents.x;
    double dy = std::abs(local.y) - lid->half_extents.y;
    double dz = std::abs(local.z) - lid->half_extents.z;
    double dist = std::max({dx, dy, dz});
    CHECK(std::abs(dist) <= 1e-9);
  }
}

TEST_CASE("sample_surface_points: implicit equation, sphere symmetry, empty case") {
  auto scene = builtin_scene("grow-sphere");
  CHECK(sample_surface_points(scene, 0, "ball", 0, 3).empty());

  auto pts = sample_surface_points(scene, 1, "ball", 100000, 7);
  const auto& pose = scene.parts[1].pose_per_state[1];
  Vec3 mean{0, 0, 0};
  for (const auto& p : pts) {
    Vec3 local = pose.invert(p);
    CHECK(std::abs(local.norm() - 0.3) <= 1e-6);
    mean = mean + p;
  }
  mean = mean / static_cast<double>(pts.size());
  // Component std of a uniform sphere point is r_world/sqrt(3).
  double r_world = 0.3 * 1.4;
  double sigma = r_world / std::sqrt(3.0) / std::sqrt(static_cast<double>(pts.size()));
  Vec3 center = pose.apply({0, 0, 0});
  CHECK(std::abs(mean.x - center.x) <= 3 * sigma);
  CHECK(std::abs(mean.y - center.y) <= 3 * sigma);
  CHECK(std::abs(mean.z - center.z) <= 3 * sigma);

  auto box_pts = sample_surface_points(scene, 0, "pedestal", 500, 8);
  const auto& ppose = scene.parts[0].pose_per_state[0];
  const Vec3 h = scene.parts[0].half_extents;
  for (const auto& p : box_pts) {
    Vec3 l = ppose.invert(p);
    double m = std::max({std::abs(l.x) - h.x, std::abs(l.y) - h.y, std::abs(l.z) - h.z});
    CHECK(std::abs(m) <= 1e-6);
  }
}

TEST_CASE("emit_dataset: determinism, camera radius, look-at constraint") {
  auto scene = builtin_scene("slide-box");
  std::string dir = temp_dir("emit");
  auto manifest = emit_dataset(scene, 0, 5, 99, dir, Split::train, 24, 24);
  CHECK(manifest.frames.size() == 5u);
  for (const auto& f : manifest.frames) {
    fs::path img = fs::path(dir) / (f.file_path + ".png");
    CHECK(fs::exists(img));
    Vec3 eye = f.transform_matrix.translation();
    CHECK(std::abs(eye.norm() - 4.0) <= 1e-6);
    // Optical axis (-z column) must pass through the origin.
    Mat3 rot = f.transform_matrix.rotation();
    Vec3 forward{-rot.at(0, 2), -rot.at(1, 2), -rot.at(2, 2)};
    Vec3 closest = eye - forward * eye.dot(forward);
    CHECK(closest.norm() <= 1e-6);
    CHECK(eye.z >= 0.0);  // upper hemisphere
  }

  std::string manifest_bytes = file_bytes(dir + "/transforms_train.json");
  std::string img0_bytes = file_bytes(dir + "/train/r_0.png");
  std::string dir2 = temp_dir("emit2");
  emit_dataset(scene, 0, 5, 99, dir2, Split::train, 24, 24);
  CHECK(file_bytes(dir2 + "/transforms_train.json") == manifest_bytes);
  CHECK(file_bytes(dir2 + "/train/r_0.png") == img0_bytes);
}

TEST_CASE("twin-envelope: duplicated part hidden in state 0, revealed in state 1") {
  auto scene = builtin_scene("twin-envelope");
  Pcg32 rng(15);
  int64_t hits0 = 0, hits1 = 0, total = 0;
  for (int view = 0; view < 6; ++view) {
    Camera cam = sample_hemisphere_camera(rng, 48, 48, 0.6911112);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) {
        Ray ray = ray_for_pixel(cam, x, y);
        for (int state : {0, 1}) {
          double best = 1e30;
          int best_part = -1;
          for (size_t p = 0; p < scene.parts.size(); ++p) {
            auto hit = intersect_part(scene.parts[p], state, ray.origin, ray.dir);
            if (hit && hit->t < best) {
              best = hit->t;
              best_part = static_cast<int>(p);
            }
          }
          bool saw_b = best_part >= 0 && scene.parts[static_cast<size_t>(best_part)].id == "envelope_b";
          if (state == 0 && saw_b) ++hits0;
          if (state == 1 && saw_b) ++hits1;
        }
        ++total;
      }
  }
  CHECK(hits0 <= total / 500);  // essentially never visible when stowed
  CHECK(hits1 >= total / 100);  // clearly visible once revealed
}

TEST_CASE("scene file round trip preserves geometry and renders") {
  for (const auto& name : builtin_scene_names()) {
    auto scene = builtin_scene(name);
    std::string path = temp_dir("io_" + name) + "/scene.json";
    save_scene(scene, path);
    auto loaded = load_scene(path);
    CHECK(loaded.parts.size() == scene.parts.size());
    Camera cam = head_on_camera(4.0, 33);
    for (int state : {0, 1}) {
      auto a = oracle_render(scene, state, cam);
      auto b = oracle_render(loaded, state, cam);
      for (size_t i = 0; i < a.pixels.size(); ++i)
        CHECK(std::abs(a.pixels[i] - b.pixels[i]) <= 1e-6f);
    }
  }
  CHECK_THROWS_AS(builtin_scene("no-such-scene"), config_error);
  CHECK_THROWS_AS(resolve_scene("/nonexistent/path.json"), config_error);
}
