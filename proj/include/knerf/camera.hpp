#pragma once

#include <cmath>
#include <vector>

#include "knerf/common.hpp"
#include "knerf/geometry.hpp"

namespace knerf {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
  double t_near = 2.0;
  double t_far = 6.0;
};

// Blender-convention pinhole camera: camera space looks along -z, +x right,
// +y up; c2w maps camera space to world space.
struct Camera {
  int width = 0;
  int height = 0;
  double camera_angle_x = 0;  // horizontal field of view, radians
  Mat4 c2w;
  double t_near = 2.0;
  double t_far = 6.0;

  double focal() const { return 0.5 * width / std::tan(0.5 * camera_angle_x); }

  void validate() const {
    KNERF_REQUIRE(width > 0 && height > 0, "Camera: non-positive image size");
    KNERF_REQUIRE(camera_angle_x > 0 && camera_angle_x < 3.14159, "Camera: bad field of view");
    KNERF_REQUIRE(focal() > 0, "Camera: non-positive focal length");
    KNERF_REQUIRE(c2w.rotation().orthonormality_error() <= 1e-5,
                  "Camera: c2w rotation not orthonormal");
    KNERF_REQUIRE(t_near < t_far, "Camera: t_near must be < t_far");
  }
};

// Ray through the center of pixel (i, j); i = column, j = row.
inline Ray ray_for_pixel(const Camera& cam, int i, int j) {
  double f = cam.focal();
  Vec3 dir_cam{(i + 0.5 - cam.width * 0.5) / f, -(j + 0.5 - cam.height * 0.5) / f, -1.0};
  Vec3 dir_world = (cam.c2w.rotation() * dir_cam).normalized();
  return Ray{cam.c2w.translation(), dir_world, cam.t_near, cam.t_far};
}

// One ray per pixel, row-major over (j, i).
inline std::vector<Ray> camera_rays(const Camera& cam) {
  cam.validate();
  std::vector<Ray> rays;
  rays.reserve(static_cast<size_t>(cam.width) * cam.height);
  for (int j = 0; j < cam.height; ++j)
    for (int i = 0; i < cam.width; ++i) rays.push_back(ray_for_pixel(cam, i, j));
  return rays;
}

}  // namespace knerf
