#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "knerf/camera.hpp"
#include "knerf/dataset.hpp"
#include "knerf/geometry.hpp"
#include "knerf/image.hpp"
#include "knerf/rng.hpp"

namespace knerf {

// Rigid pose y = R * s * u + t acting on local coordinates u.
struct RigidPose {
  Mat3 rotation;
  Vec3 translation;
  double scale = 1.0;

  Vec3 apply(const Vec3& local) const { return rotation * (local * scale) + translation; }
  Vec3 invert(const Vec3& world) const {
    return (rotation.transposed() * (world - translation)) / scale;
  }

  void validate() const {
    KNERF_REQUIRE(scale > 0, "RigidPose: scale must be positive");
    KNERF_REQUIRE(rotation.orthonormality_error() <= 1e-6, "RigidPose: rotation not orthonormal");
    KNERF_REQUIRE(std::abs(rotation.det() - 1.0) <= 1e-6, "RigidPose: rotation determinant != +1");
  }
};

enum class PrimitiveKind { box, sphere };

struct RigidPart {
  std::string id;
  PrimitiveKind kind = PrimitiveKind::box;
  Vec3 half_extents{0.5, 0.5, 0.5};  // box
  double radius = 0.5;               // sphere
  std::array<double, 3> albedo{0.8, 0.8, 0.8};
  // Optional per-face albedo for boxes, order +x,-x,+y,-y,+z,-z.
  std::vector<std::array<double, 3>> face_albedo;
  std::vector<RigidPose> pose_per_state;
};

struct SurfaceHit {
  double t = 0;
  Vec3 normal;  // outward, world space, unit
  std::array<double, 3> albedo;
};

struct ArticulatedScene {
  std::string name;
  std::vector<RigidPart> parts;
  int n_states = 2;
  double light = 0.7;  // headlight coefficient: shade = albedo*((1-light)+light*lambert)

  void validate() const;
  // Axis-aligned bounds over all parts and states.
  void bounds(Vec3* lo, Vec3* hi) const;
  double bounding_diagonal() const;
};

// Nearest analytic ray-primitive intersection for one part in one state.
std::optional<SurfaceHit> intersect_part(const RigidPart& part, int state, const Vec3& origin,
                                         const Vec3& dir);

// Point-membership test: inside the solid, or within tol of its surface.
bool part_contains(const RigidPart& part, int state, const Vec3& x, double tol = 1e-6);
// Strict interior test (no surface tolerance).
bool part_contains_strict(const RigidPart& part, int state, const Vec3& x);

// Deterministic analytic renderer: nearest hit across parts, headlight
// Lambert shading, white miss. The ground-truth image source.
ImageBuffer oracle_render(const ArticulatedScene& scene, int state, const Camera& cam);

// Maps a point on/in a part from one state's world frame to another's.
// Free-space points map to nothing; a point strictly inside two parts is an
// invariant violation. On shared surfaces the lowest part index wins.
std::optional<Vec3> gt_correspondence(const ArticulatedScene& scene, int state_from, int state_to,
                                      const Vec3& x);

// n points uniform on the part surface in the given state's pose.
std::vector<Vec3> sample_surface_points(const ArticulatedScene& scene, int state,
                                        const std::string& part_id, int n, uint64_t seed);

// Camera poses uniform on the upper (z >= 0) hemisphere of the given radius,
// looking at the origin.
Camera sample_hemisphere_camera(Pcg32& rng, int width, int height, double camera_angle_x,
                                double radius = 4.0);

// Renders n_views hemisphere cameras and writes a Blender-format split.
DatasetManifest emit_dataset(const ArticulatedScene& scene, int state, int n_views, uint64_t seed,
                             const std::string& out_dir, Split split, int width, int height,
                             double camera_angle_x = 0.6911112);

// Bundled reference scenes: hinge-box, slide-box, grow-sphere, twin-envelope.
ArticulatedScene builtin_scene(const std::string& name);
std::vector<std::string> builtin_scene_names();

}  // namespace knerf
