#include "knerf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace knerf {

namespace {

const RigidPose& pose_of(const RigidPart& part, int state) {
  KNERF_REQUIRE(state >= 0 && state < static_cast<int>(part.pose_per_state.size()),
                "part " + part.id + " has no pose for state " + std::to_string(state));
  return part.pose_per_state[static_cast<size_t>(state)];
}

std::array<double, 3> box_face_albedo(const RigidPart& part, int face) {
  if (part.face_albedo.size() == 6) return part.face_albedo[static_cast<size_t>(face)];
  return part.albedo;
}

// Slab test against the local box [-h, h]. Returns entry distance (or exit
// distance when the origin is inside) plus the local-face info.
bool intersect_box_local(const Vec3& o, const Vec3& d, const Vec3& h, double* t_out, int* axis_out,
                         int* sign_out) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int axis_min = -1, sign_min = 0;
  for (int k = 0; k < 3; ++k) {
    double ok = o[k], dk = d[k], hk = h[k];
    if (std::abs(dk) < 1e-15) {
      if (ok < -hk || ok > hk) return false;
      continue;
    }
    double inv = 1.0 / dk;
    double t0 = (-hk - ok) * inv;
    double t1 = (hk - ok) * inv;
    int entry_sign = dk > 0 ? -1 : +1;  // face crossed on entry
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      axis_min = k;
      sign_min = entry_sign;
    }
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  constexpr double eps = 1e-9;
  if (tmax < eps) return false;
  if (tmin > eps) {
    *t_out = tmin;
    *axis_out = axis_min;
    *sign_out = sign_min;
    return true;
  }
  // Origin inside: report the exit face.
  *t_out = tmax;
  Vec3 p = o + d * tmax;
  int axis = 0;
  double best = 0;
  for (int k = 0; k < 3; ++k) {
    double rel = std::abs(p[k]) / h[k];
    if (rel > best) {
      best = rel;
      axis = k;
    }
  }
  *axis_out = axis;
  *sign_out = p[axis] >= 0 ? +1 : -1;
  return true;
}

}  // namespace

std::optional<SurfaceHit> intersect_part(const RigidPart& part, int state, const Vec3& origin,
                                         const Vec3& dir) {
  const RigidPose& pose = pose_of(part, state);
  Mat3 rt = pose.rotation.transposed();
  Vec3 o = (rt * (origin - pose.translation)) / pose.scale;
  Vec3 d = (rt * dir) / pose.scale;  // same ray parameter as world space

  if (part.kind == PrimitiveKind::box) {
    double t;
    int axis, sign;
    if (!intersect_box_local(o, d, part.half_extents, &t, &axis, &sign)) return std::nullopt;
    Vec3 nl{0, 0, 0};
    if (axis == 0) nl.x = sign;
    if (axis == 1) nl.y = sign;
    if (axis == 2) nl.z = sign;
    SurfaceHit hit;
    hit.t = t;
    hit.normal = (pose.rotation * nl).normalized();
    hit.albedo = box_face_albedo(part, axis * 2 + (sign > 0 ? 0 : 1));
    return hit;
  }

  // Sphere.
  double a = d.dot(d);
  double b = 2.0 * o.dot(d);
  double c = o.dot(o) - part.radius * part.radius;
  double disc = b * b - 4 * a * c;
  if (disc < 0) return std::nullopt;
  double sq = std::sqrt(disc);
  double t0 = (-b - sq) / (2 * a);
  double t1 = (-b + sq) / (2 * a);
  constexpr double eps = 1e-9;
  double t = t0 > eps ? t0 : (t1 > eps ? t1 : -1);
  if (t < 0) return std::nullopt;
  Vec3 pl = o + d * t;
  SurfaceHit hit;
  hit.t = t;
  hit.normal = (pose.rotation * pl).normalized();
  hit.albedo = part.albedo;
  return hit;
}

bool part_contains(const RigidPart& part, int state, const Vec3& x, double tol) {
  const RigidPose& pose = pose_of(part, state);
  Vec3 u = pose.invert(x);
  double local_tol = tol / pose.scale;
  if (part.kind == PrimitiveKind::box) {
    return std::abs(u.x) <= part.half_extents.x + local_tol &&
           std::abs(u.y) <= part.half_extents.y + local_tol &&
           std::abs(u.z) <= part.half_extents.z + local_tol;
  }
  return u.norm() <= part.radius + local_tol;
}

bool part_contains_strict(const RigidPart& part, int state, const Vec3& x) {
  const RigidPose& pose = pose_of(part, state);
  Vec3 u = pose.invert(x);
  if (part.kind == PrimitiveKind::box) {
    return std::abs(u.x) < part.half_extents.x && std::abs(u.y) < part.half_extents.y &&
           std::abs(u.z) < part.half_extents.z;
  }
  return u.norm() < part.radius;
}

void ArticulatedScene::validate() const {
  KNERF_REQUIRE(n_states >= 2, "scene must define at least 2 states");
  KNERF_REQUIRE(!parts.empty(), "scene has no parts");
  for (const auto& part : parts) {
    KNERF_REQUIRE(static_cast<int>(part.pose_per_state.size()) == n_states,
                  "part " + part.id + " must define a pose for every state");
    for (const auto& pose : part.pose_per_state) pose.validate();
    if (part.kind == PrimitiveKind::box)
      KNERF_REQUIRE(part.half_extents.x > 0 && part.half_extents.y > 0 && part.half_extents.z > 0,
                    "part " + part.id + ": non-positive half extents");
    else
      KNERF_REQUIRE(part.radius > 0, "part " + part.id + ": non-positive radius");
    KNERF_REQUIRE(part.face_albedo.empty() || part.face_albedo.size() == 6,
                  "part " + part.id + ": face_albedo must have 6 entries");
  }

  // Sampled interpenetration check: interior points of one part must not lie
  // strictly inside another.
  Pcg32 rng(0x5CE11E);
  for (int state = 0; state < n_states; ++state) {
    for (size_t a = 0; a < parts.size(); ++a) {
      for (int trial = 0; trial < 256; ++trial) {
        const RigidPart& part = parts[a];
        Vec3 local;
        if (part.kind == PrimitiveKind::box) {
          local = {rng.uniform_in(-part.half_extents.x, part.half_extents.x),
                   rng.uniform_in(-part.half_extents.y, part.half_extents.y),
                   rng.uniform_in(-part.half_extents.z, part.half_extents.z)};
        } else {
          do {
            local = {rng.uniform_in(-1, 1), rng.uniform_in(-1, 1), rng.uniform_in(-1, 1)};
          } while (local.norm() > 1.0);
          local = local * part.radius;
        }
        Vec3 world = pose_of(part, state).apply(local);
        for (size_t b = 0; b < parts.size(); ++b) {
          if (b == a) continue;
          KNERF_REQUIRE(!part_contains_strict(parts[b], state, world),
                        "parts " + parts[a].id + " and " + parts[b].id +
                            " interpenetrate in state " + std::to_string(state));
        }
      }
    }
  }
}

void ArticulatedScene::bounds(Vec3* lo, Vec3* hi) const {
  Vec3 mn{1e30, 1e30, 1e30}, mx{-1e30, -1e30, -1e30};
  auto grow = [&](const Vec3& p) {
    mn = {std::min(mn.x, p.x), std::min(mn.y, p.y), std::min(mn.z, p.z)};
    mx = {std::max(mx.x, p.x), std::max(mx.y, p.y), std::max(mx.z, p.z)};
  };
  for (const auto& part : parts)
    for (int state = 0; state < n_states; ++state) {
      const RigidPose& pose = pose_of(part, state);
      if (part.kind == PrimitiveKind::box) {
        for (int corner = 0; corner < 8; ++corner) {
          Vec3 c{(corner & 1 ? 1 : -1) * part.half_extents.x,
                 (corner & 2 ? 1 : -1) * part.half_extents.y,
                 (corner & 4 ? 1 : -1) * part.half_extents.z};
          grow(pose.apply(c));
        }
      } else {
        double r = part.radius * pose.scale;
        Vec3 c = pose.apply({0, 0, 0});
        grow(c + Vec3{r, r, r});
        grow(c - Vec3{r, r, r});
      }
    }
  *lo = mn;
  *hi = mx;
}

double ArticulatedScene::bounding_diagonal() const {
  Vec3 lo, hi;
  bounds(&lo, &hi);
  return (hi - lo).norm();
}

ImageBuffer oracle_render(const ArticulatedScene& scene, int state, const Camera& cam) {
  cam.validate();
  ImageBuffer img(cam.width, cam.height);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cam.height; ++j) {
    for (int i = 0; i < cam.width; ++i) {
      Ray ray = ray_for_pixel(cam, i, j);
      double best_t = std::numeric_limits<double>::infinity();
      const SurfaceHit* best = nullptr;
      SurfaceHit hit_store;
      for (const auto& part : scene.parts) {
        auto hit = intersect_part(part, state, ray.origin, ray.dir);
        if (hit && hit->t < best_t) {
          best_t = hit->t;
          hit_store = *hit;
          best = &hit_store;
        }
      }
      float* px = img.at(i, j);
      if (!best) {
        px[0] = px[1] = px[2] = 1.0f;
        continue;
      }
      double lambert = std::max(0.0, -ray.dir.dot(best->normal));
      double shade = (1.0 - scene.light) + scene.light * lambert;
      for (int c = 0; c < 3; ++c)
        px[c] = static_cast<float>(std::clamp(best->albedo[static_cast<size_t>(c)] * shade, 0.0, 1.0));
    }
  }
  return img;
}

std::optional<Vec3> gt_correspondence(const ArticulatedScene& scene, int state_from, int state_to,
                                      const Vec3& x) {
  int found = -1;
  int strict_hits = 0;
  for (size_t p = 0; p < scene.parts.size(); ++p) {
    if (part_contains_strict(scene.parts[p], state_from, x)) ++strict_hits;
    if (found < 0 && part_contains(scene.parts[p], state_from, x)) found = static_cast<int>(p);
  }
  KNERF_REQUIRE(strict_hits <= 1, "gt_correspondence: point lies inside two parts");
  if (found < 0) return std::nullopt;
  const RigidPart& part = scene.parts[static_cast<size_t>(found)];
  return pose_of(part, state_to).apply(pose_of(part, state_from).invert(x));
}

std::vector<Vec3> sample_surface_points(const ArticulatedScene& scene, int state,
                                        const std::string& part_id, int n, uint64_t seed) {
  const RigidPart* part = nullptr;
  for (const auto& p : scene.parts)
    if (p.id == part_id) part = &p;
  KNERF_REQUIRE(part != nullptr, "sample_surface_points: unknown part " + part_id);
  const RigidPose& pose = pose_of(*part, state);

  std::vector<Vec3> out;
  out.reserve(static_cast<size_t>(n));
  uint64_t id_hash = 1469598103934665603ULL;  // FNV-1a, fixed across platforms
  for (char c : part_id) id_hash = (id_hash ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  Pcg32 rng(derive_seed(seed, 0x5A371E, id_hash));
  if (part->kind == PrimitiveKind::sphere) {
    for (int i = 0; i < n; ++i) {
      double z = rng.uniform_in(-1, 1);
      double phi = rng.uniform_in(0, 2 * 3.14159265358979323846);
      double r = std::sqrt(std::max(0.0, 1 - z * z));
      Vec3 local = Vec3{r * std::cos(phi), r * std::sin(phi), z} * part->radius;
      out.push_back(pose.apply(local));
    }
    return out;
  }

  const Vec3& h = part->half_extents;
  double areas[3] = {h.y * h.z, h.x * h.z, h.x * h.y};  // per axis-pair, x4 each side
  double total = 2 * (areas[0] + areas[1] + areas[2]);
  for (int i = 0; i < n; ++i) {
    double pick = rng.uniform_in(0, total);
    int face = 5;
    for (int k = 0; k < 6; ++k) {
      double a = areas[k / 2];
      if (pick < a) {
        face = k;
        break;
      }
      pick -= a;
    }
    int axis = face / 2;
    double sign = face % 2 == 0 ? 1.0 : -1.0;
    Vec3 local;
    double u = rng.uniform_in(-1, 1), v = rng.uniform_in(-1, 1);
    if (axis == 0) local = {sign * h.x, u * h.y, v * h.z};
    if (axis == 1) local = {u * h.x, sign * h.y, v * h.z};
    if (axis == 2) local = {u * h.x, v * h.y, sign * h.z};
    out.push_back(pose.apply(local));
  }
  return out;
}

Camera sample_hemisphere_camera(Pcg32& rng, int width, int height, double camera_angle_x,
                                double radius) {
  double z = rng.uniform();  // uniform-area on the upper hemisphere
  double phi = rng.uniform_in(0, 2 * 3.14159265358979323846);
  double r = std::sqrt(std::max(0.0, 1 - z * z));
  Vec3 eye = Vec3{r * std::cos(phi), r * std::sin(phi), z} * radius;
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.camera_angle_x = camera_angle_x;
  cam.c2w = look_at_c2w(eye, {0, 0, 0});
  return cam;
}

DatasetManifest emit_dataset(const ArticulatedScene& scene, int state, int n_views, uint64_t seed,
                             const std::string& out_dir, Split split, int width, int height,
                             double camera_angle_x) {
  KNERF_REQUIRE(n_views >= 1, "emit_dataset: need at least one view");
  Pcg32 rng(derive_seed(seed, 0xCA11, static_cast<uint64_t>(state),
                        static_cast<uint64_t>(split)));
  DatasetManifest manifest;
  manifest.camera_angle_x = camera_angle_x;
  std::vector<ImageBuffer> images;
  for (int i = 0; i < n_views; ++i) {
    Camera cam = sample_hemisphere_camera(rng, width, height, camera_angle_x);
    images.push_back(oracle_render(scene, state, cam));
    DatasetFrame frame;
    frame.file_path = std::string("./") + split_name(split) + "/r_" + std::to_string(i);
    frame.transform_matrix = cam.c2w;
    manifest.frames.push_back(frame);
  }
  save_dataset(manifest, images, out_dir, split);
  return manifest;
}

namespace {

RigidPose make_pose(const Mat3& r, const Vec3& t, double s = 1.0) {
  RigidPose p;
  p.rotation = r;
  p.translation = t;
  p.scale = s;
  return p;
}

// Pose that applies rotation R about a world-space pivot to a part whose
// rest pose is a pure translation t0.
RigidPose rotate_about(const Mat3& r, const Vec3& pivot, const Vec3& t0) {
  Vec3 t = r * (t0 - pivot) + pivot;
  return make_pose(r, t);
}

}  // namespace

ArticulatedScene builtin_scene(const std::string& name) {
  ArticulatedScene scene;
  scene.name = name;
  scene.n_states = 2;

  if (name == "hinge-box") {
    // Closed lid over a base; state 1 opens the lid 35 degrees about the
    // hinge edge, revealing the painted inner faces. A 2mm clearance keeps
    // the contact plane unambiguous for point correspondences while staying
    // far below one pixel at the dataset resolutions, so the inner faces are
    // still occluded in state 0.
    constexpr double gap = 0.002;
    RigidPart base;
    base.id = "base";
    base.kind = PrimitiveKind::box;
    base.half_extents = {0.5, 0.4, 0.25};
    base.albedo = {0.30, 0.45, 0.70};
    base.face_albedo.assign(6, base.albedo);
    base.face_albedo[4] = {0.85, 0.15, 0.15};  // +z top, hidden under the lid in state 0
    Vec3 base_t{0, 0, -0.25};
    base.pose_per_state = {make_pose(Mat3::identity(), base_t),
                           make_pose(Mat3::identity(), base_t)};

    RigidPart lid;
    lid.id = "lid";
    lid.kind = PrimitiveKind::box;
    lid.half_extents = {0.5, 0.4, 0.15};
    lid.albedo = {0.85, 0.65, 0.20};
    lid.face_albedo.assign(6, lid.albedo);
    lid.face_albedo[5] = {0.90, 0.45, 0.10};  // -z underside, facing the base in state 0
    Vec3 lid_t{0, 0, 0.15 + gap};
    Mat3 open = axis_angle_to_matrix({35.0 * 3.14159265358979323846 / 180.0, 0, 0});
    lid.pose_per_state = {make_pose(Mat3::identity(), lid_t),
                          rotate_about(open, {0, -0.4, gap}, lid_t)};
    scene.parts = {base, lid};
  } else if (name == "slide-box") {
    RigidPart anchor;
    anchor.id = "anchor";
    anchor.kind = PrimitiveKind::box;
    anchor.half_extents = {0.3, 0.3, 0.3};
    anchor.albedo = {0.25, 0.55, 0.35};
    Vec3 anchor_t{-0.55, 0, 0};
    anchor.pose_per_state = {make_pose(Mat3::identity(), anchor_t),
                             make_pose(Mat3::identity(), anchor_t)};

    RigidPart slider;
    slider.id = "slider";
    slider.kind = PrimitiveKind::box;
    slider.half_extents = {0.3, 0.3, 0.3};
    slider.albedo = {0.75, 0.30, 0.30};
    slider.pose_per_state = {make_pose(Mat3::identity(), {0.45, 0, 0}),
                             make_pose(Mat3::identity(), {0.75, 0, 0})};
    scene.parts = {anchor, slider};
  } else if (name == "grow-sphere") {
    RigidPart pedestal;
    pedestal.id = "pedestal";
    pedestal.kind = PrimitiveKind::box;
    pedestal.half_extents = {0.45, 0.45, 0.1};
    pedestal.albedo = {0.40, 0.40, 0.50};
    Vec3 pedestal_t{0, 0, -0.6};
    pedestal.pose_per_state = {make_pose(Mat3::identity(), pedestal_t),
                               make_pose(Mat3::identity(), pedestal_t)};

    RigidPart ball;
    ball.id = "ball";
    ball.kind = PrimitiveKind::sphere;
    ball.radius = 0.3;
    ball.albedo = {0.80, 0.50, 0.20};
    ball.pose_per_state = {make_pose(Mat3::identity(), {0, 0, 0.1}, 1.0),
                           make_pose(Mat3::identity(), {0, 0, 0.1}, 1.4)};
    scene.parts = {pedestal, ball};
  } else if (name == "twin-envelope") {
    // A duplicated envelope hides in the slot between the two body halves in
    // state 0 and rises above the box in state 1; its twin stays visible in
    // front throughout. New-content case: two deformed-space regions should
    // project onto the one canonical envelope.
    auto body = [](const std::string& id, double y) {
      RigidPart part;
      part.id = id;
      part.kind = PrimitiveKind::box;
      part.half_extents = {0.4, 0.08, 0.45};
      part.albedo = {0.45, 0.30, 0.55};
      Vec3 t{0, y, 0};
      part.pose_per_state = {make_pose(Mat3::identity(), t), make_pose(Mat3::identity(), t)};
      return part;
    };
    RigidPart envelope_a;
    envelope_a.id = "envelope_a";
    envelope_a.kind = PrimitiveKind::box;
    envelope_a.half_extents = {0.28, 0.01, 0.18};
    envelope_a.albedo = {0.92, 0.88, 0.80};
    Vec3 front_t{0, 0.30, 0};
    envelope_a.pose_per_state = {make_pose(Mat3::identity(), front_t),
                                 make_pose(Mat3::identity(), front_t)};

    RigidPart envelope_b = envelope_a;
    envelope_b.id = "envelope_b";
    envelope_b.pose_per_state = {make_pose(Mat3::identity(), {0, 0, 0}),
                                 make_pose(Mat3::identity(), {0, 0, 0.75})};
    scene.parts = {body("body_front", 0.095), body("body_back", -0.095), envelope_a, envelope_b};
  } else {
    throw config_error("unknown builtin scene: " + name);
  }

  scene.validate();
  return scene;
}

std::vector<std::string> builtin_scene_names() {
  return {"hinge-box", "slide-box", "grow-sphere", "twin-envelope"};
}

}  // namespace knerf
