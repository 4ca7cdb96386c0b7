#include "knerf/scene_io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace knerf {

using nlohmann::ordered_json;

namespace {

ordered_json vec_to_json(const Vec3& v) { return ordered_json::array({v.x, v.y, v.z}); }

Vec3 json_to_vec(const ordered_json& j) {
  if (!j.is_array() || j.size() != 3) throw config_error("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Axis-angle extraction: angle from the trace, axis from the skew part.
Vec3 matrix_to_axis_angle(const Mat3& r) {
  double tr = r.at(0, 0) + r.at(1, 1) + r.at(2, 2);
  double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  double angle = std::acos(c);
  if (angle < 1e-12) return {0, 0, 0};
  Vec3 axis{r.at(2, 1) - r.at(1, 2), r.at(0, 2) - r.at(2, 0), r.at(1, 0) - r.at(0, 1)};
  double s = axis.norm();
  if (s < 1e-12) {
    // angle ~ pi: pull the axis off the diagonal.
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (r.at(i, i) > r.at(k, k)) k = i;
    Vec3 a{0, 0, 0};
    double v = std::sqrt(std::max(0.0, (r.at(k, k) + 1.0) / 2.0));
    if (k == 0) a.x = v;
    if (k == 1) a.y = v;
    if (k == 2) a.z = v;
    return a * angle;
  }
  return axis * (angle / s);
}

}  // namespace

ArticulatedScene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open scene file: " + path);
  ordered_json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw config_error("malformed scene file " + path + ": " + e.what());
  }

  ArticulatedScene scene;
  scene.name = root.value("name", std::string("scene"));
  scene.n_states = root.value("n_states", 2);
  scene.light = root.value("light", 0.7);
  if (!root.contains("parts")) throw config_error("scene file missing parts: " + path);

  for (const auto& jp : root["parts"]) {
    RigidPart part;
    part.id = jp.at("id").get<std::string>();
    std::string prim = jp.at("primitive").get<std::string>();
    if (prim == "box") {
      part.kind = PrimitiveKind::box;
      part.half_extents = json_to_vec(jp.at("half_extents"));
    } else if (prim == "sphere") {
      part.kind = PrimitiveKind::sphere;
      part.radius = jp.at("radius").get<double>();
    } else {
      throw config_error("unknown primitive '" + prim + "' in " + path);
    }
    auto alb = jp.at("albedo");
    part.albedo = {alb[0].get<double>(), alb[1].get<double>(), alb[2].get<double>()};
    if (jp.contains("face_albedo")) {
      for (const auto& fa : jp["face_albedo"])
        part.face_albedo.push_back({fa[0].get<double>(), fa[1].get<double>(), fa[2].get<double>()});
    }
    for (const auto& jpose : jp.at("poses")) {
      RigidPose pose;
      pose.rotation = axis_angle_to_matrix(json_to_vec(jpose.at("axis_angle")));
      pose.translation = json_to_vec(jpose.at("translation"));
      pose.scale = jpose.value("scale", 1.0);
      part.pose_per_state.push_back(pose);
    }
    scene.parts.push_back(std::move(part));
  }
  scene.validate();
  return scene;
}

void save_scene(const ArticulatedScene& scene, const std::string& path) {
  ordered_json root;
  root["name"] = scene.name;
  root["n_states"] = scene.n_states;
  root["light"] = scene.light;
  root["parts"] = ordered_json::array();
  for (const auto& part : scene.parts) {
    ordered_json jp;
    jp["id"] = part.id;
    if (part.kind == PrimitiveKind::box) {
      jp["primitive"] = "box";
      jp["half_extents"] = vec_to_json(part.half_extents);
    } else {
      jp["primitive"] = "sphere";
      jp["radius"] = part.radius;
    }
    jp["albedo"] = ordered_json::array({part.albedo[0], part.albedo[1], part.albedo[2]});
    if (!part.face_albedo.empty()) {
      ordered_json fa = ordered_json::array();
      for (const auto& f : part.face_albedo) fa.push_back(ordered_json::array({f[0], f[1], f[2]}));
      jp["face_albedo"] = fa;
    }
    jp["poses"] = ordered_json::array();
    for (const auto& pose : part.pose_per_state) {
      ordered_json jpose;
      jpose["axis_angle"] = vec_to_json(matrix_to_axis_angle(pose.rotation));
      jpose["translation"] = vec_to_json(pose.translation);
      jpose["scale"] = pose.scale;
      jp["poses"].push_back(jpose);
    }
    root["parts"].push_back(jp);
  }
  std::ofstream out(path);
  if (!out) throw io_error("cannot write scene file: " + path);
  out << root.dump(4) << "\n";
}

ArticulatedScene resolve_scene(const std::string& name_or_path) {
  for (const auto& name : builtin_scene_names())
    if (name == name_or_path) return builtin_scene(name);
  if (!std::filesystem::exists(name_or_path))
    throw config_error("scene '" + name_or_path + "' is neither a builtin nor an existing file");
  return load_scene(name_or_path);
}

}  // namespace knerf
