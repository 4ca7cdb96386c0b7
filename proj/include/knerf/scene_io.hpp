#pragma once

#include <string>

#include "knerf/scene.hpp"

namespace knerf {

// Scene description files share the dataset manifest grammar (JSON): parts
// with primitive, albedo and per-state poses given as axis-angle rotation,
// translation and uniform scale.
ArticulatedScene load_scene(const std::string& path);
void save_scene(const ArticulatedScene& scene, const std::string& path);

// Resolves a builtin name or a path to a scene file.
ArticulatedScene resolve_scene(const std::string& name_or_path);

}  // namespace knerf
