#ifndef DRS_SCENE_IO_HPP
#define DRS_SCENE_IO_HPP

#include "drs/scene.hpp"

#include <json.hpp>

#include <filesystem>

namespace drs {

// Scene description file, format "drs-scene" version 1 (JSON). The "_header"
// entry documents units: lengths mm, image coordinates px, time s. Camera
// extrinsics are world->camera, rotation stored row-major.
inline constexpr int kSceneFormatVersion = 1;

nlohmann::json scene_to_json(const SceneState& state);
SceneState scene_from_json(const nlohmann::json& j);

void save_scene(const SceneState& state, const std::filesystem::path& path);
SceneState load_scene(const std::filesystem::path& path);

}  // namespace drs

#endif  // DRS_SCENE_IO_HPP
