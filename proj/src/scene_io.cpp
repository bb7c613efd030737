#include "drs/scene_io.hpp"

#include <fstream>

namespace drs {

using nlohmann::json;

namespace {

json camera_to_json(const PinholeCamera& cam) {
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[3 * i + k] = cam.rotation(i, k);
  return {{"focal", cam.focal},
          {"principal", {cam.principal(0), cam.principal(1)}},
          {"width", cam.width},
          {"height", cam.height},
          {"rotation", r},
          {"translation", {cam.translation(0), cam.translation(1), cam.translation(2)}}};
}

PinholeCamera camera_from_json(const json& j) {
  PinholeCamera cam;
  cam.focal = j.at("focal").get<double>();
  const auto pp = j.at("principal").get<std::vector<double>>();
  const auto r = j.at("rotation").get<std::vector<double>>();
  const auto t = j.at("translation").get<std::vector<double>>();
  if (pp.size() != 2 || r.size() != 9 || t.size() != 3)
    throw ConfigError("scene: malformed camera block");
  cam.principal = Vec2(pp[0], pp[1]);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) cam.rotation(i, k) = r[3 * i + k];
  cam.translation = Vec3(t[0], t[1], t[2]);
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  if (!(cam.focal > 0.0)) throw ConfigError("scene: camera focal must be > 0");
  if ((cam.rotation * cam.rotation.transpose() - Mat3::Identity()).norm() > 1e-6)
    throw ConfigError("scene: camera rotation is not orthonormal");
  return cam;
}

}  // namespace

json scene_to_json(const SceneState& state) {
  const TissueSurface& s = *state.surface;
  json table = json::array();
  for (const auto& m : s.material_table())
    table.push_back({{"name", m.name}, {"fingerprint", m.fingerprint}, {"noise_profile", m.noise_profile}});
  json wrist = camera_to_json(state.wrist_intrinsics);
  wrist.erase("rotation");
  wrist.erase("translation");
  wrist["offset"] = {state.wrist_offset(0), state.wrist_offset(1), state.wrist_offset(2)};
  return {
      {"format", "drs-scene"},
      {"version", kSceneFormatVersion},
      {"_header",
       "Units: lengths mm, image px, time s, speed mm/s. Heights row-major (index j*nx+i) at "
       "origin+spacing*(i,j); materials per cell (index j*(nx-1)+i). Camera extrinsics map "
       "world->camera: p_cam = R p_world + t, R row-major."},
      {"grid",
       {{"origin", {s.origin()(0), s.origin()(1)}},
        {"spacing", s.spacing()},
        {"nx", s.nx()},
        {"ny", s.ny()},
        {"heights", s.heights()},
        {"materials", s.materials()}}},
      {"max_compression", s.max_compression()},
      {"material_table", table},
      {"third_person_camera", camera_to_json(state.third_person)},
      {"wrist_camera", wrist},
      {"speed_limit", state.speed_limit},
      {"initial_tip", {state.pose.position(0), state.pose.position(1), state.pose.position(2)}},
  };
}

SceneState scene_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "drs-scene") throw ConfigError("scene: wrong format tag");
    if (j.at("version").get<int>() != kSceneFormatVersion)
      throw ConfigError("scene: unsupported version " + std::to_string(j.at("version").get<int>()));
    const json& g = j.at("grid");
    const auto origin = g.at("origin").get<std::vector<double>>();
    if (origin.size() != 2) throw ConfigError("scene: grid origin needs 2 values");
    std::vector<MaterialInfo> table;
    for (const auto& m : j.at("material_table"))
      table.push_back({m.at("name").get<std::string>(), m.at("fingerprint").get<std::string>(),
                       m.at("noise_profile").get<std::string>()});
    auto surface = std::make_shared<const TissueSurface>(
        Vec2(origin[0], origin[1]), g.at("spacing").get<double>(), g.at("nx").get<int>(),
        g.at("ny").get<int>(), g.at("heights").get<std::vector<double>>(),
        g.at("materials").get<std::vector<int>>(), std::move(table),
        j.at("max_compression").get<double>());

    SceneState state;
    state.surface = std::move(surface);
    state.third_person = camera_from_json(j.at("third_person_camera"));
    const json& w = j.at("wrist_camera");
    json wfull = w;
    wfull["rotation"] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    wfull["translation"] = {0, 0, 0};
    state.wrist_intrinsics = camera_from_json(wfull);
    const auto off = w.at("offset").get<std::vector<double>>();
    if (off.size() != 3) throw ConfigError("scene: wrist offset needs 3 values");
    state.wrist_offset = Vec3(off[0], off[1], off[2]);
    state.speed_limit = j.at("speed_limit").get<double>();
    if (!(state.speed_limit > 0.0)) throw ConfigError("scene: speed_limit must be > 0");
    const auto tip = j.at("initial_tip").get<std::vector<double>>();
    if (tip.size() != 3) throw ConfigError("scene: initial_tip needs 3 values");
    state.pose.position = Vec3(tip[0], tip[1], tip[2]);
    return state;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene: ") + e.what());
  }
}

void save_scene(const SceneState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene file " + path.string());
  out << scene_to_json(state).dump(2) << '\n';
}

SceneState load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scene file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scene: parse error in " + path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace drs
