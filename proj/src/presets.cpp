#include "drs/presets.hpp"

#include <memory>

namespace drs {

const std::vector<SamplePreset>& sample_presets() {
  static const std::vector<SamplePreset> presets = {
      {"liver_phantom", 0.0, 0.2, 0.0, 12},
      {"stomach_phantom", 0.0, 0.3, -2.0, 10},
      {"rump_steak", 0.8, 0.4, 0.0, 15},
      {"lamb_liver", 0.8, 0.2, 1.0, 25},
  };
  return presets;
}

const SamplePreset& sample_preset(const std::string& name) {
  for (const auto& p : sample_presets())
    if (p.name == name) return p;
  throw ConfigError("unknown sample preset '" + name + "'");
}

SceneState default_scene(const std::string& preset) {
  const SamplePreset& p = sample_preset(preset);
  const MaterialInfo material{p.name, p.name, p.name};
  const Vec2 origin(-60.0, -60.0);
  const double spacing = 2.0;
  const int n = 61;
  SceneState s;
  if (p.relief_amplitude > 0.0)
    s.surface = std::make_shared<const TissueSurface>(
        TissueSurface::relief(origin, spacing, n, n, 0.0, p.relief_amplitude, 40.0, material));
  else
    s.surface = std::make_shared<const TissueSurface>(
        TissueSurface::flat(origin, spacing, n, n, 0.0, material));
  s.third_person = look_at(Vec3(0.0, -250.0, 300.0), Vec3(0.0, 0.0, 0.0), Vec3(1.0, 0.0, 0.0), 900.0,
                           1280, 720);
  s.wrist_intrinsics.focal = 400.0;
  s.wrist_intrinsics.width = 640;
  s.wrist_intrinsics.height = 480;
  s.wrist_intrinsics.principal = Vec2(320.0, 240.0);
  s.wrist_offset = Vec3(0.0, -25.0, 60.0);
  s.speed_limit = 10.0;
  s.pose.position = Vec3(-25.0, -15.0, 25.0);
  return s;
}

Vec4 default_scan_line(const SceneState& scene) {
  const Vec3 a(-40.0, 0.0, scene.surface->height(-40.0, 0.0));
  const Vec3 b(40.0, 0.0, scene.surface->height(40.0, 0.0));
  const Pixel pa = project(scene.third_person, a);
  const Pixel pb = project(scene.third_person, b);
  return Vec4(pa(0), pa(1), pb(0), pb(1));
}

ScanCommand default_scan_command(const SceneState& scene) {
  const Vec4 l = default_scan_line(scene);
  return {l.head<2>(), l.tail<2>()};
}

ControlConfig default_control(const SamplePreset& preset) {
  ControlConfig c;
  c.alpha = preset.alpha;
  c.h_star = preset.h_star;
  return c;
}

TrialSensors default_sensors() {
  TrialSensors s;
  s.features.sigma_pixel = 1.0;
  s.features.dropout_prob = 0.01;
  s.features.glare_height = 8.0;
  return s;
}

TrialSensors ideal_sensors() {
  TrialSensors s = default_sensors();
  s.features.sigma_pixel = 0.0;
  s.features.dropout_prob = 0.0;
  s.height_profile = "ideal";
  s.optics->noise_sigma = 0.0;
  return s;
}

}  // namespace drs
