#ifndef DRS_PRESETS_HPP
#define DRS_PRESETS_HPP

#include "drs/control.hpp"
#include "drs/scene.hpp"

#include <string>
#include <vector>

namespace drs {

/// Per-sample experiment settings. The four samples mirror the phantom and
/// ex vivo targets: settle height h* and blend floor alpha are the tuned
/// values reported for each target, repeats is the automatic trial count.
struct SamplePreset {
  std::string name;
  double relief_amplitude = 0.0;  // mm, 0 for the flat phantoms
  double alpha = 0.2;
  double h_star = 0.0;  // mm
  int repeats = 10;
};

const std::vector<SamplePreset>& sample_presets();
const SamplePreset& sample_preset(const std::string& name);

/// Default world: 120 x 120 mm tissue block at z = 0 seen by an oblique
/// third-person camera ~390 mm away, plus the wrist camera.
SceneState default_scene(const std::string& preset = "liver_phantom");

/// Default scan line in pixels: the projection of the surface segment from
/// (-40, 0) to (40, 0) mm.
Vec4 default_scan_line(const SceneState& scene);

ScanCommand default_scan_command(const SceneState& scene);

/// Controller settings for a sample: alpha and h* from the preset.
ControlConfig default_control(const SamplePreset& preset);

/// Desk-scale camera and sensor noise: 1 px feature noise, 1% light-centre
/// dropout, overexposure below 8 mm, per-material height noise.
TrialSensors default_sensors();
/// Noise-free sensors; overexposure is deterministic and stays on.
TrialSensors ideal_sensors();

/// Excitation region used for Jacobian calibration.
inline const Vec2 kExcitationCentre{0.0, 0.0};
inline const Vec2 kExcitationHalfExtent{45.0, 30.0};

}  // namespace drs

#endif  // DRS_PRESETS_HPP
