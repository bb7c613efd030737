#ifndef DRS_PERCEPTION_HPP
#define DRS_PERCEPTION_HPP

#include "drs/rng.hpp"
#include "drs/scene.hpp"

#include <limits>
#include <map>
#include <optional>
#include <string>

namespace drs {

/// s = (u_p, v_p, u_l, v_l): probe tip pixel followed by light-centre pixel.
struct FeatureVector {
  Vec4 s = Vec4::Zero();
  double timestamp = 0.0;

  Pixel tip() const { return s.head<2>(); }
  Pixel light() const { return s.tail<2>(); }
};

struct FeatureNoiseModel {
  double sigma_pixel = 1.0;
  double dropout_prob = 0.01;
  // Below this gap (mm) the third-person view of the illuminated area is
  // overexposed and the light-centre detector locks onto the probe tip.
  // Disabled by default; sensor presets switch it on.
  double glare_height = -std::numeric_limits<double>::infinity();

  void validate() const;
};

/// Noisy tip + light-centre detection. Absent when the light centre is not
/// detected (probability dropout_prob).
std::optional<FeatureVector> measure_features(const SceneState& state, const FeatureNoiseModel& noise,
                                              Rng& rng);

/// Tip-only detection used on the interpolation ticks between light-centre frames.
Pixel measure_tip(const SceneState& state, const FeatureNoiseModel& noise, Rng& rng);

/*
 * Constant-velocity Kalman track of one pixel feature, state (u, v, du, dv).
 *
 *   x' = F x,  F = [I dt*I; 0 I]
 *   Q  = q * [dt^3/3 I, dt^2/2 I; dt^2/2 I, dt I]   (white-noise acceleration)
 *   z  = [I 0] x + N(0, r I)
 */
struct KalmanTrack {
  Vec4 x = Vec4::Zero();
  Mat4 P = Mat4::Identity();
  double q = 20.0;  // px^2/s^3
  double r = 1.0;   // px^2
  double initial_velocity_sigma = 100.0;  // px/s
  bool initialized = false;
  int repairs = 0;

  static KalmanTrack start(const Pixel& z, double q, double r, double velocity_sigma = 100.0);
};

struct KalmanStep {
  KalmanTrack track;
  Pixel position;
  Vec2 velocity;
  bool updated = false;
  bool repaired = false;  // covariance needed a PSD repair this step
};

/// Predict, then update when `z` is present. Predict-only steps interpolate
/// between measurements.
KalmanStep kf_step(const KalmanTrack& track, const std::optional<Pixel>& z, double dt);

struct HeightNoiseProfile {
  double sigma0 = 0.0;      // mm
  double sigma_peak = 0.0;  // extra sigma at h = 0, mm
  double peak_width = 1.0;  // mm
  double bias = 0.0;        // mm

  double sigma(double h) const;
};

/// Contact-height sensor calibrated per material noise profile.
struct HeightSensorModel {
  std::map<std::string, HeightNoiseProfile> profiles;
  double rate_hz = 30.0;

  const HeightNoiseProfile& profile(const std::string& id) const;
  double sigma(const std::string& id, double h) const { return profile(id).sigma(h); }
  double bias(const std::string& id, double) const { return profile(id).bias; }

  /// Named profiles: liver_phantom, stomach_phantom, rump_steak, lamb_liver,
  /// spectrum_based (the weaker spectrum-driven estimator), ideal.
  static HeightSensorModel standard();
};

double measure_height(const SceneState& state, const HeightSensorModel& model, Rng& rng);

}  // namespace drs

#endif  // DRS_PERCEPTION_HPP
