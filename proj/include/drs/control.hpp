#ifndef DRS_CONTROL_HPP
#define DRS_CONTROL_HPP

#include "drs/jacobian.hpp"
#include "drs/perception.hpp"
#include "drs/spectro.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace drs {

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double integral_limit = 1e9;      // |integral| cap, error units * s
  double derivative_filter = 0.1;   // first-order filter time constant, s
};

struct PidState {
  double integral = 0.0;
  double derivative = 0.0;
  double previous_measurement = 0.0;
  bool primed = false;
};

/// PID with derivative on measurement and conditional-integration
/// anti-windup. The output is clamped to +-limit.
double pid_step(const PidGains& gains, PidState& state, double error, double measurement, double dt,
                double limit);

struct ControlConfig {
  double lambda = 0.8;   // IBVS gain, 1/s
  double alpha = 0.2;    // blend floor
  double k_blend = 2.0;  // blend distance constant, mm
  double h_star = 0.0;   // settle height, mm
  PidGains height_pid{2.0, 0.4, 0.02, 5.0, 0.1};
  PidGains scan_pid{0.5, 0.3, 0.0, 50.0, 0.1};
  double speed_limit = 10.0;         // final command, mm/s
  double action_limit = 40.0;        // each action before blending, mm/s
  double approach_threshold = 1.29;  // px
  double height_tolerance = 0.5;     // mm
  int approach_dwell = 5;            // consecutive ticks both approach conditions must hold
  double scan_speed = 12.0;          // image speed of the target along the line, px/s
  double max_scan_rate = 40.0;       // px/s
  double rate_hz = 30.0;
  double done_threshold = 1.29;      // px
  int dropout_limit = 30;            // consecutive missed light-centre frames
  double timeout = 120.0;            // s
  bool compensator = true;           // false forces beta = 1

  double dt() const { return 1.0 / rate_hz; }
  void validate() const;
};

/// Scan line on the third-person image.
struct ScanCommand {
  Pixel start = Pixel::Zero();
  Pixel end = Pixel::Zero();

  double length() const { return (end - start).norm(); }
  void validate(int width, int height) const;
};

enum class Stage { Approach, Scanning, Done, Failed };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct ActionPair {
  Vec3 a_vs = Vec3::Zero();
  Vec3 a_hc = Vec3::Zero();  // vertical only
  double beta = 1.0;
  Vec3 a = Vec3::Zero();
};

/// beta = alpha + (1 - alpha)(1 - exp(-d / k)).
template <typename Scalar>
Scalar blend_weight(Scalar d, Scalar alpha, Scalar k) {
  using std::expm1;
  return alpha + (Scalar(1) - alpha) * -expm1(-d / k);
}

/// a = beta a_VS + (1 - beta) a_HC with beta from |d|.
ActionPair blend(const Vec3& a_vs, const Vec3& a_hc, double d, double alpha, double k_blend);

/// Rescales all three actions so |a| <= limit; the convex combination is kept.
ActionPair limit_command(const ActionPair& pair, double limit);

template <typename Derived>
Vec3 clamp_norm(const Eigen::MatrixBase<Derived>& v, double limit) {
  const double n = v.norm();
  return n > limit ? Vec3(v * (limit / n)) : Vec3(v);
}

/// e = (s_p - s*, s_l - s*).
inline Vec4 stacked_error(const Vec4& s, const Pixel& target) {
  return s - (Vec4() << target, target).finished();
}

/// v = -lambda Jinv e, clamped to `limit`. Throws NumericError on a
/// non-finite inverse Jacobian or error.
Vec3 ibvs_velocity(const Mat34& inverse_jacobian, const Vec4& s, const Pixel& target, double lambda,
                   double limit);

/// v_z = PID(h* - h_meas), clamped to `limit`.
double height_action(double h_meas, double h_star, const PidGains& gains, PidState& state, double dt,
                     double limit);

struct ControllerState {
  Stage stage = Stage::Approach;
  std::string failure;
  Pixel target = Pixel::Zero();
  double progress = 0.0;  // px travelled by the target along the line
  int settled = 0;        // consecutive approach ticks inside both tolerances
  Vec4 error = Vec4::Zero();
  PidState height;
  PidState scan;
  int dropouts = 0;
};

/// Filtered perception available to a controller tick.
struct TickInput {
  Vec4 s = Vec4::Zero();         // filtered features
  Vec4 s_dot = Vec4::Zero();     // filtered feature velocities
  double h_meas = 0.0;
  Mat34 inverse_jacobian = Mat34::Zero();
};

struct StepResult {
  ActionPair action;
  ControllerState next;
  bool advancing = false;  // target moved along the line this tick
};

StepResult approach_step(const ControlConfig& config, const ControllerState& state, const ScanCommand& command,
                         const TickInput& in, double dt);
StepResult scanning_step(const ControlConfig& config, const ControllerState& state, const ScanCommand& command,
                         const TickInput& in, double dt);

/// Sensors attached to a trial.
struct TrialSensors {
  FeatureNoiseModel features;
  HeightSensorModel height = HeightSensorModel::standard();
  std::string height_profile;  // overrides the material's noise profile when set
  std::optional<TissueOpticalModel> optics = TissueOpticalModel::standard();
  int light_period = 2;        // light-centre frames every n control ticks
  double kf_q = 20.0;          // px^2/s^3

  void validate() const;
};

struct TrialTick {
  int tick = 0;
  double t = 0.0;
  Stage stage = Stage::Approach;
  bool light_seen = false;
  Vec4 s_raw = Vec4::Zero();   // NaN where nothing was measured
  Vec4 s_filt = Vec4::Zero();
  Vec4 s_true = Vec4::Zero();
  Pixel target = Pixel::Zero();
  bool advancing = false;
  double h_true = 0.0;
  double h_meas = 0.0;
  ActionPair action;
  Vec3 position = Vec3::Zero();
  int spectrum = -1;  // index into TrialLog::spectra
};

struct TrialLog {
  std::string id;
  std::string sample;
  std::string kind = "automatic";  // or "manual"
  std::uint64_t seed = 0;
  Stage final_stage = Stage::Approach;
  std::string failure;
  double approach_time = -1.0;  // s, -1 if the approach never completed
  double dt = 1.0 / 30.0;
  ScanCommand command;
  std::vector<TrialTick> ticks;
  std::vector<Spectrum> spectra;  // raw
  std::optional<Spectrum> white;
  std::optional<Spectrum> dark;

  bool done() const { return final_stage == Stage::Done; }
};

/// Fixed-rate closed loop until Done, Failed or timeout.
TrialLog run_trial(const SceneState& scene, const ControlConfig& config, const ScanCommand& command,
                   const JacobianModel& model, const TrialSensors& sensors, std::uint64_t seed);

}  // namespace drs

#endif  // DRS_CONTROL_HPP
