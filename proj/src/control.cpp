#include "drs/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drs {

double pid_step(const PidGains& g, PidState& st, double error, double measurement, double dt, double limit) {
  if (!(dt > 0.0)) throw DomainError("pid: dt must be > 0");
  if (st.primed) {
    const double raw = -(measurement - st.previous_measurement) / dt;
    st.derivative += (raw - st.derivative) * dt / (g.derivative_filter + dt);
  } else {
    st.derivative = 0.0;
    st.primed = true;
  }
  st.previous_measurement = measurement;

  const double candidate = std::clamp(st.integral + error * dt, -g.integral_limit, g.integral_limit);
  const double unsat = g.kp * error + g.ki * candidate + g.kd * st.derivative;
  // Integrate only while unsaturated or when the error unwinds the saturation.
  if (std::abs(unsat) <= limit || (error > 0.0) != (unsat > 0.0)) st.integral = candidate;
  const double u = g.kp * error + g.ki * st.integral + g.kd * st.derivative;
  return std::clamp(u, -limit, limit);
}

void ControlConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("control: ") + name + " must be > 0");
  };
  positive(lambda, "lambda");
  positive(k_blend, "k_blend");
  positive(speed_limit, "speed_limit");
  positive(action_limit, "action_limit");
  positive(approach_threshold, "approach_threshold");
  positive(height_tolerance, "height_tolerance");
  if (approach_dwell < 1) throw ConfigError("control.approach_dwell must be >= 1");
  positive(scan_speed, "scan_speed");
  positive(max_scan_rate, "max_scan_rate");
  positive(rate_hz, "rate_hz");
  positive(done_threshold, "done_threshold");
  positive(timeout, "timeout");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("control: alpha must be in [0, 1]");
  if (!std::isfinite(h_star)) throw ConfigError("control: h_star must be finite");
  if (dropout_limit < 1) throw ConfigError("control: dropout_limit must be >= 1");
  for (const PidGains* g : {&height_pid, &scan_pid})
    if (g->kp < 0.0 || g->ki < 0.0 || g->kd < 0.0 || !(g->integral_limit > 0.0) || g->derivative_filter < 0.0)
      throw ConfigError("control: PID gains must be non-negative");
}

void ScanCommand::validate(int width, int height) const {
  auto inside = [&](const Pixel& p) {
    return std::isfinite(p(0)) && std::isfinite(p(1)) && p(0) >= 0.0 && p(1) >= 0.0 && p(0) < width &&
           p(1) < height;
  };
  if (!inside(start) || !inside(end)) throw ConfigError("scan line endpoints must lie inside the image");
  if (!(length() > 0.0)) throw ConfigError("scan line start and end coincide");
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Approach: return "approach";
    case Stage::Scanning: return "scanning";
    case Stage::Done: return "done";
    case Stage::Failed: return "failed";
  }
  return "failed";
}

Stage stage_from_string(const std::string& s) {
  if (s == "approach") return Stage::Approach;
  if (s == "scanning") return Stage::Scanning;
  if (s == "done") return Stage::Done;
  if (s == "failed") return Stage::Failed;
  throw ConfigError("unknown stage '" + s + "'");
}

ActionPair blend(const Vec3& a_vs, const Vec3& a_hc, double d, double alpha, double k_blend) {
  if (!(d >= 0.0)) throw DomainError("blend: d must be >= 0");
  ActionPair p;
  p.a_vs = a_vs;
  p.a_hc = a_hc;
  p.beta = blend_weight(d, alpha, k_blend);
  p.a = p.beta * a_vs + (1.0 - p.beta) * a_hc;
  return p;
}

ActionPair limit_command(const ActionPair& pair, double limit) {
  const double n = pair.a.norm();
  if (!(n > limit)) return pair;
  ActionPair p = pair;
  const double scale = limit / n;
  p.a_vs *= scale;
  p.a_hc *= scale;
  p.a = p.beta * p.a_vs + (1.0 - p.beta) * p.a_hc;
  return p;
}

Vec3 ibvs_velocity(const Mat34& inverse_jacobian, const Vec4& s, const Pixel& target, double lambda,
                   double limit) {
  const Vec4 e = stacked_error(s, target);
  if (!all_finite(inverse_jacobian)) throw NumericError("estimator returned a non-finite inverse Jacobian");
  if (!all_finite(e)) throw NumericError("non-finite feature error");
  return clamp_norm(-lambda * inverse_jacobian * e, limit);
}

double height_action(double h_meas, double h_star, const PidGains& gains, PidState& state, double dt,
                     double limit) {
  return pid_step(gains, state, h_star - h_meas, h_meas, dt, limit);
}

namespace {

double feature_distance(const Vec4& e) { return std::max(e.head<2>().norm(), e.tail<2>().norm()); }

ActionPair hybrid_action(const ControlConfig& c, ControllerState& st, const TickInput& in, double dt) {
  const Vec3 a_vs = ibvs_velocity(in.inverse_jacobian, in.s, st.target, c.lambda, c.action_limit);
  const double vz = height_action(in.h_meas, c.h_star, c.height_pid, st.height, dt, c.action_limit);
  const double d = std::abs(in.h_meas - c.h_star);
  const ActionPair pair = blend(a_vs, Vec3(0.0, 0.0, vz), d, c.compensator ? c.alpha : 1.0, c.k_blend);
  return limit_command(pair, c.speed_limit);
}

}  // namespace

StepResult approach_step(const ControlConfig& c, const ControllerState& state, const ScanCommand& command,
                         const TickInput& in, double dt) {
  if (state.stage != Stage::Approach) throw DomainError("approach_step: controller is not approaching");
  StepResult r;
  r.next = state;
  ControllerState& st = r.next;
  st.target = command.start;
  st.error = stacked_error(in.s, st.target);
  const bool inside =
      feature_distance(st.error) < c.approach_threshold && std::abs(in.h_meas - c.h_star) < c.height_tolerance;
  st.settled = inside ? st.settled + 1 : 0;
  if (st.settled >= c.approach_dwell) {
    st.stage = Stage::Scanning;
    st.progress = 0.0;
  }
  r.action = hybrid_action(c, st, in, dt);
  return r;
}

StepResult scanning_step(const ControlConfig& c, const ControllerState& state, const ScanCommand& command,
                         const TickInput& in, double dt) {
  if (state.stage != Stage::Scanning) throw DomainError("scanning_step: controller is not scanning");
  StepResult r;
  r.next = state;
  ControllerState& st = r.next;
  const double length = command.length();
  const Vec2 dir = (command.end - command.start) / length;

  if (st.progress < length) {
    // Scan-progress PID: pace the target so the features move at scan_speed.
    const double along = 0.5 * dir.dot(in.s_dot.head<2>() + in.s_dot.tail<2>());
    const double trim = pid_step(c.scan_pid, st.scan, c.scan_speed - along, along, dt, c.max_scan_rate);
    const double rate = std::clamp(c.scan_speed + trim, 0.0, c.max_scan_rate);
    st.progress = std::min(length, st.progress + rate * dt);
    r.advancing = true;
  }
  st.target = command.start + dir * st.progress;
  st.error = stacked_error(in.s, st.target);
  if (st.progress >= length && feature_distance(st.error) < c.done_threshold) st.stage = Stage::Done;
  r.action = hybrid_action(c, st, in, dt);
  return r;
}

void TrialSensors::validate() const {
  features.validate();
  if (light_period < 1) throw ConfigError("sensors: light_period must be >= 1");
  if (!(kf_q > 0.0)) throw ConfigError("sensors: kf_q must be > 0");
  if (!height_profile.empty()) height.profile(height_profile);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sense_height(const SceneState& s, const TrialSensors& sensors, Rng& rng) {
  if (sensors.height_profile.empty()) return measure_height(s, sensors.height, rng);
  const HeightNoiseProfile& p = sensors.height.profile(sensors.height_profile);
  const double h = contact_height(s).h;
  const double sigma = p.sigma(h);
  const double eps = sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
  return h + p.bias + eps;
}

}  // namespace

TrialLog run_trial(const SceneState& scene, const ControlConfig& config, const ScanCommand& command,
                   const JacobianModel& model, const TrialSensors& sensors, std::uint64_t seed) {
  config.validate();
  sensors.validate();
  command.validate(scene.third_person.width, scene.third_person.height);

  TrialLog log;
  log.seed = seed;
  log.dt = config.dt();
  log.command = command;
  if (sensors.optics) {
    log.white = sensors.optics->white();
    log.dark = sensors.optics->dark();
  }

  Rng feature_rng = make_stream(seed, "features");
  Rng height_rng = make_stream(seed, "height");
  Rng spectrum_rng = make_stream(seed, "spectra");

  const double dt = config.dt();
  const double r = sensors.features.sigma_pixel * sensors.features.sigma_pixel;
  // A zero-noise sensor still needs a positive measurement variance for the filter.
  const double kf_r = std::max(r, 1e-6);
  KalmanTrack tip_track, light_track;
  tip_track.q = light_track.q = sensors.kf_q;
  tip_track.r = light_track.r = kf_r;

  SceneState state = scene;
  state.speed_limit = config.speed_limit;
  ControllerState ctrl;
  ctrl.target = command.start;

  auto fail = [&](const std::string& why) {
    log.final_stage = Stage::Failed;
    log.failure = why;
  };

  for (int tick = 0;; ++tick) {
    const double t = tick * dt;
    if (t >= config.timeout) {
      fail("timeout");
      break;
    }
    TrialTick row;
    row.tick = tick;
    row.t = t;
    row.stage = ctrl.stage;
    row.position = state.pose.position;
    row.s_raw = Vec4::Constant(kNaN);

    ContactState contact;
    try {
      row.s_true = ground_truth_features(state).stacked();
      contact = contact_height(state);
    } catch (const DomainError& e) {
      fail(std::string("off-tissue: ") + e.what());
      break;
    }
    row.h_true = contact.h;

    // Perception: tip every tick, light centre every light_period ticks.
    std::optional<Pixel> z_tip, z_light;
    if (tick % sensors.light_period == 0) {
      const auto f = measure_features(state, sensors.features, feature_rng);
      if (f) {
        z_tip = f->tip();
        z_light = f->light();
        ctrl.dropouts = 0;
        row.light_seen = true;
      } else {
        ++ctrl.dropouts;
      }
    } else {
      z_tip = measure_tip(state, sensors.features, feature_rng);
    }
    if (z_tip) row.s_raw.head<2>() = *z_tip;
    if (z_light) row.s_raw.tail<2>() = *z_light;
    row.h_meas = sense_height(state, sensors, height_rng);

    if (ctrl.dropouts >= config.dropout_limit) {
      log.ticks.push_back(row);
      fail("light-centre detection lost for " + std::to_string(ctrl.dropouts) + " frames");
      break;
    }

    const bool ready = (tip_track.initialized || z_tip) && (light_track.initialized || z_light);
    if (!ready) {
      // Nothing to servo on yet; hold position until both tracks start.
      if (z_tip) tip_track = kf_step(tip_track, z_tip, dt).track;
      if (z_light) light_track = kf_step(light_track, z_light, dt).track;
      row.s_filt = Vec4::Constant(kNaN);
      row.target = ctrl.target;
      log.ticks.push_back(row);
      state = step(state, Vec3::Zero(), dt);
      continue;
    }
    const KalmanStep kt = kf_step(tip_track, z_tip, dt);
    const KalmanStep kl = kf_step(light_track, z_light, dt);
    tip_track = kt.track;
    light_track = kl.track;

    TickInput in;
    in.s << kt.position, kl.position;
    in.s_dot << kt.velocity, kl.velocity;
    in.h_meas = row.h_meas;
    row.s_filt = in.s;

    StepResult res;
    try {
      in.inverse_jacobian = model.inverse(in.s, state);
      res = ctrl.stage == Stage::Approach ? approach_step(config, ctrl, command, in, dt)
                                          : scanning_step(config, ctrl, command, in, dt);
    } catch (const NumericError& e) {
      log.ticks.push_back(row);
      fail(std::string("estimator: ") + e.what());
      break;
    }
    row.action = res.action;
    row.target = res.next.target;
    row.advancing = res.advancing;

    if (ctrl.stage == Stage::Approach && res.next.stage == Stage::Scanning) log.approach_time = t;
    if (row.stage == Stage::Scanning && res.advancing && sensors.optics) {
      Spectrum s = synthesize_raw(*sensors.optics, state.surface->material(state.pose.position(0),
                                                                           state.pose.position(1)).fingerprint,
                                  contact.h, spectrum_rng);
      s.id = "t" + std::to_string(tick);
      row.spectrum = static_cast<int>(log.spectra.size());
      log.spectra.push_back(std::move(s));
    }
    log.ticks.push_back(row);
    ctrl = res.next;
    if (ctrl.stage == Stage::Done) {
      log.final_stage = Stage::Done;
      break;
    }
    try {
      state = step(state, res.action.a, dt);
    } catch (const DomainError& e) {
      fail(std::string("off-tissue: ") + e.what());
      break;
    }
  }
  if (log.final_stage != Stage::Failed && log.final_stage != Stage::Done) log.final_stage = ctrl.stage;
  return log;
}

}  // namespace drs
