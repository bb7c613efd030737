#include "drs/manual.hpp"

#include <algorithm>
#include <cmath>

namespace drs {

void ManualOperatorModel::validate() const {
  if (!(sigma_hand >= 0.0) || !(sigma_xy >= 0.0)) throw ConfigError("manual: tremor sigmas must be >= 0");
  if (!(tau_hand > 0.0) || !(tau_xy > 0.0)) throw ConfigError("manual: tremor time constants must be > 0");
  if (!(speed > 0.0) || !(duration > 0.0) || !(rate_hz > 0.0))
    throw ConfigError("manual: speed, duration and rate must be > 0");
  if (repeats < 1) throw ConfigError("manual: repeats must be >= 1");
  if (!std::isfinite(mean_offset)) throw ConfigError("manual: mean_offset must be finite");
}

namespace {

// Exact discretisation of the OU process.
struct Ou {
  double x = 0.0;
  double decay = 0.0, kick = 0.0;

  Ou(double sigma, double tau, double dt) : decay(std::exp(-dt / tau)), kick(sigma * std::sqrt(1.0 - decay * decay)) {}

  double step(Rng& rng, std::normal_distribution<double>& n) {
    x = decay * x + kick * n(rng);
    return x;
  }
};

double triangle(double u) {
  const double f = u - 2.0 * std::floor(u / 2.0);
  return f <= 1.0 ? f : 2.0 - f;
}

}  // namespace

std::vector<TrialLog> simulate_manual_scan(const SceneState& scene, const ManualOperatorModel& op,
                                           const ScanRegion& region, const TissueOpticalModel& optics,
                                           std::uint64_t seed) {
  op.validate();
  const TissueSurface& surf = *scene.surface;
  if (!surf.contains(region.from(0), region.from(1)) || !surf.contains(region.to(0), region.to(1)))
    throw ConfigError("manual: scan region must lie on the tissue");
  const Vec2 span = region.to - region.from;
  const double length = span.norm();
  if (!(length > 0.0)) throw ConfigError("manual: scan region is degenerate");
  const Vec2 along = span / length;
  const Vec2 across(-along(1), along(0));

  const double dt = 1.0 / op.rate_hz;
  const int n = static_cast<int>(std::floor(op.duration / dt + 1e-9));
  const Vec2 lo = surf.origin() + Vec2::Constant(1e-6);
  const Vec2 hi = surf.extent_max() - Vec2::Constant(1e-6);
  ScanCommand command;
  command.start = project(scene.third_person, Vec3(region.from(0), region.from(1), surf.height(region.from(0), region.from(1))));
  command.end = project(scene.third_person, Vec3(region.to(0), region.to(1), surf.height(region.to(0), region.to(1))));

  std::vector<TrialLog> logs;
  for (int rep = 0; rep < op.repeats; ++rep) {
    Rng rng = make_stream(seed, "operator", static_cast<std::uint64_t>(rep));
    Rng spectrum_rng = make_stream(seed, "manual-spectra", static_cast<std::uint64_t>(rep));
    std::normal_distribution<double> normal(0.0, 1.0);
    Ou hand(op.sigma_hand, op.tau_hand, dt), wobble_a(op.sigma_xy, op.tau_xy, dt), wobble_c(op.sigma_xy, op.tau_xy, dt);

    TrialLog log;
    log.id = "manual_" + std::to_string(rep);
    log.kind = "manual";
    log.seed = seed;
    log.dt = dt;
    log.command = command;
    log.final_stage = Stage::Done;
    log.white = optics.white();
    log.dark = optics.dark();

    for (int i = 0; i <= n; ++i) {
      const double t = i * dt;
      const Vec2 nominal = region.from + span * triangle(op.speed * t / length);
      Vec2 xy = nominal + along * wobble_a.step(rng, normal) + across * wobble_c.step(rng, normal);
      xy = xy.cwiseMax(lo).cwiseMin(hi);
      const double g = surf.height(xy(0), xy(1));
      const double h = std::max(op.mean_offset + hand.step(rng, normal), -surf.max_compression());

      SceneState s = scene;
      s.pose.position = Vec3(xy(0), xy(1), g + h);
      s.time = t;
      TrialTick row;
      row.tick = i;
      row.t = t;
      row.stage = Stage::Scanning;
      row.advancing = true;
      row.position = s.pose.position;
      row.h_true = h;
      row.h_meas = h;
      row.s_true = ground_truth_features(s).stacked();
      row.s_raw = row.s_true;
      row.s_filt = row.s_true;
      row.light_seen = true;
      row.target = command.start + (command.end - command.start) * triangle(op.speed * t / length);
      Spectrum raw = synthesize_raw(optics, surf.material(xy(0), xy(1)).fingerprint, h, spectrum_rng);
      raw.id = log.id + "_t" + std::to_string(i);
      row.spectrum = static_cast<int>(log.spectra.size());
      log.spectra.push_back(std::move(raw));
      log.ticks.push_back(row);
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace drs
