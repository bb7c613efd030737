#include "drs/perception.hpp"

#include <cmath>
#include <numbers>

namespace drs {

void FeatureNoiseModel::validate() const {
  if (!(sigma_pixel >= 0.0)) throw ConfigError("feature noise: sigma_pixel must be >= 0");
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0))
    throw ConfigError("feature noise: dropout_prob must be in [0, 1)");
}

namespace {

Pixel jitter(const Pixel& p, double sigma, Rng& rng) {
  if (sigma == 0.0) return p;
  std::normal_distribution<double> n(0.0, sigma);
  const double du = n(rng);
  const double dv = n(rng);
  return p + Pixel(du, dv);
}

}  // namespace

std::optional<FeatureVector> measure_features(const SceneState& state, const FeatureNoiseModel& noise,
                                              Rng& rng) {
  const GroundTruthFeatures truth = ground_truth_features(state);
  // Draw order is fixed (dropout, tip, light) so streams stay aligned.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool dropped = noise.dropout_prob > 0.0 && u(rng) < noise.dropout_prob;
  const Pixel tip = jitter(truth.tip, noise.sigma_pixel, rng);
  Pixel light = jitter(truth.light, noise.sigma_pixel, rng);
  if (dropped) return std::nullopt;
  if (contact_height(state).h < noise.glare_height) light = tip;
  FeatureVector f;
  f.s << tip, light;
  f.timestamp = state.time;
  return f;
}

Pixel measure_tip(const SceneState& state, const FeatureNoiseModel& noise, Rng& rng) {
  return jitter(ground_truth_features(state).tip, noise.sigma_pixel, rng);
}

KalmanTrack KalmanTrack::start(const Pixel& z, double q, double r, double velocity_sigma) {
  KalmanTrack t;
  t.q = q;
  t.r = r;
  t.initial_velocity_sigma = velocity_sigma;
  t.x << z, 0.0, 0.0;
  t.P = Vec4(r, r, velocity_sigma * velocity_sigma, velocity_sigma * velocity_sigma).asDiagonal();
  t.initialized = true;
  return t;
}

KalmanStep kf_step(const KalmanTrack& track, const std::optional<Pixel>& z, double dt) {
  if (!(dt > 0.0)) throw DomainError("kf_step: dt must be > 0");
  if (!track.initialized) {
    if (!z) throw NumericError("kf_step: track not initialised and no measurement");
    KalmanStep s;
    s.track = KalmanTrack::start(*z, track.q, track.r, track.initial_velocity_sigma);
    s.position = *z;
    s.velocity = Vec2::Zero();
    s.updated = true;
    return s;
  }

  Mat4 F = Mat4::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;
  const double dt2 = dt * dt, dt3 = dt2 * dt;
  Mat4 Q = Mat4::Zero();
  Q(0, 0) = Q(1, 1) = dt3 / 3.0;
  Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = dt2 / 2.0;
  Q(2, 2) = Q(3, 3) = dt;
  Q *= track.q;

  KalmanStep out;
  out.track = track;
  KalmanTrack& t = out.track;
  t.x = F * track.x;
  t.P = F * track.P * F.transpose() + Q;

  if (z) {
    Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
    H(0, 0) = H(1, 1) = 1.0;
    const Eigen::Matrix2d S = H * t.P * H.transpose() + track.r * Eigen::Matrix2d::Identity();
    const Eigen::Matrix<double, 4, 2> K = t.P * H.transpose() * S.inverse();
    t.x += K * (*z - H * t.x);
    // Joseph form keeps P symmetric PSD up to rounding.
    const Mat4 IKH = Mat4::Identity() - K * H;
    t.P = IKH * t.P * IKH.transpose() + track.r * K * K.transpose();
    out.updated = true;
  }

  t.P = 0.5 * (t.P + t.P.transpose());
  Eigen::SelfAdjointEigenSolver<Mat4> eig(t.P);
  if (eig.eigenvalues().minCoeff() < 0.0) {
    const Vec4 clamped = eig.eigenvalues().cwiseMax(0.0);
    t.P = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    t.P = 0.5 * (t.P + t.P.transpose());
    ++t.repairs;
    out.repaired = true;
  }

  out.position = t.x.head<2>();
  out.velocity = t.x.tail<2>();
  return out;
}

double HeightNoiseProfile::sigma(double h) const {
  return sigma0 + sigma_peak * std::exp(-(h / peak_width) * (h / peak_width));
}

const HeightNoiseProfile& HeightSensorModel::profile(const std::string& id) const {
  auto it = profiles.find(id);
  if (it == profiles.end()) throw ConfigError("height sensor: unknown noise profile '" + id + "'");
  return it->second;
}

HeightSensorModel HeightSensorModel::standard() {
  // Gaussian error with sigma s has mean absolute value s * sqrt(2/pi).
  const double mae_to_sigma = std::sqrt(std::numbers::pi / 2.0);
  HeightSensorModel m;
  m.profiles["lamb_liver"] = {0.06 * mae_to_sigma, 0.0, 1.0, 0.0};
  m.profiles["liver_phantom"] = {0.05, 0.20, 2.0, 0.0};
  m.profiles["stomach_phantom"] = {0.08, 0.0, 1.0, 0.0};
  m.profiles["rump_steak"] = {0.07, 0.0, 1.0, 0.0};
  m.profiles["spectrum_based"] = {1.12 * mae_to_sigma, 0.0, 1.0, 0.0};
  m.profiles["ideal"] = {0.0, 0.0, 1.0, 0.0};
  return m;
}

double measure_height(const SceneState& state, const HeightSensorModel& model, Rng& rng) {
  const ContactState c = contact_height(state);
  const auto& material = state.surface->material_table()[static_cast<std::size_t>(c.material)];
  const HeightNoiseProfile& p = model.profile(material.noise_profile);
  const double sigma = p.sigma(c.h);
  double eps = 0.0;
  if (sigma > 0.0) eps = std::normal_distribution<double>(0.0, sigma)(rng);
  return c.h + p.bias + eps;
}

}  // namespace drs
