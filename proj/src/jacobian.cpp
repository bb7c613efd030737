#include "drs/jacobian.hpp"

#include "drs/hash.hpp"
#include "drs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace drs {

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

std::size_t TrajectoryDataset::size() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.samples.size();
  return n;
}

std::vector<Vec4> TrajectoryDataset::features() const {
  std::vector<Vec4> out;
  out.reserve(size());
  for (const auto& e : episodes)
    for (const auto& s : e.samples) out.push_back(s.s);
  return out;
}

std::vector<TrajectorySample> TrajectoryDataset::flatten() const {
  std::vector<TrajectorySample> out;
  out.reserve(size());
  for (const auto& e : episodes) out.insert(out.end(), e.samples.begin(), e.samples.end());
  return out;
}

std::string TrajectoryDataset::fingerprint() const {
  std::string bytes;
  auto put = [&bytes](const auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double d = m(i);
      bytes.append(reinterpret_cast<const char*>(&d), sizeof d);
    }
  };
  bytes += difference_scheme;
  for (const auto& e : episodes) {
    bytes += e.name;
    for (const auto& s : e.samples) {
      bytes.append(reinterpret_cast<const char*>(&s.t), sizeof s.t);
      put(s.s);
      put(s.s_dot);
      put(s.x);
      put(s.v);
    }
  }
  return sha1_hex(bytes);
}

ExcitationPolicy ExcitationPolicy::lissajous_and_chirps(const SceneState& scene, const Vec2& centre,
                                                        const Vec2& half_extent, double phase) {
  ExcitationPolicy p;
  const double base = scene.surface->height(centre(0), centre(1));
  const double ax = half_extent(0), ay = half_extent(1);
  // Peak speed sqrt((ax wx)^2 + (ay wy)^2 + (az wz)^2) stays under the 10 mm/s
  // limit for the default +-45 x 30 mm extent. Height bands overlap so the
  // 2-26 mm range is covered without gaps.
  const double wx = 0.17, wy = 0.13, wz = 0.9, az = 3.5;
  for (double height : {5.5, 12.0, 18.5, 25.0}) {
    EpisodeScript e;
    e.name = "lissajous_h" + std::to_string(static_cast<int>(height));
    e.start = Vec3(centre(0), centre(1), base + height);
    e.duration = 60.0;
    e.offset = [=](double t) {
      return Vec3(ax * std::sin(wx * t + phase), ay * std::sin(wy * t + 2.0 * phase),
                  az * std::sin(wz * t + 3.0 * phase));
    };
    p.episodes.push_back(std::move(e));
  }
  // Vertical chirps z = 15 + 11 sin(2 pi (f0 t + (f1 - f0) t^2 / (2 T))) with a
  // small lateral circle so every chirp excites all three axes.
  const double f0 = 0.02, f1 = 0.12, T = 20.0;
  const std::vector<Vec2> spots = {{0, 0}, {0.5, 0.5}, {-0.5, 0.5}, {0.5, -0.5}, {-0.5, -0.5}};
  int idx = 0;
  for (const Vec2& f : spots) {
    const double x = centre(0) + f(0) * ax;
    const double y = centre(1) + f(1) * ay;
    EpisodeScript e;
    e.name = "chirp_" + std::to_string(idx++);
    e.start = Vec3(x, y, scene.surface->height(x, y) + 15.0);
    e.duration = T;
    e.offset = [=](double t) {
      const double chirp = 2.0 * std::numbers::pi * (f0 * t + (f1 - f0) * t * t / (2.0 * T)) + phase;
      return Vec3(2.0 * std::sin(0.7 * t), 2.0 * (1.0 - std::cos(0.7 * t)), 11.0 * std::sin(chirp));
    };
    p.episodes.push_back(std::move(e));
  }
  return p;
}

ExcitationPolicy ExcitationPolicy::local(const Vec3& centre, double amplitude, double duration, double phase) {
  ExcitationPolicy p;
  EpisodeScript e;
  e.name = "local";
  e.start = centre;
  e.duration = duration;
  e.offset = [=](double t) {
    return Vec3(amplitude * std::sin(0.9 * t + phase), amplitude * std::sin(1.3 * t + 0.5 + 2.0 * phase),
                amplitude * std::sin(1.7 * t + 1.1 + 3.0 * phase));
  };
  p.episodes.push_back(std::move(e));
  return p;
}

ExcitationPolicy ExcitationPolicy::vertical_sweeps(const SceneState& scene, const Vec2& centre,
                                                   const Vec2& half_extent, int up, int down) {
  ExcitationPolicy p;
  const double speed = 5.0;
  const double maxc = scene.surface->max_compression();
  const int total = up + down;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total))));
  for (int n = 0; n < total; ++n) {
    const int i = n % cols, j = n / cols;
    const double fx = cols > 1 ? 2.0 * i / (cols - 1) - 1.0 : 0.0;
    const double fy = cols > 1 ? 2.0 * j / (cols - 1) - 1.0 : 0.0;
    const double x = centre(0) + fx * half_extent(0);
    const double y = centre(1) + fy * half_extent(1);
    const double g = scene.surface->height(x, y);
    EpisodeScript e;
    if (n < up) {
      e.name = "up_" + std::to_string(n);
      e.start = Vec3(x, y, g);
      e.duration = 40.0 / speed;
      e.offset = [=](double t) { return Vec3(0, 0, speed * t); };
    } else {
      e.name = "down_" + std::to_string(n - up);
      e.start = Vec3(x, y, g + 10.0 - maxc);
      e.duration = 10.0 / speed;
      e.offset = [=](double t) { return Vec3(0, 0, -speed * t); };
    }
    p.episodes.push_back(std::move(e));
  }
  return p;
}

ExcitationPolicy ExcitationPolicy::hold(const Vec3& position, double duration) {
  ExcitationPolicy p;
  p.episodes.push_back({"hold", position, duration, [](double) { return Vec3::Zero().eval(); }});
  return p;
}

TrajectoryDataset collect_dataset(const SceneState& scene, const ExcitationPolicy& policy, double dt) {
  if (!(dt > 0.0)) throw ConfigError("collect_dataset: dt must be > 0");
  TrajectoryDataset data;
  for (const auto& script : policy.episodes) {
    Episode ep;
    ep.name = script.name;
    SceneState state = scene;
    state.time = 0.0;
    state.pose.position = script.start + script.offset(0.0);
    const int n = static_cast<int>(std::floor(script.duration / dt + 1e-9));
    std::vector<double> ts;
    std::vector<Vec4> ss;
    std::vector<Vec3> xs;
    for (int i = 0; i <= n; ++i) {
      try {
        ss.push_back(ground_truth_features(state).stacked());
      } catch (const DomainError& e) {
        ep.truncated = true;
        ep.note = "truncated at t=" + std::to_string(i * dt) + ": " + e.what();
        break;
      }
      ts.push_back(i * dt);
      xs.push_back(state.pose.position);
      if (i == n) break;
      const Vec3 target = script.start + script.offset((i + 1) * dt);
      state = step(state, (target - state.pose.position) / dt, dt);
    }
    const std::size_t m = ss.size();
    if (m < 2) {
      ep.truncated = true;
      if (ep.note.empty()) ep.note = "fewer than two samples";
      data.episodes.push_back(std::move(ep));
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t lo = i == 0 ? 0 : i - 1;
      const std::size_t hi = i + 1 == m ? m - 1 : i + 1;
      const double span = ts[hi] - ts[lo];
      TrajectorySample s;
      s.t = ts[i];
      s.s = ss[i];
      s.x = xs[i];
      s.s_dot = (ss[hi] - ss[lo]) / span;
      s.v = (xs[hi] - xs[lo]) / span;
      ep.samples.push_back(s);
    }
    data.episodes.push_back(std::move(ep));
  }
  return data;
}

// ---------------------------------------------------------------------------
// GMM
// ---------------------------------------------------------------------------

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct ComponentCache {
  Eigen::LLT<Mat4> llt;
  double log_norm;  // log pi - 0.5 (log det + d log 2 pi)
};

std::vector<ComponentCache> cache_components(const GmmModel& m) {
  std::vector<ComponentCache> c;
  c.reserve(m.weights.size());
  for (int k = 0; k < m.K(); ++k) {
    Eigen::LLT<Mat4> llt(m.covariances[k]);
    if (llt.info() != Eigen::Success) throw NumericError("gmm: covariance not positive definite");
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    c.push_back({llt, std::log(m.weights[k]) - 0.5 * (logdet + 4.0 * kLog2Pi)});
  }
  return c;
}

void log_joint_into(const GmmModel& m, const std::vector<ComponentCache>& c, const Vec4& s, VecX& out) {
  out.resize(m.K());
  for (int k = 0; k < m.K(); ++k) {
    const Vec4 d = s - m.means[k];
    const Vec4 y = c[k].llt.matrixL().solve(d);
    out(k) = c[k].log_norm - 0.5 * y.squaredNorm();
  }
}

double log_sum_exp(const VecX& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a.array() - m).exp().sum());
}

Mat4 covariance_of(const std::vector<Vec4>& pts, const Vec4& mean) {
  Mat4 c = Mat4::Zero();
  for (const auto& p : pts) c += (p - mean) * (p - mean).transpose();
  return c / static_cast<double>(pts.size());
}

Vec4 mean_of(const std::vector<Vec4>& pts) {
  Vec4 m = Vec4::Zero();
  for (const auto& p : pts) m += p;
  return m / static_cast<double>(pts.size());
}

std::size_t farthest_point(const std::vector<Vec4>& pts, const std::vector<Vec4>& centres) {
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& c : centres) d = std::min(d, (pts[i] - c).squaredNorm());
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

VecX GmmModel::log_joint(const Vec4& s) const {
  VecX out;
  log_joint_into(*this, cache_components(*this), s, out);
  return out;
}

VecX GmmModel::posteriors(const Vec4& s) const {
  const VecX lj = log_joint(s);
  return (lj.array() - log_sum_exp(lj)).exp();
}

int GmmModel::argmax(const Vec4& s) const {
  Eigen::Index k = 0;
  log_joint(s).maxCoeff(&k);
  return static_cast<int>(k);
}

double GmmModel::mean_log_likelihood(const std::vector<Vec4>& points) const {
  const auto c = cache_components(*this);
  VecX lj;
  double ll = 0.0;
  for (const auto& p : points) {
    log_joint_into(*this, c, p, lj);
    ll += log_sum_exp(lj);
  }
  return ll / static_cast<double>(points.size());
}

bool GmmFitResult::monotone() const {
  for (std::size_t i = 1; i < log_likelihood.size(); ++i) {
    const double prev = log_likelihood[i - 1];
    if (log_likelihood[i] < prev - 1e-10 * std::max(1.0, std::abs(prev))) return false;
  }
  return true;
}

std::vector<Vec4> kmeans_pp_init(const std::vector<Vec4>& points, int K, std::uint64_t seed) {
  if (points.empty()) throw ConfigError("kmeans++: empty point set");
  Rng rng = make_stream(seed, "kmeans++");
  std::vector<Vec4> centres;
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  centres.push_back(points[pick(rng)]);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (static_cast<int>(centres.size()) < K) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], (points[i] - centres.back()).squaredNorm());
      total += d2[i];
    }
    if (!(total > 0.0)) {
      centres.push_back(points[pick(rng)]);
      continue;
    }
    const double target = u(rng) * total;
    double acc = 0.0;
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      acc += d2[i];
      if (acc >= target) {
        chosen = i;
        break;
      }
    }
    centres.push_back(points[chosen]);
  }
  return centres;
}

GmmFitResult fit_gmm(const std::vector<Vec4>& features, const GmmFitOptions& options) {
  const int K = options.K;
  if (K < 1) throw ConfigError("fit_gmm: K must be >= 1");
  const std::size_t N = features.size();
  if (N < 10 * static_cast<std::size_t>(K))
    throw ConfigError("fit_gmm: need at least 10*K points (have " + std::to_string(N) + ")");

  const Mat4 floor = options.cov_floor * Mat4::Identity();
  const Vec4 gmean = mean_of(features);
  const Mat4 gcov = covariance_of(features, gmean) + floor;

  GmmFitResult res;
  GmmModel& m = res.model;
  m.means = kmeans_pp_init(features, K, options.seed);
  m.covariances.assign(K, gcov);
  m.weights.assign(K, 1.0 / K);

  MatX resp(N, K);
  VecX lj;
  for (int it = 0; it < options.max_iter; ++it) {
    // E-step
    const auto cache = cache_components(m);
    double ll = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      log_joint_into(m, cache, features[i], lj);
      const double lse = log_sum_exp(lj);
      ll += lse;
      resp.row(static_cast<Eigen::Index>(i)) = (lj.array() - lse).exp().transpose();
    }
    const double ll_mean = ll / static_cast<double>(N);
    res.log_likelihood.push_back(ll_mean);
    res.iterations = it + 1;
    if (it > 0) {
      const double gain = ll_mean - res.log_likelihood[res.log_likelihood.size() - 2];
      if (gain < options.tol) {
        res.converged = true;
        break;
      }
    }

    // M-step
    bool reseeded = false;
    for (int k = 0; k < K; ++k) {
      const double nk = resp.col(k).sum();
      if (nk < 1e-8 * static_cast<double>(N)) {
        if (res.reseeds >= options.max_reseeds)
          throw NumericError("fit_gmm: component " + std::to_string(k) +
                             " stayed empty after " + std::to_string(res.reseeds) + " re-seeds");
        m.means[k] = features[farthest_point(features, m.means)];
        m.covariances[k] = gcov;
        m.weights[k] = 1.0 / K;
        ++res.reseeds;
        reseeded = true;
        continue;
      }
      Vec4 mu = Vec4::Zero();
      for (std::size_t i = 0; i < N; ++i) mu += resp(static_cast<Eigen::Index>(i), k) * features[i];
      mu /= nk;
      Mat4 cov = Mat4::Zero();
      for (std::size_t i = 0; i < N; ++i) {
        const Vec4 d = features[i] - mu;
        cov += resp(static_cast<Eigen::Index>(i), k) * d * d.transpose();
      }
      m.means[k] = mu;
      m.covariances[k] = cov / nk + floor;
      m.weights[k] = nk / static_cast<double>(N);
    }
    if (reseeded) {
      double total = 0.0;
      for (double w : m.weights) total += w;
      for (double& w : m.weights) w /= total;
      // The likelihood trace restarts after a re-seed.
      res.log_likelihood.clear();
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Local least squares
// ---------------------------------------------------------------------------

LocalLinearMap fit_linear_map(const std::vector<const TrajectorySample*>& members,
                              const LlsOptions& options, const std::string& label) {
  const int n = static_cast<int>(members.size());
  if (n < options.min_points)
    throw NumericError(label + ": " + std::to_string(n) + " points, need at least " +
                       std::to_string(options.min_points));
  if (options.rank < 3 || options.rank > 4) throw ConfigError("lls: rank must be 3 or 4");
  Mat4 G = Mat4::Zero();
  Mat34 B = Mat34::Zero();
  for (const auto* s : members) {
    G += s->s_dot * s->s_dot.transpose();
    B += s->v * s->s_dot.transpose();
  }
  // Span check on the unregularised Gram matrix; the ridge would mask it.
  const Vec4 span = Eigen::SelfAdjointEigenSolver<Mat4>(G, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(span(1) > options.rank_tol * span(3))) {
    std::ostringstream os;
    os << label << ": feature velocities span rank < 3 (eigenvalues " << span.transpose() << ")";
    throw NumericError(os.str());
  }
  G += options.ridge * Mat4::Identity();
  Eigen::SelfAdjointEigenSolver<Mat4> eig(G);
  const Vec4 lam = eig.eigenvalues();  // ascending
  Mat4 Ginv = Mat4::Zero();
  for (int i = 4 - options.rank; i < 4; ++i)
    Ginv += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose() / lam(i);

  LocalLinearMap out;
  out.X = B * Ginv;
  out.count = n;
  double sse = 0.0;
  for (const auto* s : members) sse += (s->v - out.X * s->s_dot).squaredNorm();
  out.residual_rms = std::sqrt(sse / n);
  if (!out.X.allFinite()) throw NumericError(label + ": non-finite local map");
  return out;
}

std::vector<LocalLinearMap> fit_local_maps(const TrajectoryDataset& dataset, const GmmModel& gmm,
                                           const LlsOptions& options) {
  const auto samples = dataset.flatten();
  std::vector<std::vector<const TrajectorySample*>> members(static_cast<std::size_t>(gmm.K()));
  const auto cache = cache_components(gmm);
  VecX lj;
  for (const auto& s : samples) {
    log_joint_into(gmm, cache, s.s, lj);
    Eigen::Index k = 0;
    lj.maxCoeff(&k);
    members[static_cast<std::size_t>(k)].push_back(&s);
  }
  std::vector<LocalLinearMap> maps;
  for (int k = 0; k < gmm.K(); ++k)
    maps.push_back(fit_linear_map(members[static_cast<std::size_t>(k)], options,
                                  "cluster " + std::to_string(k)));
  return maps;
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

VecX JacobianEstimator::blend_weights(const Vec4& s) const {
  const VecX z = gmm.posteriors(s) / tau;
  const VecX e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

Mat34 JacobianEstimator::inverse(const Vec4& s) const {
  const VecX w = blend_weights(s);
  Mat34 J = Mat34::Zero();
  for (int k = 0; k < w.size(); ++k) J += w(k) * maps[static_cast<std::size_t>(k)].X;
  return J;
}

JacobianEstimator fit_estimator(const TrajectoryDataset& dataset, const EstimatorFitOptions& options) {
  if (!(options.tau > 0.0)) throw ConfigError("estimator: tau must be > 0");
  JacobianEstimator est;
  est.gmm = fit_gmm(dataset.features(), options.gmm).model;
  est.maps = fit_local_maps(dataset, est.gmm, options.lls);
  est.tau = options.tau;
  est.seed = options.gmm.seed;
  est.dataset_fingerprint = dataset.fingerprint();
  return est;
}

int KMeansLlsEstimator::cluster(const Vec4& s) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    const double d = (s - centroids[k]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

KMeansLlsEstimator baseline_kmeans_lls(const TrajectoryDataset& dataset, int K, std::uint64_t seed,
                                       const LlsOptions& options, int max_iter) {
  if (K < 1) throw ConfigError("kmeans-lls: K must be >= 1");
  const auto samples = dataset.flatten();
  std::vector<Vec4> pts;
  pts.reserve(samples.size());
  for (const auto& s : samples) pts.push_back(s.s);
  if (pts.size() < 10 * static_cast<std::size_t>(K))
    throw ConfigError("kmeans-lls: need at least 10*K points");

  KMeansLlsEstimator est;
  est.centroids = kmeans_pp_init(pts, K, seed);
  std::vector<int> assign(pts.size(), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const int k = est.cluster(pts[i]);
      if (k != assign[i]) {
        assign[i] = k;
        changed = true;
      }
    }
    std::vector<Vec4> sum(static_cast<std::size_t>(K), Vec4::Zero());
    std::vector<int> count(static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sum[static_cast<std::size_t>(assign[i])] += pts[i];
      ++count[static_cast<std::size_t>(assign[i])];
    }
    for (int k = 0; k < K; ++k) {
      if (count[static_cast<std::size_t>(k)] == 0) {
        est.centroids[static_cast<std::size_t>(k)] = pts[farthest_point(pts, est.centroids)];
        changed = true;
      } else {
        est.centroids[static_cast<std::size_t>(k)] = sum[static_cast<std::size_t>(k)] / count[static_cast<std::size_t>(k)];
      }
    }
    if (!changed) break;
  }
  std::vector<std::vector<const TrajectorySample*>> members(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < samples.size(); ++i)
    members[static_cast<std::size_t>(est.cluster(pts[i]))].push_back(&samples[i]);
  for (int k = 0; k < K; ++k)
    est.maps.push_back(fit_linear_map(members[static_cast<std::size_t>(k)], options,
                                      "kmeans cluster " + std::to_string(k)));
  return est;
}

Mat43 analytic_image_jacobian(const SceneState& scene) {
  const Vec3 tip = scene.pose.position;
  const Vec3 light = light_centre_world(scene);
  const Vec2 grad = scene.surface->gradient(tip(0), tip(1));
  Mat3 dlight = Mat3::Zero();
  dlight(0, 0) = 1.0;
  dlight(1, 1) = 1.0;
  dlight(2, 0) = grad(0);
  dlight(2, 1) = grad(1);
  Mat43 J;
  J.topRows<2>() = projection_jacobian(scene.third_person, tip);
  J.bottomRows<2>() = projection_jacobian(scene.third_person, light) * dlight;
  return J;
}

Mat34 analytic_inverse_jacobian(const SceneState& scene) {
  const Mat43 J = analytic_image_jacobian(scene);
  Eigen::JacobiSVD<Mat43> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(2) > 1e-9 * sv(0))) throw NumericError("analytic Jacobian: interaction matrix is singular");
  Mat34 pinv = Mat34::Zero();
  for (int i = 0; i < 3; ++i)
    pinv += svd.matrixV().col(i) * svd.matrixU().col(i).transpose() / sv(i);
  return pinv;
}

double relative_frobenius(const Mat34& estimate, const Mat34& reference) {
  return (estimate - reference).norm() / reference.norm();
}

}  // namespace drs
