#ifndef DRS_JACOBIAN_HPP
#define DRS_JACOBIAN_HPP

#include "drs/scene.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace drs {

// ---------------------------------------------------------------------------
// Exploration dataset
// ---------------------------------------------------------------------------

struct TrajectorySample {
  double t = 0.0;
  Vec4 s = Vec4::Zero();      // features, px
  Vec4 s_dot = Vec4::Zero();  // px/s
  Vec3 x = Vec3::Zero();      // tip position, mm
  Vec3 v = Vec3::Zero();      // mm/s, paired with s_dot over the same stencil
};

struct Episode {
  std::string name;
  std::vector<TrajectorySample> samples;
  bool truncated = false;
  std::string note;
};

/// Features and velocities from scripted excitation. s_dot uses central
/// differences in the interior and one-sided differences at the two ends;
/// v is differenced over the same stencil from executed tip positions.
struct TrajectoryDataset {
  std::vector<Episode> episodes;
  std::string difference_scheme = "central";

  std::size_t size() const;
  std::vector<Vec4> features() const;
  std::vector<TrajectorySample> flatten() const;
  /// SHA-1 over the sample values; identifies the dataset in estimator files.
  std::string fingerprint() const;
};

/// Scripted tip trajectory for one episode: offset(t) is added to `start`.
struct EpisodeScript {
  std::string name;
  Vec3 start;
  double duration = 0.0;
  std::function<Vec3(double)> offset;
};

struct ExcitationPolicy {
  std::vector<EpisodeScript> episodes;

  /// Lissajous x-y sweeps at four overlapping height bands plus vertical
  /// chirps at a few spots. A non-zero phase shifts every sweep, giving a
  /// held-out trajectory over the same region.
  static ExcitationPolicy lissajous_and_chirps(const SceneState& scene, const Vec2& centre,
                                               const Vec2& half_extent, double phase = 0.0);
  /// Small 3-D Lissajous around a tip position; keeps the map in its linear regime.
  static ExcitationPolicy local(const Vec3& centre, double amplitude, double duration = 20.0,
                                double phase = 0.0);
  /// Height-sensor style sweeps: `up` rises 40 mm from contact, `down` descends
  /// 10 mm ending at full compression, spread over a grid of x-y spots.
  static ExcitationPolicy vertical_sweeps(const SceneState& scene, const Vec2& centre,
                                          const Vec2& half_extent, int up = 23, int down = 22);
  static ExcitationPolicy hold(const Vec3& position, double duration);
};

TrajectoryDataset collect_dataset(const SceneState& scene, const ExcitationPolicy& policy, double dt);

// ---------------------------------------------------------------------------
// Gaussian mixture over the 4-D feature space
// ---------------------------------------------------------------------------

struct GmmModel {
  std::vector<double> weights;
  std::vector<Vec4> means;
  std::vector<Mat4> covariances;

  int K() const { return static_cast<int>(weights.size()); }
  /// Per-component log(pi_k N(s | mu_k, Sigma_k)).
  VecX log_joint(const Vec4& s) const;
  /// p(z_k = 1 | s).
  VecX posteriors(const Vec4& s) const;
  int argmax(const Vec4& s) const;
  double mean_log_likelihood(const std::vector<Vec4>& points) const;
};

struct GmmFitOptions {
  int K = 5;
  std::uint64_t seed = 0;
  double tol = 1e-6;  // on the mean per-point log-likelihood gain
  int max_iter = 300;
  double cov_floor = 1e-6;
  int max_reseeds = 10;
};

struct GmmFitResult {
  GmmModel model;
  std::vector<double> log_likelihood;  // mean per point, one entry per E-step
  int iterations = 0;
  int reseeds = 0;
  bool converged = false;
  /// True when the trace never decreased beyond float noise (1e-10 relative).
  bool monotone() const;
};

GmmFitResult fit_gmm(const std::vector<Vec4>& features, const GmmFitOptions& options);

/// k-means++ seeding shared by the GMM and k-means baselines.
std::vector<Vec4> kmeans_pp_init(const std::vector<Vec4>& points, int K, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Local least squares
// ---------------------------------------------------------------------------

struct LlsOptions {
  double ridge = 1e-8;
  // Dimension of the s_dot subspace the map is fitted on. Feature velocities
  // of a 3-DOF probe lie on a 3-D subspace, so the default discards the
  // direction that is only excited by projection curvature. 4 gives plain
  // ridge-regularised least squares.
  int rank = 3;
  int min_points = 8;
  double rank_tol = 1e-10;  // relative eigenvalue floor for the kept subspace
};

struct LocalLinearMap {
  Mat34 X = Mat34::Zero();
  double residual_rms = 0.0;  // mm/s
  int count = 0;
};

/// X = argmin sum ||v_i - X s_dot_i||^2 over the given samples.
LocalLinearMap fit_linear_map(const std::vector<const TrajectorySample*>& members,
                              const LlsOptions& options, const std::string& label = "cluster");

/// One map per GMM component, members chosen by posterior argmax.
std::vector<LocalLinearMap> fit_local_maps(const TrajectoryDataset& dataset, const GmmModel& gmm,
                                           const LlsOptions& options = {});

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Source of the inverse image Jacobian used by the IBVS law. Learned models
/// depend on the features only; the analytic model reads scene ground truth.
class JacobianModel {
 public:
  virtual ~JacobianModel() = default;
  virtual Mat34 inverse(const Vec4& s, const SceneState& truth) const = 0;
  virtual std::string name() const = 0;
};

/// GMM-LLS: softmax(p(z_k | s) / tau)-weighted blend of the local maps.
class JacobianEstimator final : public JacobianModel {
 public:
  GmmModel gmm;
  std::vector<LocalLinearMap> maps;
  double tau = 1.0;
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;

  VecX blend_weights(const Vec4& s) const;
  Mat34 inverse(const Vec4& s) const;
  Mat34 inverse(const Vec4& s, const SceneState&) const override { return inverse(s); }
  std::string name() const override { return "gmm-lls"; }
};

struct EstimatorFitOptions {
  GmmFitOptions gmm;
  LlsOptions lls;
  double tau = 1.0;
};

JacobianEstimator fit_estimator(const TrajectoryDataset& dataset, const EstimatorFitOptions& options);

/// KMeans-LLS baseline: hard switching to the map of the nearest centroid.
class KMeansLlsEstimator final : public JacobianModel {
 public:
  std::vector<Vec4> centroids;
  std::vector<LocalLinearMap> maps;

  int cluster(const Vec4& s) const;
  Mat34 inverse(const Vec4& s) const { return maps[static_cast<std::size_t>(cluster(s))].X; }
  Mat34 inverse(const Vec4& s, const SceneState&) const override { return inverse(s); }
  std::string name() const override { return "kmeans-lls"; }
};

KMeansLlsEstimator baseline_kmeans_lls(const TrajectoryDataset& dataset, int K, std::uint64_t seed,
                                       const LlsOptions& options = {}, int max_iter = 300);

/// 4x3 interaction matrix d s / d x of the stacked tip and light-centre
/// projections at the scene's current configuration.
Mat43 analytic_image_jacobian(const SceneState& scene);
/// Moore-Penrose pseudo-inverse of the interaction matrix.
Mat34 analytic_inverse_jacobian(const SceneState& scene);

class AnalyticJacobian final : public JacobianModel {
 public:
  Mat34 inverse(const Vec4&, const SceneState& truth) const override {
    return analytic_inverse_jacobian(truth);
  }
  std::string name() const override { return "analytic"; }
};

double relative_frobenius(const Mat34& estimate, const Mat34& reference);

}  // namespace drs

#endif  // DRS_JACOBIAN_HPP
