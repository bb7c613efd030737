#include <doctest.h>

#include "drs/jacobian.hpp"
#include "drs/jacobian_io.hpp"
#include "drs/presets.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace drs;

namespace {

const double kDt = 1.0 / 30.0;

SceneState flat_scene() { return default_scene("liver_phantom"); }

// Samples with v = X s_dot exactly for random full-rank s_dot.
std::vector<TrajectorySample> exact_samples(const Mat34& X, int n, std::uint64_t seed) {
  Rng rng = make_stream(seed, "test");
  std::normal_distribution<double> g(0.0, 10.0);
  std::vector<TrajectorySample> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.s_dot = Vec4(g(rng), g(rng), g(rng), g(rng));
    s.v = X * s.s_dot;
  }
  return out;
}

std::vector<const TrajectorySample*> pointers(const std::vector<TrajectorySample>& v) {
  std::vector<const TrajectorySample*> p;
  for (const auto& s : v) p.push_back(&s);
  return p;
}

std::vector<Vec4> two_blobs(const Vec4& a, const Vec4& b, int n, std::uint64_t seed) {
  Rng rng = make_stream(seed, "blobs");
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec4> pts;
  for (int i = 0; i < n; ++i) {
    const Vec4& c = (i % 2 == 0) ? a : b;
    pts.push_back(c + Vec4(g(rng), g(rng), g(rng), g(rng)));
  }
  return pts;
}

}  // namespace

TEST_CASE("dataset collection") {
  const SceneState scene = flat_scene();

  SUBCASE("zero velocity episode gives zero feature velocity") {
    const auto data = collect_dataset(scene, ExcitationPolicy::hold(Vec3(0, 0, 12), 2.0), kDt);
    REQUIRE(data.size() == 61);
    for (const auto& s : data.flatten()) CHECK(s.s_dot == Vec4::Zero());
  }
  SUBCASE("constant lateral velocity matches the analytic feature velocity") {
    ExcitationPolicy p;
    p.episodes.push_back({"line", Vec3(-20, 0, 15), 4.0, [](double t) { return Vec3(t, 0, 0); }});
    const auto data = collect_dataset(scene, p, kDt);
    const auto& samples = data.episodes.front().samples;
    for (std::size_t i = 1; i + 1 < samples.size(); ++i) {
      SceneState at = scene;
      at.pose.position = samples[i].x;
      const Vec4 expect = analytic_image_jacobian(at) * Vec3(1, 0, 0);
      CHECK((samples[i].s_dot - expect).norm() < 1e-4 * expect.norm());
      CHECK((samples[i].v - Vec3(1, 0, 0)).norm() < 1e-9);
    }
    for (std::size_t i = 1; i < samples.size(); ++i) CHECK(samples[i].t > samples[i - 1].t);
  }
  SUBCASE("vertical sweep preset has 23 up and 22 down episodes") {
    const auto p = ExcitationPolicy::vertical_sweeps(scene, kExcitationCentre, kExcitationHalfExtent);
    int up = 0, down = 0;
    for (const auto& e : p.episodes) {
      if (e.name.rfind("up", 0) == 0) ++up;
      if (e.name.rfind("down", 0) == 0) ++down;
    }
    CHECK(up == 23);
    CHECK(down == 22);
  }
  SUBCASE("episodes leaving the image are truncated") {
    ExcitationPolicy p;
    p.episodes.push_back({"away", Vec3(0, 0, 10), 30.0, [](double t) { return Vec3(0, 0, 30.0 * t); }});
    const auto data = collect_dataset(scene, p, kDt);
    CHECK(data.episodes.front().truncated);
    CHECK_FALSE(data.episodes.front().note.empty());
  }
  SUBCASE("fingerprint is stable and content-sensitive") {
    const auto a = collect_dataset(scene, ExcitationPolicy::local(Vec3(0, 0, 10), 0.5, 2.0), kDt);
    const auto b = collect_dataset(scene, ExcitationPolicy::local(Vec3(0, 0, 10), 0.5, 2.0), kDt);
    const auto c = collect_dataset(scene, ExcitationPolicy::local(Vec3(0, 0, 10), 0.6, 2.0), kDt);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
    CHECK(a.fingerprint().size() == 40);
  }
}

TEST_CASE("analytic interaction matrix") {
  const SceneState base = flat_scene();

  SUBCASE("matches central differences of the ground-truth features") {
    for (const Vec3& p : {Vec3(0, 0, 10), Vec3(-30, 15, 25), Vec3(20, -10, 3)}) {
      SceneState s = base;
      s.pose.position = p;
      const Mat43 J = analytic_image_jacobian(s);
      const double h = 1e-4;
      Mat43 fd;
      for (int c = 0; c < 3; ++c) {
        SceneState a = s, b = s;
        a.pose.position(c) += h;
        b.pose.position(c) -= h;
        fd.col(c) = (ground_truth_features(a).stacked() - ground_truth_features(b).stacked()) / (2 * h);
      }
      CHECK((fd - J).norm() < 1e-6 * J.norm());
    }
  }
  SUBCASE("relief surface includes the slope of the light centre") {
    SceneState s = default_scene("rump_steak");
    s.pose.position = Vec3(7, 3, 12);
    const Mat43 J = analytic_image_jacobian(s);
    const double h = 1e-5;
    SceneState a = s, b = s;
    a.pose.position(0) += h;
    b.pose.position(0) -= h;
    const Vec4 fd = (ground_truth_features(a).stacked() - ground_truth_features(b).stacked()) / (2 * h);
    CHECK((fd - J.col(0)).norm() < 1e-5 * J.norm());
  }
  SUBCASE("downward camera: lateral feature velocity is f/Z times the velocity") {
    SceneState s = base;
    s.third_person = look_at(Vec3(0, 0, 300), Vec3(0, 0, 0), Vec3(1, 0, 0), 900.0, 1280, 720);
    s.pose.position = Vec3(30, 10, 20);
    const Mat43 J = analytic_image_jacobian(s);
    CHECK(std::abs(J(0, 0)) == doctest::Approx(900.0 / 280.0).epsilon(1e-12));
    CHECK(std::abs(J(2, 0)) == doctest::Approx(900.0 / 300.0).epsilon(1e-12));
    const Vec3 v(1.5, -2.0, 0.0);
    CHECK((analytic_inverse_jacobian(s) * (J * v) - v).norm() < 1e-12);
  }
  SUBCASE("pseudo-inverse identity") {
    SceneState s = base;
    s.pose.position = Vec3(5, 5, 8);
    const Mat43 J = analytic_image_jacobian(s);
    CHECK((analytic_inverse_jacobian(s) * J - Mat3::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("EM fitting") {
  SUBCASE("K = 1 is the sample mean and covariance") {
    const auto pts = two_blobs(Vec4(0, 0, 0, 0), Vec4(3, 1, -2, 5), 400, 1);
    GmmFitOptions o;
    o.K = 1;
    const auto r = fit_gmm(pts, o);
    Vec4 mean = Vec4::Zero();
    for (const auto& p : pts) mean += p;
    mean /= pts.size();
    Mat4 cov = Mat4::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    cov /= pts.size();
    CHECK((r.model.means[0] - mean).norm() < 1e-12);
    CHECK((r.model.covariances[0] - cov - o.cov_floor * Mat4::Identity()).norm() < 1e-10);
    CHECK(r.model.weights[0] == 1.0);
  }
  SUBCASE("two separated blobs are recovered within 1%") {
    const Vec4 a(100, 200, 100, 250), b(300, 150, 300, 180);
    const auto pts = two_blobs(a, b, 4000, 2);
    GmmFitOptions o;
    o.K = 2;
    o.seed = 3;
    const auto r = fit_gmm(pts, o);
    const int ia = (r.model.means[0] - a).norm() < (r.model.means[1] - a).norm() ? 0 : 1;
    CHECK((r.model.means[ia] - a).norm() < 0.01 * a.norm());
    CHECK((r.model.means[1 - ia] - b).norm() < 0.01 * b.norm());
    CHECK(r.monotone());
  }
  SUBCASE("likelihood is non-decreasing and the model invariants hold") {
    const auto pts = two_blobs(Vec4(0, 0, 0, 0), Vec4(2, 2, 2, 2), 600, 4);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      GmmFitOptions o;
      o.K = 4;
      o.seed = seed;
      const auto r = fit_gmm(pts, o);
      CHECK(r.monotone());
      double w = 0.0;
      for (double x : r.model.weights) w += x;
      CHECK(std::abs(w - 1.0) < 1e-9);
      for (const auto& c : r.model.covariances)
        CHECK(Eigen::SelfAdjointEigenSolver<Mat4>(c).eigenvalues().minCoeff() >= o.cov_floor * (1 - 1e-9));
    }
  }
  SUBCASE("posteriors are a distribution") {
    const auto pts = two_blobs(Vec4(0, 0, 0, 0), Vec4(5, 5, 5, 5), 500, 5);
    GmmFitOptions o;
    o.K = 3;
    const auto r = fit_gmm(pts, o);
    for (int i = 0; i < 20; ++i) {
      const VecX p = r.model.posteriors(pts[static_cast<std::size_t>(i)]);
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      CHECK((p.array() >= 0.0).all());
    }
  }
  SUBCASE("preconditions") {
    const auto pts = two_blobs(Vec4::Zero(), Vec4::Ones(), 15, 6);
    GmmFitOptions o;
    o.K = 0;
    CHECK_THROWS_AS(fit_gmm(pts, o), ConfigError);
    o.K = 2;
    CHECK_THROWS_AS(fit_gmm(pts, o), ConfigError);
  }
}

TEST_CASE("local least squares") {
  Mat34 X;
  X << 0.3, -0.1, 0.2, 0.05,  //
      -0.2, 0.4, 0.1, -0.3,   //
      0.15, 0.05, -0.25, 0.1;
  LlsOptions full;
  full.rank = 4;

  SUBCASE("exact linear recovery") {
    const auto data = exact_samples(X, 200, 1);
    const auto m = fit_linear_map(pointers(data), full);
    CHECK((m.X - X).norm() < 1e-9 * X.norm());
    CHECK(m.residual_rms < 1e-9);
    CHECK(m.count == 200);
  }
  SUBCASE("noise error shrinks like 1/sqrt(n)") {
    auto mean_error = [&](int n) {
      double e = 0.0;
      for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto data = exact_samples(X, n, 100 + seed);
        Rng rng = make_stream(seed, "v-noise");
        std::normal_distribution<double> g(0.0, 0.5);
        for (auto& s : data) s.v += Vec3(g(rng), g(rng), g(rng));
        e += (fit_linear_map(pointers(data), full).X - X).norm();
      }
      return e / 40;
    };
    const double e1 = mean_error(100);
    const double e4 = mean_error(1600);
    // 16x the data: error ratio ~4.
    CHECK(e1 / e4 > 3.0);
    CHECK(e1 / e4 < 5.3);
  }
  SUBCASE("K = 1 equals global least squares over all samples") {
    const auto data = collect_dataset(flat_scene(), ExcitationPolicy::local(Vec3(0, 0, 10), 1.0, 10.0), kDt);
    EstimatorFitOptions o;
    o.gmm.K = 1;
    o.lls = full;
    const auto est = fit_estimator(data, o);
    const auto all = data.flatten();
    Eigen::MatrixXd S(all.size(), 4), V(all.size(), 3);
    for (std::size_t i = 0; i < all.size(); ++i) {
      S.row(static_cast<Eigen::Index>(i)) = all[i].s_dot.transpose();
      V.row(static_cast<Eigen::Index>(i)) = all[i].v.transpose();
    }
    const Eigen::MatrixXd G = S.transpose() * S + full.ridge * Eigen::MatrixXd::Identity(4, 4);
    const Mat34 ref = (G.ldlt().solve(S.transpose() * V)).transpose();
    CHECK((est.maps[0].X - ref).norm() < 1e-9 * ref.norm());
    CHECK((est.inverse(all.front().s) - ref).norm() < 1e-9 * ref.norm());
  }
  SUBCASE("rank-deficient clusters name the cluster") {
    std::vector<TrajectorySample> data(20);
    for (std::size_t i = 0; i < data.size(); ++i) data[i].s_dot = Vec4(1.0 * i, 0, 0, 0);
    try {
      fit_linear_map(pointers(data), {}, "cluster 3");
      FAIL("expected a rank error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("cluster 3") != std::string::npos);
    }
    data.resize(4);
    CHECK_THROWS_AS(fit_linear_map(pointers(data), {}), NumericError);
  }
}

TEST_CASE("blended estimator") {
  const SceneState scene = flat_scene();
  const auto data = collect_dataset(
      scene, ExcitationPolicy::lissajous_and_chirps(scene, kExcitationCentre, kExcitationHalfExtent), kDt);
  EstimatorFitOptions o;
  o.gmm.K = 5;
  o.gmm.seed = 9;
  o.tau = 0.1;
  const JacobianEstimator est = fit_estimator(data, o);
  const auto samples = data.flatten();

  SUBCASE("softmax weights are positive and sum to one") {
    for (std::size_t i = 0; i < samples.size(); i += 97) {
      const VecX w = est.blend_weights(samples[i].s);
      CHECK(std::abs(w.sum() - 1.0) < 1e-12);
      CHECK((w.array() > 0.0).all());
    }
  }
  SUBCASE("output is a convex combination of the local maps") {
    Mat34 lo = est.maps[0].X, hi = est.maps[0].X;
    for (const auto& m : est.maps) {
      lo = lo.cwiseMin(m.X);
      hi = hi.cwiseMax(m.X);
    }
    for (std::size_t i = 0; i < samples.size(); i += 53) {
      const Mat34 J = est.inverse(samples[i].s);
      CHECK(((J - lo).array() >= -1e-15).all());
      CHECK(((hi - J).array() >= -1e-15).all());
    }
  }
  SUBCASE("equal posteriors average the maps") {
    JacobianEstimator e2;
    e2.tau = 1.0;
    e2.gmm.weights = {0.5, 0.5};
    e2.gmm.means = {Vec4(0, 0, 0, 0), Vec4(2, 0, 0, 0)};
    e2.gmm.covariances = {Mat4::Identity(), Mat4::Identity()};
    e2.maps.resize(2);
    e2.maps[0].X = Mat34::Constant(1.0);
    e2.maps[1].X = Mat34::Constant(3.0);
    CHECK((e2.inverse(Vec4(1, 0, 0, 0)) - Mat34::Constant(2.0)).norm() < 1e-12);
  }
  SUBCASE("smooth along a line while the hard-switching baseline jumps") {
    const KMeansLlsEstimator km = baseline_kmeans_lls(data, 5, 9);
    // Walk between the two farthest-apart centroids.
    std::size_t a = 0, b = 1;
    double best = 0.0;
    for (std::size_t i = 0; i < km.centroids.size(); ++i)
      for (std::size_t j = i + 1; j < km.centroids.size(); ++j)
        if ((km.centroids[i] - km.centroids[j]).norm() > best) {
          best = (km.centroids[i] - km.centroids[j]).norm();
          a = i;
          b = j;
        }
    const int n = 2000;
    double max_step_gmm = 0.0, max_step_km = 0.0;
    Mat34 pg = est.inverse(km.centroids[a]), pk = km.inverse(km.centroids[a]);
    for (int i = 1; i <= n; ++i) {
      const Vec4 s = km.centroids[a] + (km.centroids[b] - km.centroids[a]) * (double(i) / n);
      const Mat34 g = est.inverse(s), k = km.inverse(s);
      max_step_gmm = std::max(max_step_gmm, (g - pg).norm());
      max_step_km = std::max(max_step_km, (k - pk).norm());
      pg = g;
      pk = k;
    }
    CHECK(max_step_gmm < 0.2 * max_step_km);
    CHECK(max_step_gmm < 0.01 * est.maps[0].X.norm());
  }
  SUBCASE("K = 1 baseline equals K = 1 GMM-LLS") {
    EstimatorFitOptions o1;
    o1.gmm.K = 1;
    const auto g1 = fit_estimator(data, o1);
    const auto k1 = baseline_kmeans_lls(data, 1, 0);
    CHECK((g1.maps[0].X - k1.maps[0].X).norm() == 0.0);
    CHECK((g1.inverse(samples[17].s) - k1.inverse(samples[17].s)).norm() < 1e-14);
  }
}

TEST_CASE("estimator file") {
  const SceneState scene = flat_scene();
  const auto data = collect_dataset(scene, ExcitationPolicy::local(Vec3(0, 0, 10), 2.0, 20.0), kDt);
  EstimatorFitOptions o;
  o.gmm.K = 2;
  o.gmm.seed = 4;
  const auto est = fit_estimator(data, o);

  SUBCASE("round trip is bit exact") {
    const std::string text = serialize_estimator(est);
    const auto back = parse_estimator(text);
    CHECK(serialize_estimator(back) == text);
    CHECK(back.tau == est.tau);
    CHECK(back.seed == est.seed);
    CHECK(back.dataset_fingerprint == est.dataset_fingerprint);
    for (int k = 0; k < est.gmm.K(); ++k) {
      CHECK(back.gmm.weights[k] == est.gmm.weights[k]);
      CHECK(back.gmm.means[k] == est.gmm.means[k]);
      CHECK(back.gmm.covariances[k] == est.gmm.covariances[k]);
      CHECK(back.maps[k].X == est.maps[k].X);
    }
  }
  SUBCASE("same seed and data give identical files") {
    CHECK(serialize_estimator(fit_estimator(data, o)) == serialize_estimator(est));
  }
  SUBCASE("malformed files are rejected") {
    CHECK_THROWS_AS(parse_estimator("not an estimator"), ConfigError);
    std::string text = serialize_estimator(est);
    CHECK_THROWS_AS(parse_estimator(text.substr(0, text.size() / 2)), ConfigError);
  }
}
