#include <doctest.h>

#include "drs/perception.hpp"
#include "drs/presets.hpp"

#include <cmath>
#include <vector>

using namespace drs;

namespace {

bool is_psd(const Mat4& P) {
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  return Eigen::SelfAdjointEigenSolver<Mat4>(P).eigenvalues().minCoeff() >= -1e-12;
}

}  // namespace

TEST_CASE("feature measurement") {
  const SceneState s = with_tip_at(default_scene("liver_phantom"), 4.0, 2.0, 15.0);
  const GroundTruthFeatures truth = ground_truth_features(s);
  Rng rng = make_stream(7, "features");

  SUBCASE("noiseless measurement is the ground truth") {
    FeatureNoiseModel m{0.0, 0.0};
    for (int i = 0; i < 20; ++i) {
      const auto f = measure_features(s, m, rng);
      REQUIRE(f);
      CHECK(f->s == truth.stacked());
    }
  }
  SUBCASE("dropout = 1 is always absent") {
    FeatureNoiseModel m{1.0, 0.0};
    m.dropout_prob = 0.999999999;
    int present = 0;
    for (int i = 0; i < 1000; ++i) present += measure_features(s, m, rng).has_value();
    CHECK(present == 0);
    m.dropout_prob = 1.0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
  }
  SUBCASE("Monte-Carlo std within 5% of sigma") {
    FeatureNoiseModel m{1.0, 0.0};
    double sum = 0.0, sum2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const double e = measure_features(s, m, rng)->s(0) - truth.tip(0);
      sum += e;
      sum2 += e * e;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sum2 - n * mean * mean) / (n - 1));
    CHECK(std::abs(sd - 1.0) < 0.05);
  }
  SUBCASE("overexposure locks the light centre onto the tip") {
    FeatureNoiseModel m{0.0, 0.0, 8.0};
    const SceneState low = with_tip_at(s, 4.0, 2.0, 5.0);
    const auto f = measure_features(low, m, rng);
    CHECK(f->light() == f->tip());
    CHECK(measure_features(s, m, rng)->s == truth.stacked());
  }
  SUBCASE("invalid noise") {
    CHECK_THROWS_AS((FeatureNoiseModel{-1.0, 0.0}.validate()), ConfigError);
  }
}

TEST_CASE("Kalman track") {
  const double dt = 1.0 / 30.0;

  SUBCASE("stationary target converges with zero noise") {
    KalmanTrack t;
    t.q = 20.0;
    t.r = 1.0;
    KalmanStep st = kf_step(t, Pixel(100, 50), dt);
    for (int i = 0; i < 300; ++i) st = kf_step(st.track, Pixel(100, 50), dt);
    CHECK((st.position - Pixel(100, 50)).norm() < 1e-9);
    CHECK(st.velocity.norm() < 1e-9);
  }

  SUBCASE("covariance stays symmetric PSD") {
    KalmanTrack t;
    KalmanStep st = kf_step(t, Pixel(0, 0), dt);
    Rng rng = make_stream(3, "kf");
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      const bool meas = (i % 2 == 0) && (i % 37 != 0);
      st = kf_step(st.track, meas ? std::optional<Pixel>(Pixel(i * 0.3 + n(rng), n(rng))) : std::nullopt, dt);
      CHECK(is_psd(st.track.P));
    }
    CHECK(st.track.repairs == 0);
  }

  SUBCASE("interpolation between half-rate measurements lies on the true line") {
    const Vec2 v(30.0, -12.0);
    auto truth = [&](int k) { return Pixel(Pixel(200, 300) + v * (k * dt)); };
    KalmanTrack t;
    t.r = 1e-6;
    KalmanStep st = kf_step(t, truth(0), dt);
    double worst = 0.0;
    for (int k = 1; k < 300; ++k) {
      st = kf_step(st.track, k % 2 == 0 ? std::optional<Pixel>(truth(k)) : std::nullopt, dt);
      if (k > 60 && k % 2 == 1) worst = std::max(worst, (st.position - truth(k)).norm());
    }
    CHECK(worst < 0.5);
  }

  SUBCASE("steady-state variance is at most half the measurement variance") {
    const Vec2 v(20.0, 10.0);
    Rng rng = make_stream(11, "kf");
    std::normal_distribution<double> n(0.0, 1.0);
    double se_f = 0.0, se_z = 0.0;
    int count = 0;
    for (int run = 0; run < 40; ++run) {
      KalmanTrack t;
      t.q = 20.0;
      t.r = 1.0;
      KalmanStep st;
      st.track = t;
      for (int k = 0; k < 400; ++k) {
        const Pixel x = Pixel(100, 100) + v * (k * dt);
        const Pixel z = x + Pixel(n(rng), n(rng));
        st = kf_step(st.track, z, dt);
        if (k >= 100) {
          se_f += (st.position - x).squaredNorm();
          se_z += (z - x).squaredNorm();
          count += 2;
        }
      }
    }
    CHECK(se_f / count <= 0.5 * se_z / count);
  }

  SUBCASE("arrival phase does not matter without process noise") {
    for (int phase = 0; phase < 2; ++phase) {
      KalmanTrack t;
      t.q = 0.0;
      t.r = 1.0;
      KalmanStep st;
      st.track = t;
      bool started = false;
      for (int k = 0; k < 200; ++k) {
        const bool meas = (k % 2) == phase;
        if (!started && !meas) continue;
        st = kf_step(st.track, meas ? std::optional<Pixel>(Pixel(42, 17)) : std::nullopt, dt);
        started = true;
        CHECK((st.position - Pixel(42, 17)).norm() == 0.0);
      }
    }
  }

  SUBCASE("uninitialised track without measurement") {
    CHECK_THROWS_AS(kf_step(KalmanTrack{}, std::nullopt, dt), NumericError);
    CHECK_THROWS_AS(kf_step(KalmanTrack{}, Pixel(0, 0), 0.0), DomainError);
  }
}

TEST_CASE("height sensor") {
  const HeightSensorModel model = HeightSensorModel::standard();

  SUBCASE("ideal profile is the identity") {
    HeightSensorModel m;
    m.profiles["liver_phantom"] = {};
    const SceneState s = with_tip_at(default_scene("liver_phantom"), 1, 1, 3.25);
    Rng rng = make_stream(1, "height");
    CHECK(measure_height(s, m, rng) == doctest::Approx(3.25).epsilon(1e-14));
  }
  SUBCASE("lamb-liver Monte-Carlo MAE near 0.06 mm") {
    const SceneState base = default_scene("lamb_liver");
    Rng rng = make_stream(2, "height");
    std::uniform_real_distribution<double> uh(-2.0, 40.0);
    double mae = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const SceneState s = with_tip_at(base, 0.0, 0.0, uh(rng));
      mae += std::abs(measure_height(s, model, rng) - contact_height(s).h);
    }
    mae /= n;
    CHECK(mae >= 0.04);
    CHECK(mae <= 0.08);
  }
  SUBCASE("liver-phantom noise peaks near contact") {
    const SceneState base = default_scene("liver_phantom");
    Rng rng = make_stream(3, "height");
    auto empirical_sd = [&](double h) {
      const SceneState s = with_tip_at(base, 0.0, 0.0, h);
      double s2 = 0.0;
      for (int i = 0; i < 5000; ++i) {
        const double e = measure_height(s, model, rng) - h;
        s2 += e * e;
      }
      return std::sqrt(s2 / 5000);
    };
    CHECK(empirical_sd(0.0) > empirical_sd(20.0));
  }
  SUBCASE("zero bias gives an unbiased sensor") {
    const SceneState s = with_tip_at(default_scene("rump_steak"), 0.0, 0.0, 10.0);
    Rng rng = make_stream(4, "height");
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += measure_height(s, model, rng) - contact_height(s).h;
    CHECK(std::abs(sum / n) < 0.01);
  }
  SUBCASE("unknown profile") {
    CHECK_THROWS_AS(model.profile("nope"), ConfigError);
  }
}

TEST_CASE("named streams are independent of each other") {
  Rng a = make_stream(5, "features");
  Rng b = make_stream(5, "features");
  Rng c = make_stream(5, "height");
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(make_stream(5, "features", 1)() != make_stream(5, "features", 0)());
}
