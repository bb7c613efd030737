#include <doctest.h>

#include "drs/spectro.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace drs;

namespace {

Spectrum make(const VecX& v, const WavelengthGrid& g = WavelengthGrid::full(),
              SpectrumRole role = SpectrumRole::Calibrated) {
  Spectrum s;
  s.grid = g;
  s.values = v;
  s.role = role;
  return s;
}

VecX random_values(int n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng = make_stream(seed, "spectro-test");
  std::uniform_real_distribution<double> u(lo, hi);
  VecX v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

TissueOpticalModel noiseless() {
  TissueOpticalModel m = TissueOpticalModel::standard();
  m.noise_sigma = 0.0;
  return m;
}

}  // namespace

TEST_CASE("wavelength grids") {
  CHECK(WavelengthGrid::full().size() == 501);
  CHECK(WavelengthGrid::analysis().size() == 253);
  const VecX w = WavelengthGrid::full().wavelengths();
  for (int i = 1; i < w.size(); ++i) CHECK(w(i) - w(i - 1) == doctest::Approx(1.0));
  CHECK_THROWS_AS((WavelengthGrid{500, 400, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((WavelengthGrid{400, 500, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((WavelengthGrid{400, 500, 3}.validate()), ConfigError);
}

TEST_CASE("calibration") {
  const TissueOpticalModel m = noiseless();
  const Spectrum W = m.white(), D = m.dark();
  SUBCASE("white, dark and midpoint identities are exact") {
    CHECK((calibrate(W, W, D).values.array() == 1.0).all());
    CHECK((calibrate(D, W, D).values.array() == 0.0).all());
    const Spectrum mid = make((W.values + D.values) / 2.0, m.grid, SpectrumRole::Raw);
    CHECK((calibrate(mid, W, D).values.array() == 0.5).all());
  }
  SUBCASE("round trip at contact recovers the base curve") {
    Rng rng = make_stream(1, "spectra");
    for (const auto& [name, b] : m.base) {
      const Spectrum cal = calibrate(synthesize_raw(m, name, 0.0, rng), W, D);
      CHECK((cal.values - b).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((b.array() > 0.0).all());
      CHECK((b.array() < 1.0).all());
    }
  }
  SUBCASE("bad channels are named") {
    Spectrum bad_white = W;
    bad_white.values(10) = D.values(10);
    bad_white.values(20) = 0.0;
    try {
      calibrate(W, bad_white, D);
      FAIL("expected a calibration error");
    } catch (const DomainError& e) {
      const std::string what = e.what();
      CHECK(what.find("410") != std::string::npos);
      CHECK(what.find("420") != std::string::npos);
    }
  }
  SUBCASE("grid mismatch") {
    const Spectrum other = make(VecX::Ones(253), WavelengthGrid::analysis(), SpectrumRole::Raw);
    CHECK_THROWS_AS(calibrate(other, W, D), DomainError);
  }
  SUBCASE("out-of-range reflectance is flagged") {
    CHECK_FALSE(make(VecX::Constant(501, 0.5)).flagged());
    VecX v = VecX::Constant(501, 0.5);
    v(3) = 1.6;
    CHECK(make(v).flagged());
  }
}

TEST_CASE("optical model") {
  const TissueOpticalModel m = noiseless();
  const Spectrum W = m.white(), D = m.dark();
  Rng rng = make_stream(2, "spectra");
  SUBCASE("gap coupling at h0 is 1/e") {
    const double i0 = intensity(calibrate(synthesize_raw(m, "liver_phantom", 0.0, rng), W, D));
    const double i1 = intensity(calibrate(synthesize_raw(m, "liver_phantom", m.h0, rng), W, D));
    CHECK(i1 / i0 == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(gap_coupling(-2.0, 1.5) == 1.0);
  }
  SUBCASE("compression tilts the fingerprint monotonically") {
    const VecX f0 = fingerprint(calibrate(synthesize_raw(m, "rump_steak", 0.0, rng), W, D)).values;
    double prev = 0.0;
    for (double h : {-0.5, -1.0, -2.0, -3.0}) {
      const VecX f = fingerprint(calibrate(synthesize_raw(m, "rump_steak", h, rng), W, D)).values;
      const double angle = std::acos(std::clamp(f.dot(f0), -1.0, 1.0));
      CHECK(angle > prev);
      prev = angle;
    }
  }
  SUBCASE("unknown material") {
    CHECK_THROWS_AS(synthesize_raw(m, "granite", 0.0, rng), ConfigError);
  }
}

TEST_CASE("Savitzky-Golay") {
  const WavelengthGrid g = WavelengthGrid::full();
  const VecX x = VecX::LinSpaced(g.size(), -1.0, 1.0);

  SUBCASE("polynomials up to the order are reproduced, edges included") {
    for (int order = 0; order <= 4; ++order) {
      for (int deg = 0; deg <= order; ++deg) {
        const VecX p = (0.3 + 2.0 * x.array().pow(deg) - 0.7 * x.array().pow(std::max(0, deg - 1))).matrix();
        const VecX out = savgol(make(p), 11, order).values;
        CHECK((out - p).cwiseAbs().maxCoeff() < 1e-9);
      }
    }
    const VecX cubic = (x.array().cube() * 40.0 - x.array().square() * 3.0 + 5.0).matrix();
    CHECK((savgol(make(cubic), 21, 3).values - cubic).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("constant is unchanged") {
    const VecX c = VecX::Constant(g.size(), 0.42);
    CHECK((savgol(make(c)).values - c).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("linearity") {
    const VecX a = random_values(g.size(), 1), b = random_values(g.size(), 2);
    const VecX lhs = savgol(make(2.5 * a - 0.75 * b)).values;
    const VecX rhs = 2.5 * savgol(make(a)).values - 0.75 * savgol(make(b)).values;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("white noise variance drops") {
    Rng rng = make_stream(3, "noise");
    std::normal_distribution<double> n(0.0, 1.0);
    VecX v(g.size());
    for (int i = 0; i < v.size(); ++i) v(i) = n(rng);
    const VecX out = savgol(make(v), 11, 3).values;
    auto var = [](const VecX& y) { return (y.array() - y.mean()).square().sum() / (y.size() - 1); };
    CHECK(var(out) < var(v));
  }
  SUBCASE("interior matches the classic 5-point quadratic kernel") {
    const VecX v = random_values(g.size(), 4);
    const VecX out = savgol(make(v), 5, 2).values;
    for (int i = 2; i < 40; ++i) {
      const double ref = (-3 * v(i - 2) + 12 * v(i - 1) + 17 * v(i) + 12 * v(i + 1) - 3 * v(i + 2)) / 35.0;
      CHECK(std::abs(out(i) - ref) < 1e-12);
    }
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(savgol(make(x), 10, 3), ConfigError);
    CHECK_THROWS_AS(savgol(make(x), 5, 5), ConfigError);
    CHECK_THROWS_AS(savgol(make(VecX::Ones(5), WavelengthGrid{400, 404, 1}), 11, 3), DomainError);
  }
}

TEST_CASE("crop") {
  const Spectrum s = make(random_values(501, 5));
  const Spectrum c = crop(s);
  CHECK(c.values.size() == 253);
  CHECK(c.grid.lambda_min == 468.0);
  CHECK(c.grid.lambda_max == 720.0);
  CHECK(c.values(0) == s.values(68));
  CHECK(c.values(252) == s.values(320));
  const Spectrum full = crop(s, 400, 900);
  CHECK(full.values == s.values);
  CHECK(full.grid == s.grid);
  const Spectrum twice = crop(c);
  CHECK(twice.values == c.values);
  CHECK_THROWS_AS(crop(s, 300, 500), DomainError);
  CHECK_THROWS_AS(crop(s, 600, 500), DomainError);
}

TEST_CASE("intensity and fingerprint") {
  SUBCASE("constant spectrum") {
    const Spectrum s = make(VecX::Constant(253, 0.3), WavelengthGrid::analysis());
    CHECK(intensity(s) == doctest::Approx(0.3).epsilon(1e-15));
    const VecX f = fingerprint(s).values;
    CHECK((f.array() - 1.0 / std::sqrt(253.0)).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("homogeneity") {
    const VecX v = random_values(253, 6, 0.1, 0.9);
    const Spectrum a = make(v, WavelengthGrid::analysis());
    const Spectrum b = make(3.0 * v, WavelengthGrid::analysis());
    CHECK(intensity(b) == doctest::Approx(3.0 * intensity(a)).epsilon(1e-14));
    CHECK((fingerprint(b).values - fingerprint(a).values).cwiseAbs().maxCoeff() < 1e-15);
    for (double c : {1e-3, 0.5, 7.0, 1e4})
      CHECK((fingerprint(make(c * v, WavelengthGrid::analysis())).values - fingerprint(a).values)
                .cwiseAbs()
                .maxCoeff() < 1e-14);
  }
  SUBCASE("brute-force oracle") {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
      const VecX v = random_values(253, seed, -0.1, 1.2);
      const Spectrum s = make(v, WavelengthGrid::analysis());
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < v.size(); ++i) {
        sum += v(i);
        sq += v(i) * v(i);
      }
      CHECK(std::abs(intensity(s) - sum / v.size()) < 1e-12);
      const VecX f = fingerprint(s).values;
      for (int i = 0; i < v.size(); ++i) CHECK(std::abs(f(i) - v(i) / std::sqrt(sq)) < 1e-12);
      CHECK(std::abs(f.norm() - 1.0) < 1e-12);
    }
  }
  SUBCASE("zero norm") {
    CHECK_THROWS_AS(fingerprint(make(VecX::Zero(253), WavelengthGrid::analysis())), NumericError);
  }
}

TEST_CASE("acquisition pipeline order") {
  const TissueOpticalModel m = TissueOpticalModel::standard();
  Rng rng = make_stream(7, "spectra");
  const Spectrum raw = synthesize_raw(m, "lamb_liver", 0.4, rng);
  const SpectrumFeatures f = analyse(raw, m.white(), m.dark());
  const Spectrum manual = crop(savgol(calibrate(raw, m.white(), m.dark()), 11, 3), 468, 720);
  CHECK(f.intensity == intensity(manual));
  CHECK(f.fingerprint.values == fingerprint(manual).values);
  CHECK(f.fingerprint.values.size() == 253);
}

TEST_CASE("spectrum CSV") {
  const TissueOpticalModel m = TissueOpticalModel::standard();
  Rng rng = make_stream(8, "spectra");
  std::vector<Spectrum> set{m.white(), m.dark()};
  for (int i = 0; i < 3; ++i) {
    Spectrum s = synthesize_raw(m, "liver_phantom", 0.3 * i, rng);
    s.id = "t" + std::to_string(i);
    set.push_back(s);
  }
  const std::string text = spectra_to_csv(set);
  CHECK(text.rfind("wavelength_nm,", 0) == 0);
  const auto back = spectra_from_csv(text);
  REQUIRE(back.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(back[i].values == set[i].values);
    CHECK(back[i].role == set[i].role);
    CHECK(back[i].id == set[i].id);
    CHECK(back[i].grid == set[i].grid);
  }
  CHECK(spectra_to_csv(back) == text);

  const auto path = std::filesystem::temp_directory_path() / "drs_test_spectra.csv";
  save_spectra(set, path);
  CHECK(load_spectra(path)[2].values == set[2].values);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(spectra_from_csv(""), ConfigError);
  CHECK_THROWS_AS(spectra_from_csv("lambda,raw:a\n400,1\n401,2\n"), ConfigError);
  CHECK_THROWS_AS(spectra_from_csv("wavelength_nm,a\n400,1\n401,2\n"), ConfigError);
}
