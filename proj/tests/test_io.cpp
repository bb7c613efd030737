#include <doctest.h>

#include "drs/experiment.hpp"
#include "drs/format.hpp"
#include "drs/hash.hpp"
#include "drs/presets.hpp"
#include "drs/trial_io.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

using namespace drs;
namespace fs = std::filesystem;

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

template <typename Derived>
bool same_bits(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (!same_bits(a(i), b(i))) return false;
  return true;
}

bool same_tick(const TrialTick& a, const TrialTick& b) {
  return a.tick == b.tick && same_bits(a.t, b.t) && a.stage == b.stage && a.light_seen == b.light_seen &&
         same_bits(a.s_raw, b.s_raw) && same_bits(a.s_filt, b.s_filt) && same_bits(a.s_true, b.s_true) &&
         same_bits(a.target, b.target) && a.advancing == b.advancing && same_bits(a.h_true, b.h_true) &&
         same_bits(a.h_meas, b.h_meas) && same_bits(a.action.a_vs, b.action.a_vs) &&
         same_bits(a.action.a_hc, b.action.a_hc) && same_bits(a.action.beta, b.action.beta) &&
         same_bits(a.action.a, b.action.a) && same_bits(a.position, b.position) && a.spectrum == b.spectrum;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

TrialLog sample_trial() {
  const SceneState scene = default_scene("lamb_liver");
  ControlConfig c = default_control(sample_preset("lamb_liver"));
  c.timeout = 20.0;
  TrialLog log = run_trial(scene, c, default_scan_command(scene), AnalyticJacobian{}, default_sensors(), 11);
  log.id = "trial_io";
  log.sample = "lamb_liver";
  return log;
}

}  // namespace

TEST_CASE("shortest round-trip doubles") {
  Rng rng = make_stream(5, "io-test");
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 20000) {
    const double v = std::bit_cast<double>(bits(rng));
    if (!std::isfinite(v)) continue;
    CHECK(same_bits(parse_double(format_double(v)), v));
    ++checked;
  }
  for (double v : {0.0, -0.0, 0.1, 1.0 / 3.0, 5e-324, std::numeric_limits<double>::max(), 1e22, -2.5})
    CHECK(same_bits(parse_double(format_double(v)), v));
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(std::isnan(parse_double(format_double(std::numeric_limits<double>::quiet_NaN()))));
  CHECK_THROWS(parse_double("1.5x"));
  CHECK_THROWS(parse_double(""));
}

TEST_CASE("sha1 and git blob ids") {
  CHECK(sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello world\n") == "3b18e512dba79e4c8300dd08aeb37f8e728b8dad");
}

TEST_CASE("split") {
  CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split("", ',') == std::vector<std::string>{""});
}

TEST_CASE("trial logs reload bit for bit") {
  const TrialLog log = sample_trial();
  REQUIRE(log.ticks.size() > 100);

  SUBCASE("ticks csv") {
    const auto back = ticks_from_csv(ticks_to_csv(log));
    REQUIRE(back.size() == log.ticks.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(same_tick(back[i], log.ticks[i]));
    CHECK(split(ticks_to_csv(log).substr(0, ticks_to_csv(log).find('\n')), ',') == kTickColumns);
  }
  SUBCASE("trial directory") {
    const fs::path dir = fresh_dir("drs_test_trial");
    save_trial(log, dir);
    const TrialLog back = load_trial(dir);
    CHECK(back.id == log.id);
    CHECK(back.sample == log.sample);
    CHECK(back.kind == log.kind);
    CHECK(back.seed == log.seed);
    CHECK(back.final_stage == log.final_stage);
    CHECK(back.failure == log.failure);
    CHECK(same_bits(back.approach_time, log.approach_time));
    CHECK(same_bits(back.dt, log.dt));
    CHECK(same_bits(back.command.start, log.command.start));
    CHECK(same_bits(back.command.end, log.command.end));
    REQUIRE(back.ticks.size() == log.ticks.size());
    for (std::size_t i = 0; i < back.ticks.size(); ++i) CHECK(same_tick(back.ticks[i], log.ticks[i]));
    REQUIRE(back.spectra.size() == log.spectra.size());
    for (std::size_t i = 0; i < back.spectra.size(); ++i) CHECK(back.spectra[i].values == log.spectra[i].values);
    REQUIRE(back.white.has_value() == log.white.has_value());
    if (log.white) CHECK(back.white->values == log.white->values);
    CHECK(trial_summary_json(back) == trial_summary_json(log));
    CHECK(ticks_to_csv(back) == ticks_to_csv(log));
    fs::remove_all(dir);
  }
  SUBCASE("find_trials is sorted and ignores other directories") {
    const fs::path root = fresh_dir("drs_test_find");
    TrialLog a = log, b = log;
    a.id = "b";
    b.id = "a";
    save_trial(a, root / "trial_0002");
    save_trial(b, root / "trial_0001");
    fs::create_directories(root / "plots");
    const auto found = find_trials(root);
    REQUIRE(found.size() == 2);
    CHECK(found[0].filename() == "trial_0001");
    CHECK(found[1].filename() == "trial_0002");
    fs::remove_all(root);
  }
  SUBCASE("malformed input") {
    CHECK_THROWS(ticks_from_csv("tick,t\n1,2\n"));
    CHECK_THROWS(load_trial(fresh_dir("drs_test_missing")));
  }
}

TEST_CASE("experiment config") {
  SUBCASE("round-trip") {
    ExperimentConfig c = default_config("rump_steak");
    c.seed = 77;
    c.jacobian.K = 3;
    c.line = ScanCommand{Pixel(1, 2), Pixel(3, 4.5)};
    const std::string text = config_to_json(c);
    CHECK(config_to_json(config_from_json(text)) == text);
  }
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(config_from_json(R"({"sample": "lamb_liver", "sed": 3})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"jacobian": {"k": 3}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"control": {"lambda": 0.5, "bogus": 1}})"), ConfigError);
  }
  SUBCASE("wrong types and versions") {
    CHECK_THROWS_AS(config_from_json(R"({"seed": "x"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"schema_version": 99})"), ConfigError);
    CHECK_THROWS_AS(config_from_json("[1,2]"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{"), ConfigError);
  }
  SUBCASE("line parsing") {
    const ScanCommand l = parse_line("10,20.5,30,40");
    CHECK(l.start == Pixel(10, 20.5));
    CHECK(l.end == Pixel(30, 40));
    CHECK_THROWS_AS(parse_line("1,2,3"), ConfigError);
  }
}
