#include "drs/experiment.hpp"

#include "drs/evaluation.hpp"
#include "drs/format.hpp"
#include "drs/hash.hpp"
#include "drs/jacobian_io.hpp"
#include "drs/presets.hpp"
#include "drs/scene_io.hpp"
#include "drs/svg.hpp"
#include "drs/trial_io.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <thread>

#include "json.hpp"

namespace drs {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Reads the keys of one JSON object and rejects any it was not asked for.
class Fields {
 public:
  Fields(const ojson& j, std::string context) : j_(j), ctx_(std::move(context)) {
    if (!j.is_object()) throw ConfigError(ctx_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(ctx_ + "." + key + ": wrong type");
    }
  }

  const ojson* object(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(ctx_ + ": unknown key '" + item.key() + "'");
  }

 private:
  const ojson& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

void read_pid(const ojson& j, const std::string& ctx, PidGains& g) {
  Fields f(j, ctx);
  f.get("kp", g.kp);
  f.get("ki", g.ki);
  f.get("kd", g.kd);
  f.get("integral_limit", g.integral_limit);
  f.get("derivative_filter", g.derivative_filter);
  f.finish();
}

ojson pid_json(const PidGains& g) {
  return {{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}, {"integral_limit", g.integral_limit},
          {"derivative_filter", g.derivative_filter}};
}

void read_control(const ojson& j, ControlConfig& c) {
  Fields f(j, "control");
  f.get("lambda", c.lambda);
  f.get("alpha", c.alpha);
  f.get("k_blend", c.k_blend);
  f.get("h_star", c.h_star);
  if (const ojson* p = f.object("height_pid")) read_pid(*p, "control.height_pid", c.height_pid);
  if (const ojson* p = f.object("scan_pid")) read_pid(*p, "control.scan_pid", c.scan_pid);
  f.get("speed_limit", c.speed_limit);
  f.get("action_limit", c.action_limit);
  f.get("approach_threshold", c.approach_threshold);
  f.get("height_tolerance", c.height_tolerance);
  f.get("approach_dwell", c.approach_dwell);
  f.get("scan_speed", c.scan_speed);
  f.get("max_scan_rate", c.max_scan_rate);
  f.get("rate_hz", c.rate_hz);
  f.get("done_threshold", c.done_threshold);
  f.get("dropout_limit", c.dropout_limit);
  f.get("timeout", c.timeout);
  f.get("compensator", c.compensator);
  f.finish();
}

ojson control_json(const ControlConfig& c) {
  return {{"lambda", c.lambda},
          {"alpha", c.alpha},
          {"k_blend", c.k_blend},
          {"h_star", c.h_star},
          {"height_pid", pid_json(c.height_pid)},
          {"scan_pid", pid_json(c.scan_pid)},
          {"speed_limit", c.speed_limit},
          {"action_limit", c.action_limit},
          {"approach_threshold", c.approach_threshold},
          {"height_tolerance", c.height_tolerance},
          {"approach_dwell", c.approach_dwell},
          {"scan_speed", c.scan_speed},
          {"max_scan_rate", c.max_scan_rate},
          {"rate_hz", c.rate_hz},
          {"done_threshold", c.done_threshold},
          {"dropout_limit", c.dropout_limit},
          {"timeout", c.timeout},
          {"compensator", c.compensator}};
}

std::string line_text(const ScanCommand& c) {
  return format_double(c.start(0)) + "," + format_double(c.start(1)) + "," + format_double(c.end(0)) + "," +
         format_double(c.end(1));
}

void write_provenance(const ExperimentConfig& cfg, const fs::path& out, const std::string& command) {
  write_text(out / "config.json", config_to_json(cfg));
  std::string estimator_hash = "none";
  if (cfg.estimator == "analytic") {
    estimator_hash = "analytic";
  } else if (!cfg.estimator.empty() && fs::exists(cfg.estimator)) {
    estimator_hash = git_blob_hash(read_text(cfg.estimator));
  }
  ojson p = {{"command", command},
             {"seed", cfg.seed},
             {"estimator", cfg.estimator},
             {"estimator_blob", estimator_hash},
             {"config_blob", git_blob_hash(config_to_json(cfg))}};
  write_text(out / "provenance.json", p.dump(1) + "\n");
}

std::unique_ptr<JacobianModel> load_model(const ExperimentConfig& cfg) {
  if (cfg.estimator.empty())
    throw ConfigError("no estimator configured: set \"estimator\" to a file from calibrate-jacobian or \"analytic\"");
  if (cfg.estimator == "analytic") return std::make_unique<AnalyticJacobian>();
  return std::make_unique<JacobianEstimator>(load_estimator(cfg.estimator));
}

std::string trial_name(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d", prefix, i);
  return buf;
}

}  // namespace

ExperimentConfig default_config(const std::string& sample) {
  ExperimentConfig c;
  c.sample = sample;
  c.control = default_control(sample_preset(sample));
  return c;
}

ExperimentConfig config_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected an object");
  std::string sample = "liver_phantom";
  if (j.contains("sample")) {
    if (!j["sample"].is_string()) throw ConfigError("config.sample: wrong type");
    sample = j["sample"].get<std::string>();
  }
  ExperimentConfig c = default_config(sample);
  Fields f(j, "config");
  f.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(c.schema_version));
  f.get("sample", c.sample);
  f.get("scene", c.scene);
  f.get("sensors", c.sensors);
  if (const ojson* p = f.object("control")) read_control(*p, c.control);
  std::string line;
  f.get("line", line);
  if (!line.empty()) c.line = parse_line(line);
  f.get("estimator", c.estimator);
  f.get("seed", c.seed);
  f.get("repeats", c.repeats);
  f.get("jobs", c.jobs);
  f.get("output", c.output);
  f.get("max_failure_rate", c.max_failure_rate);
  if (const ojson* p = f.object("jacobian")) {
    Fields g(*p, "jacobian");
    g.get("K", c.jacobian.K);
    g.get("tau", c.jacobian.tau);
    g.get("excitation", c.jacobian.excitation);
    std::vector<double> centre;
    g.get("local_centre", centre);
    if (!centre.empty()) {
      if (centre.size() != 3) throw ConfigError("jacobian.local_centre needs three numbers");
      c.jacobian.local_centre = Vec3(centre[0], centre[1], centre[2]);
    }
    g.get("local_amplitude", c.jacobian.local_amplitude);
    g.get("holdout_phase", c.jacobian.holdout_phase);
    g.finish();
  }
  if (const ojson* p = f.object("manual")) {
    Fields g(*p, "manual");
    g.get("sigma_hand", c.manual.sigma_hand);
    g.get("tau_hand", c.manual.tau_hand);
    g.get("mean_offset", c.manual.mean_offset);
    g.get("sigma_xy", c.manual.sigma_xy);
    g.get("tau_xy", c.manual.tau_xy);
    g.get("speed", c.manual.speed);
    g.get("duration", c.manual.duration);
    g.get("repeats", c.manual.repeats);
    g.get("rate_hz", c.manual.rate_hz);
    g.finish();
  }
  if (const ojson* p = f.object("pipeline")) {
    Fields g(*p, "pipeline");
    g.get("window", c.pipeline.window);
    g.get("order", c.pipeline.order);
    g.get("crop_lo", c.pipeline.crop_lo);
    g.get("crop_hi", c.pipeline.crop_hi);
    g.finish();
  }
  f.get("histogram_bin", c.histogram_bin);
  f.finish();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["schema_version"] = c.schema_version;
  j["sample"] = c.sample;
  j["scene"] = c.scene;
  j["sensors"] = c.sensors;
  j["control"] = control_json(c.control);
  j["line"] = c.line ? line_text(*c.line) : std::string();
  j["estimator"] = c.estimator;
  j["seed"] = c.seed;
  j["repeats"] = c.repeats;
  j["jobs"] = c.jobs;
  j["output"] = c.output;
  j["max_failure_rate"] = c.max_failure_rate;
  j["jacobian"] = {{"K", c.jacobian.K},
                   {"tau", c.jacobian.tau},
                   {"excitation", c.jacobian.excitation},
                   {"local_centre", {c.jacobian.local_centre(0), c.jacobian.local_centre(1), c.jacobian.local_centre(2)}},
                   {"local_amplitude", c.jacobian.local_amplitude},
                   {"holdout_phase", c.jacobian.holdout_phase}};
  j["manual"] = {{"sigma_hand", c.manual.sigma_hand}, {"tau_hand", c.manual.tau_hand},
                 {"mean_offset", c.manual.mean_offset}, {"sigma_xy", c.manual.sigma_xy},
                 {"tau_xy", c.manual.tau_xy},         {"speed", c.manual.speed},
                 {"duration", c.manual.duration},     {"repeats", c.manual.repeats},
                 {"rate_hz", c.manual.rate_hz}};
  j["pipeline"] = {{"window", c.pipeline.window}, {"order", c.pipeline.order},
                   {"crop_lo", c.pipeline.crop_lo}, {"crop_hi", c.pipeline.crop_hi}};
  j["histogram_bin"] = c.histogram_bin;
  return j.dump(1) + "\n";
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(read_text(path)); }

ScanCommand parse_line(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) throw ConfigError("line must be u0,v0,u1,v1");
  double v[4];
  for (int i = 0; i < 4; ++i) v[i] = parse_double(parts[static_cast<std::size_t>(i)]);
  return {{v[0], v[1]}, {v[2], v[3]}};
}

ExperimentConfig resolve_config(const std::optional<fs::path>& path, const Overrides& o) {
  ExperimentConfig c = path ? load_config(*path) : default_config(o.sample.value_or("liver_phantom"));
  if (path && o.sample && *o.sample != c.sample)
    throw ConfigError("--sample conflicts with the config file's sample '" + c.sample + "'");
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.line) c.line = parse_line(*o.line);
  if (o.out) c.output = *o.out;
  if (o.estimator) c.estimator = *o.estimator;
  if (o.repeats) c.repeats = *o.repeats;
  if (c.output.empty()) {
    const char* env = std::getenv("DRSSCAN_OUT");
    c.output = env && *env ? env : "drs_out";
  }
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  if (c.repeats < 0) throw ConfigError("repeats must be >= 0");
  c.control.validate();
  return c;
}

fs::path output_dir(const ExperimentConfig& c) {
  if (!c.output.empty()) return c.output;
  const char* env = std::getenv("DRSSCAN_OUT");
  return env && *env ? fs::path(env) : fs::path("drs_out");
}

SceneState make_scene(const ExperimentConfig& c) {
  sample_preset(c.sample);
  if (c.scene.empty()) return default_scene(c.sample);
  return load_scene(c.scene);
}

ScanCommand make_command(const ExperimentConfig& c, const SceneState& scene) {
  const ScanCommand cmd = c.line ? *c.line : default_scan_command(scene);
  cmd.validate(scene.third_person.width, scene.third_person.height);
  return cmd;
}

TrialSensors make_sensors(const ExperimentConfig& c) {
  if (c.sensors == "default") return default_sensors();
  if (c.sensors == "ideal") return ideal_sensors();
  throw ConfigError("unknown sensor preset '" + c.sensors + "' (default, ideal)");
}

int resolved_repeats(const ExperimentConfig& c) {
  return c.repeats > 0 ? c.repeats : sample_preset(c.sample).repeats;
}

std::uint64_t trial_seed(std::uint64_t seed, int index) {
  Rng r = make_stream(seed, "trial", static_cast<std::uint64_t>(index));
  return r();
}

int cmd_calibrate_jacobian(const ExperimentConfig& cfg) {
  const auto& jc = cfg.jacobian;
  if (jc.K < 1) throw ConfigError("jacobian.K must be >= 1");
  if (!(jc.tau > 0.0)) throw ConfigError("jacobian.tau must be > 0");
  const SceneState scene = make_scene(cfg);
  ExcitationPolicy train, held_out;
  if (jc.excitation == "lissajous") {
    train = ExcitationPolicy::lissajous_and_chirps(scene, kExcitationCentre, kExcitationHalfExtent);
    held_out = ExcitationPolicy::lissajous_and_chirps(scene, kExcitationCentre, kExcitationHalfExtent, jc.holdout_phase);
  } else if (jc.excitation == "local") {
    if (!(jc.local_amplitude > 0.0)) throw ConfigError("jacobian.local_amplitude must be > 0");
    train = ExcitationPolicy::local(jc.local_centre, jc.local_amplitude);
    held_out = ExcitationPolicy::local(jc.local_centre, jc.local_amplitude, 20.0, jc.holdout_phase);
  } else {
    throw ConfigError("unknown excitation '" + jc.excitation + "' (lissajous, local)");
  }
  const double dt = cfg.control.dt();
  const TrajectoryDataset data = collect_dataset(scene, train, dt);
  EstimatorFitOptions opts;
  opts.gmm.K = jc.K;
  opts.gmm.seed = cfg.seed;
  opts.tau = jc.tau;
  const JacobianEstimator est = fit_estimator(data, opts);

  const TrajectoryDataset test = collect_dataset(scene, held_out, dt);
  double sq = 0.0, rel = 0.0;
  std::size_t n = 0;
  for (const auto& s : test.flatten()) {
    sq += (s.v - est.inverse(s.s) * s.s_dot).squaredNorm();
    SceneState at = scene;
    at.pose.position = s.x;
    rel += relative_frobenius(est.inverse(s.s), analytic_inverse_jacobian(at));
    ++n;
  }
  if (n == 0) throw ConfigError("held-out trajectory produced no samples");
  const double residual = std::sqrt(sq / static_cast<double>(n));
  const double analytic = rel / static_cast<double>(n);

  const fs::path out = output_dir(cfg);
  fs::create_directories(out);
  const fs::path file = out / "estimator.txt";
  save_estimator(est, file);
  ExperimentConfig resolved = cfg;
  resolved.estimator = file.string();
  write_provenance(resolved, out, "calibrate-jacobian");
  ojson report = {{"K", jc.K},
                  {"tau", jc.tau},
                  {"excitation", jc.excitation},
                  {"training_samples", data.size()},
                  {"held_out_samples", n},
                  {"held_out_residual_mm_s", residual},
                  {"mean_relative_error_vs_analytic", analytic},
                  {"dataset_fingerprint", data.fingerprint()}};
  write_text(out / "calibration.json", report.dump(1) + "\n");
  std::cout << "estimator: " << file.string() << "\n"
            << "held-out residual (rms, mm/s): " << format_double(residual) << "\n"
            << "mean relative error vs analytic: " << format_double(analytic) << "\n";
  return 0;
}

namespace {

TrialLog one_trial(const ExperimentConfig& cfg, const SceneState& scene, const ScanCommand& cmd,
                   const JacobianModel& model, const TrialSensors& sensors, int index, std::uint64_t seed) {
  TrialLog log = run_trial(scene, cfg.control, cmd, model, sensors, seed);
  log.id = trial_name("trial", index);
  log.sample = cfg.sample;
  return log;
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg) {
  const SceneState scene = make_scene(cfg);
  const ScanCommand cmd = make_command(cfg, scene);
  const TrialSensors sensors = make_sensors(cfg);
  const auto model = load_model(cfg);
  const TrialLog log = one_trial(cfg, scene, cmd, *model, sensors, 0, cfg.seed);
  const fs::path out = output_dir(cfg);
  save_trial(log, out / log.id);
  write_provenance(cfg, out, "run");
  std::cout << log.id << ": " << to_string(log.final_stage) << (log.failure.empty() ? "" : " (" + log.failure + ")")
            << "\n";
  return log.done() ? 0 : 3;
}

int cmd_batch(const ExperimentConfig& cfg) {
  const SceneState scene = make_scene(cfg);
  const ScanCommand cmd = make_command(cfg, scene);
  const TrialSensors sensors = make_sensors(cfg);
  const auto model = load_model(cfg);
  const int repeats = resolved_repeats(cfg);
  const fs::path out = output_dir(cfg);
  fs::create_directories(out);

  struct Outcome {
    Stage stage = Stage::Failed;
    std::string failure;
    double approach = -1.0;
    std::uint64_t seed = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(repeats));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < repeats; i = next++) {
      Outcome& o = outcomes[static_cast<std::size_t>(i)];
      o.seed = trial_seed(cfg.seed, i);
      try {
        const TrialLog log = one_trial(cfg, scene, cmd, *model, sensors, i, o.seed);
        save_trial(log, out / log.id);
        o.stage = log.final_stage;
        o.failure = log.failure;
        o.approach = log.approach_time;
      } catch (const std::exception& e) {
        o.error = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min(cfg.jobs, repeats));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& o : outcomes)
    if (!o.error.empty()) throw IoError("batch trial failed to complete: " + o.error);

  int done = 0;
  std::vector<double> approach;
  ojson trials = ojson::array();
  for (int i = 0; i < repeats; ++i) {
    const Outcome& o = outcomes[static_cast<std::size_t>(i)];
    if (o.stage == Stage::Done) ++done;
    if (o.approach >= 0.0) approach.push_back(o.approach);
    trials.push_back({{"id", trial_name("trial", i)},
                      {"seed", o.seed},
                      {"final_stage", to_string(o.stage)},
                      {"failure", o.failure},
                      {"approach_time_s", o.approach}});
  }
  const double rate = repeats > 0 ? static_cast<double>(done) / repeats : 0.0;
  ojson summary = {{"sample", cfg.sample},
                   {"repeats", repeats},
                   {"done", done},
                   {"success_rate", rate},
                   {"approach_time_median_s", approach.empty() ? -1.0 : nearest_rank_percentile(approach, 50.0)},
                   {"approach_time_p90_s", approach.empty() ? -1.0 : nearest_rank_percentile(approach, 90.0)},
                   {"trials", trials}};
  write_text(out / "batch_summary.json", summary.dump(1) + "\n");
  write_provenance(cfg, out, "batch");
  std::cout << cfg.sample << ": " << done << "/" << repeats << " trials done\n";
  return 1.0 - rate > cfg.max_failure_rate ? 3 : 0;
}

int cmd_manual(const ExperimentConfig& cfg) {
  const SceneState scene = make_scene(cfg);
  const TrialSensors sensors = make_sensors(cfg);
  if (!sensors.optics) throw ConfigError("manual scan needs an optical model");
  const auto logs = simulate_manual_scan(scene, cfg.manual, ScanRegion{}, *sensors.optics, cfg.seed);
  const fs::path out = output_dir(cfg);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    TrialLog log = logs[i];
    log.id = trial_name("manual", static_cast<int>(i));
    log.sample = cfg.sample;
    save_trial(log, out / log.id);
  }
  write_provenance(cfg, out, "manual");
  std::cout << cfg.sample << ": " << logs.size() << " manual scans\n";
  return 0;
}

int cmd_report(const std::vector<fs::path>& log_dirs, const fs::path& out, const ExperimentConfig& cfg) {
  std::vector<fs::path> trials;
  for (const auto& d : log_dirs) {
    if (!fs::exists(d)) throw ConfigError("report: '" + d.string() + "' does not exist");
    const auto found = find_trials(d);
    trials.insert(trials.end(), found.begin(), found.end());
  }
  std::sort(trials.begin(), trials.end());
  trials.erase(std::unique(trials.begin(), trials.end()), trials.end());
  if (trials.empty()) throw ConfigError("report: no trial logs found in the given directories");

  std::map<std::string, std::pair<std::vector<TrialLog>, std::vector<TrialLog>>> groups;
  for (const auto& t : trials) {
    TrialLog log = load_trial(t);
    auto& g = groups[log.sample];
    (log.kind == "manual" ? g.second : g.first).push_back(std::move(log));
  }
  MetricsReport rep;
  for (const auto& [sample, g] : groups)
    rep.rows.push_back(compute_sample_metrics(sample, g.first, g.second, cfg.pipeline, cfg.histogram_bin));
  fs::create_directories(out);
  write_text(out / "report.csv", rep.to_csv());
  write_text(out / "report.json", rep.to_json());
  write_provenance(cfg, out, "report");
  std::cout << rep.to_csv();
  return 0;
}

int cmd_plot(const fs::path& report, const fs::path& out) {
  const fs::path file = fs::is_directory(report) ? report / "report.json" : report;
  if (!fs::exists(file)) throw ConfigError("plot: report '" + file.string() + "' not found");
  const MetricsReport rep = report_from_json(read_text(file));
  if (rep.rows.empty()) throw ConfigError("plot: report has no rows");
  fs::create_directories(out);
  for (const auto& row : rep.rows) {
    write_text(out / (row.sample + "_trajectory.svg"), trajectory_svg(row));
    write_text(out / (row.sample + "_fingerprint.svg"), fingerprint_band_svg(row));
    write_text(out / (row.sample + "_intensity.svg"), intensity_histogram_svg(row));
  }
  std::cout << 3 * rep.rows.size() << " plots written to " << out.string() << "\n";
  return 0;
}

}  // namespace drs
