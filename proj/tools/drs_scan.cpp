// drs_scan: calibrate the Jacobian estimator, run scanning trials, simulate
// the manual baseline, and build reports and plots.

#include "drs/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string line;
  std::string out;
  std::string estimator;
  std::string sample;
  int repeats = 0;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "Experiment config (JSON)");
  app->add_option("--seed", f.seed, "Run seed");
  app->add_option("--jobs", f.jobs, "Parallel trials")->check(CLI::PositiveNumber);
  app->add_option("--line", f.line, "Scan line u0,v0,u1,v1 in pixels");
  app->add_option("--out", f.out, "Output directory (default $DRSSCAN_OUT or ./drs_out)");
  app->add_option("--estimator", f.estimator, "Estimator file or 'analytic'");
  app->add_option("--sample", f.sample, "Sample preset");
  app->add_option("--repeats", f.repeats, "Trial count");
}

drs::ExperimentConfig resolve(CLI::App* app, const CommonFlags& f) {
  drs::Overrides o;
  if (app->count("--seed")) o.seed = f.seed;
  if (app->count("--jobs")) o.jobs = f.jobs;
  if (app->count("--line")) o.line = f.line;
  if (app->count("--out")) o.out = f.out;
  if (app->count("--estimator")) o.estimator = f.estimator;
  if (app->count("--sample")) o.sample = f.sample;
  if (app->count("--repeats")) o.repeats = f.repeats;
  std::optional<std::filesystem::path> path;
  if (!f.config.empty()) path = f.config;
  return drs::resolve_config(path, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid visual-servoing DRS scanning simulator"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* calibrate = app.add_subcommand("calibrate-jacobian", "Fit the GMM-LLS inverse Jacobian estimator");
  auto* run = app.add_subcommand("run", "Run one scanning trial");
  auto* batch = app.add_subcommand("batch", "Run seeded trials in parallel");
  auto* manual = app.add_subcommand("manual", "Simulate the hand-held baseline");
  for (auto* sub : {calibrate, run, batch, manual}) add_common(sub, flags);

  std::vector<std::string> log_dirs;
  auto* report = app.add_subcommand("report", "Compute metrics from trial logs");
  report->add_option("dirs", log_dirs, "Directories containing trial logs")->required();
  add_common(report, flags);

  std::string report_path;
  auto* plot = app.add_subcommand("plot", "Render SVG plots from a report");
  plot->add_option("report", report_path, "report.json or its directory")->required();
  plot->add_option("--out", flags.out, "Output directory (default: next to the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*calibrate) return drs::cmd_calibrate_jacobian(resolve(calibrate, flags));
    if (*run) return drs::cmd_run(resolve(run, flags));
    if (*batch) return drs::cmd_batch(resolve(batch, flags));
    if (*manual) return drs::cmd_manual(resolve(manual, flags));
    if (*report) {
      const auto cfg = resolve(report, flags);
      std::vector<std::filesystem::path> dirs(log_dirs.begin(), log_dirs.end());
      return drs::cmd_report(dirs, drs::output_dir(cfg), cfg);
    }
    if (*plot) {
      std::filesystem::path out = flags.out;
      if (out.empty()) {
        const std::filesystem::path r = report_path;
        out = std::filesystem::is_directory(r) ? r : r.parent_path();
      }
      return drs::cmd_plot(report_path, out);
    }
  } catch (const drs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
