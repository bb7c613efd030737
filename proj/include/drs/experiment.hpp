#ifndef DRS_EXPERIMENT_HPP
#define DRS_EXPERIMENT_HPP

#include "drs/control.hpp"
#include "drs/manual.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace drs {

inline constexpr int kConfigSchemaVersion = 1;

struct JacobianCalibrationConfig {
  int K = 5;
  double tau = 1.0;
  std::string excitation = "lissajous";  // or "local"
  Vec3 local_centre{0.0, 0.0, 10.0};     // tip position for "local", mm
  double local_amplitude = 1e-3;         // mm
  double holdout_phase = 0.7;            // rad shift of the held-out trajectory
};

/// Everything a command needs. Parsed from JSON with unknown keys rejected;
/// the resolved form is written beside every output.
struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string sample = "liver_phantom";
  std::string scene;              // scene file; empty selects the sample's default scene
  std::string sensors = "default";  // default | ideal
  ControlConfig control;
  std::optional<ScanCommand> line;  // default: the sample's scan line
  std::string estimator;            // estimator file, or "analytic"
  std::uint64_t seed = 1;
  int repeats = 0;                  // 0 selects the sample's repeat count
  int jobs = 1;
  std::string output;               // empty: $DRSSCAN_OUT, else "drs_out"
  double max_failure_rate = 0.15;   // batch exit code 3 above this
  JacobianCalibrationConfig jacobian;
  ManualOperatorModel manual;
  SpectralPipeline pipeline;
  double histogram_bin = 0.01;
};

/// Defaults for `sample` (alpha, h* from the sample preset).
ExperimentConfig default_config(const std::string& sample = "liver_phantom");
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// "u0,v0,u1,v1".
ScanCommand parse_line(const std::string& text);

/// Command-line overrides applied on top of a config.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> line;
  std::optional<std::string> out;
  std::optional<std::string> estimator;
  std::optional<std::string> sample;
  std::optional<int> repeats;
};

ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& path, const Overrides& o);
std::filesystem::path output_dir(const ExperimentConfig& config);

SceneState make_scene(const ExperimentConfig& config);
ScanCommand make_command(const ExperimentConfig& config, const SceneState& scene);
TrialSensors make_sensors(const ExperimentConfig& config);
int resolved_repeats(const ExperimentConfig& config);
std::uint64_t trial_seed(std::uint64_t seed, int index);

/// Each command writes into output_dir(config) and returns the process exit
/// code: 0 success, 2 configuration error, 3 trial failure, 4 I/O error.
int cmd_calibrate_jacobian(const ExperimentConfig& config);
int cmd_run(const ExperimentConfig& config);
int cmd_batch(const ExperimentConfig& config);
int cmd_manual(const ExperimentConfig& config);
int cmd_report(const std::vector<std::filesystem::path>& log_dirs, const std::filesystem::path& out,
               const ExperimentConfig& config);
int cmd_plot(const std::filesystem::path& report, const std::filesystem::path& out);

}  // namespace drs

#endif  // DRS_EXPERIMENT_HPP
