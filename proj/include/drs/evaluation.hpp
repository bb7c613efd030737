#ifndef DRS_EVALUATION_HPP
#define DRS_EVALUATION_HPP

#include "drs/control.hpp"
#include "drs/spectro.hpp"

#include <string>
#include <vector>

namespace drs {

/// Nearest-rank percentile: the value at rank ceil(p/100 * N), 1-based.
double nearest_rank_percentile(std::vector<double> values, double p);

/// Perpendicular distance from p to the infinite line through the command.
double point_line_distance(const Pixel& p, const ScanCommand& line);

struct LineErrorStats {
  double avg = 0.0;
  double p90 = 0.0;
  std::size_t count = 0;
};

LineErrorStats line_error_stats(const std::vector<Pixel>& points, const ScanCommand& line);

struct SpeedStats {
  double avg = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

/// Per-step speed |x_{i+1} - x_i| / dt over a uniformly sampled path.
SpeedStats speed_stats(const std::vector<Vec3>& positions, double dt);
SpeedStats summarize_speeds(const std::vector<double>& speeds);

VecX mean_fingerprint(const std::vector<VecX>& set);
/// sqrt(mean_c (a_c - b_c)^2).
double fingerprint_rmse(const VecX& a, const VecX& b);
/// arccos of the clamped cosine similarity, radians.
double spectral_angle(const VecX& a, const VecX& b);
/// Mean over channels of the per-channel sample standard deviation.
double fingerprint_std(const std::vector<VecX>& set);

struct IntensityHistogram {
  double p25 = 0.0, p50 = 0.0, p75 = 0.0;
  double origin = 0.0;  // left edge of bin 0
  double bin_width = 0.01;
  std::vector<int> counts;

  double iqr() const { return p75 - p25; }
};

/// Bins are aligned to multiples of bin_width.
IntensityHistogram intensity_histogram(const std::vector<double>& values, double bin_width = 0.01);

// ---------------------------------------------------------------------------
// Trial-log extraction. The scan segment is the set of Scanning ticks where
// a spectrum was sampled, i.e. while the target traversed the line.
// ---------------------------------------------------------------------------

enum class Feature { Tip, Light };

std::vector<Pixel> scan_points(const TrialLog& log, Feature feature);
std::vector<double> scan_speeds(const TrialLog& log);

struct SpectralSet {
  std::vector<double> intensities;
  std::vector<VecX> fingerprints;
  VecX wavelengths;
};

/// Runs every logged raw spectrum through the acquisition pipeline.
SpectralSet spectral_set(const std::vector<TrialLog>& logs, const SpectralPipeline& pipeline = {});

/// One row per sample, mirroring the precision and consistency tables.
struct SampleMetrics {
  std::string sample;
  int trials = 0;
  int done = 0;
  double approach_median = -1.0;  // s
  double approach_p90 = -1.0;     // s
  LineErrorStats tip;
  LineErrorStats light;
  SpeedStats speed;
  double rmse_e3 = 0.0;     // RMSE of mean fingerprints, x1e-3
  double theta = 0.0;       // rad
  double sigma_m_e2 = 0.0;  // x1e-2
  double sigma_a_e2 = 0.0;  // x1e-2
  IntensityHistogram intensity_m;
  IntensityHistogram intensity_a;
  bool has_manual = false;
  // Plot series.
  VecX wavelengths;
  VecX mean_a, std_a, mean_m, std_m;
  std::vector<Pixel> trajectory_tip, trajectory_light;  // first automatic trial
  ScanCommand line;
};

SampleMetrics compute_sample_metrics(const std::string& sample, const std::vector<TrialLog>& automatic,
                                     const std::vector<TrialLog>& manual, const SpectralPipeline& pipeline = {},
                                     double bin_width = 0.01);

struct MetricsReport {
  std::vector<SampleMetrics> rows;
  std::string comparison = "mean-fingerprint";  // RMSE and angle compare set means

  std::string to_csv() const;
  std::string to_json() const;  // rows plus plot series
};

MetricsReport report_from_json(const std::string& text);

}  // namespace drs

#endif  // DRS_EVALUATION_HPP
