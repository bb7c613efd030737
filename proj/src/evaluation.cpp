#include "drs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace drs {

using ojson = nlohmann::ordered_json;

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw DomainError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p / 100.0 * n - 1e-9)));
  return values[std::min(rank, values.size()) - 1];
}

double point_line_distance(const Pixel& p, const ScanCommand& line) {
  const Vec2 d = line.end - line.start;
  const double len = d.norm();
  if (!(len > 0.0)) throw DomainError("degenerate line");
  const Vec2 q = p - line.start;
  return std::abs(d(0) * q(1) - d(1) * q(0)) / len;
}

LineErrorStats line_error_stats(const std::vector<Pixel>& points, const ScanCommand& line) {
  if (points.size() < 2) throw DomainError("line error: fewer than two scanning points");
  std::vector<double> d;
  d.reserve(points.size());
  for (const Pixel& p : points) d.push_back(point_line_distance(p, line));
  double sum = 0.0;
  for (double v : d) sum += v;
  return {sum / static_cast<double>(d.size()), nearest_rank_percentile(d, 90.0), d.size()};
}

SpeedStats summarize_speeds(const std::vector<double>& speeds) {
  if (speeds.empty()) throw DomainError("speed stats: empty segment");
  const auto n = static_cast<double>(speeds.size());
  double mean = 0.0;
  for (double v : speeds) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : speeds) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n), speeds.size()};
}

SpeedStats speed_stats(const std::vector<Vec3>& positions, double dt) {
  if (!(dt > 0.0)) throw DomainError("speed stats: dt must be > 0");
  if (positions.size() < 2) throw DomainError("speed stats: empty segment");
  std::vector<double> v;
  v.reserve(positions.size() - 1);
  for (std::size_t i = 1; i < positions.size(); ++i) v.push_back((positions[i] - positions[i - 1]).norm() / dt);
  return summarize_speeds(v);
}

VecX mean_fingerprint(const std::vector<VecX>& set) {
  if (set.empty()) throw DomainError("fingerprint set is empty");
  VecX m = VecX::Zero(set.front().size());
  for (const VecX& f : set) {
    if (f.size() != m.size()) throw DomainError("fingerprint channel counts differ");
    m += f;
  }
  return m / static_cast<double>(set.size());
}

double fingerprint_rmse(const VecX& a, const VecX& b) {
  if (a.size() != b.size() || a.size() == 0) throw DomainError("rmse: dimension mismatch");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double spectral_angle(const VecX& a, const VecX& b) {
  if (a.size() != b.size() || a.size() == 0) throw DomainError("spectral angle: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("spectral angle: zero vector");
  return std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0));
}

double fingerprint_std(const std::vector<VecX>& set) {
  if (set.size() < 2) throw DomainError("fingerprint std needs at least two fingerprints");
  const VecX m = mean_fingerprint(set);
  VecX ss = VecX::Zero(m.size());
  for (const VecX& f : set) ss += (f - m).cwiseAbs2();
  return (ss / static_cast<double>(set.size() - 1)).cwiseSqrt().mean();
}

IntensityHistogram intensity_histogram(const std::vector<double>& values, double bin_width) {
  if (values.empty()) throw DomainError("intensity histogram: empty set");
  if (!(bin_width > 0.0)) throw DomainError("intensity histogram: bin width must be > 0");
  IntensityHistogram h;
  h.p25 = nearest_rank_percentile(values, 25.0);
  h.p50 = nearest_rank_percentile(values, 50.0);
  h.p75 = nearest_rank_percentile(values, 75.0);
  h.bin_width = bin_width;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  h.origin = std::floor(*lo / bin_width) * bin_width;
  const auto bins = static_cast<std::size_t>(std::floor((*hi - h.origin) / bin_width)) + 1;
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - h.origin) / bin_width));
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

std::vector<Pixel> scan_points(const TrialLog& log, Feature feature) {
  std::vector<Pixel> out;
  for (const auto& t : log.ticks)
    if (t.stage == Stage::Scanning && t.spectrum >= 0)
      out.push_back(feature == Feature::Tip ? Pixel(t.s_true.head<2>()) : Pixel(t.s_true.tail<2>()));
  return out;
}

std::vector<double> scan_speeds(const TrialLog& log) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < log.ticks.size(); ++i) {
    const auto& t = log.ticks[i];
    if (t.stage == Stage::Scanning && t.spectrum >= 0)
      out.push_back((log.ticks[i + 1].position - t.position).norm() / log.dt);
  }
  return out;
}

SpectralSet spectral_set(const std::vector<TrialLog>& logs, const SpectralPipeline& pipeline) {
  SpectralSet set;
  for (const auto& log : logs) {
    if (log.spectra.empty()) continue;
    if (!log.white || !log.dark) throw ConfigError("trial '" + log.id + "' has spectra but no references");
    for (const auto& raw : log.spectra) {
      const SpectrumFeatures f = analyse(raw, *log.white, *log.dark, pipeline);
      set.intensities.push_back(f.intensity);
      set.fingerprints.push_back(f.fingerprint.values);
    }
    if (set.wavelengths.size() == 0)
      set.wavelengths = crop(log.spectra.front(), pipeline.crop_lo, pipeline.crop_hi).grid.wavelengths();
  }
  return set;
}

namespace {

VecX channel_std(const std::vector<VecX>& set, const VecX& mean) {
  VecX ss = VecX::Zero(mean.size());
  if (set.size() < 2) return ss;
  for (const VecX& f : set) ss += (f - mean).cwiseAbs2();
  return (ss / static_cast<double>(set.size() - 1)).cwiseSqrt();
}

}  // namespace

SampleMetrics compute_sample_metrics(const std::string& sample, const std::vector<TrialLog>& automatic,
                                     const std::vector<TrialLog>& manual, const SpectralPipeline& pipeline,
                                     double bin_width) {
  SampleMetrics m;
  m.sample = sample;
  m.trials = static_cast<int>(automatic.size());
  std::vector<double> approach;
  std::vector<Pixel> tips, lights;
  std::vector<double> speeds;
  for (const auto& log : automatic) {
    if (log.done()) ++m.done;
    if (log.approach_time >= 0.0) approach.push_back(log.approach_time);
    const auto t = scan_points(log, Feature::Tip);
    const auto l = scan_points(log, Feature::Light);
    tips.insert(tips.end(), t.begin(), t.end());
    lights.insert(lights.end(), l.begin(), l.end());
    const auto s = scan_speeds(log);
    speeds.insert(speeds.end(), s.begin(), s.end());
  }
  if (!approach.empty()) {
    m.approach_median = nearest_rank_percentile(approach, 50.0);
    m.approach_p90 = nearest_rank_percentile(approach, 90.0);
  }
  if (!automatic.empty()) m.line = automatic.front().command;
  if (tips.size() >= 2) {
    m.tip = line_error_stats(tips, m.line);
    m.light = line_error_stats(lights, m.line);
  }
  if (!speeds.empty()) m.speed = summarize_speeds(speeds);
  if (!automatic.empty()) {
    m.trajectory_tip = scan_points(automatic.front(), Feature::Tip);
    m.trajectory_light = scan_points(automatic.front(), Feature::Light);
  }

  const SpectralSet a = spectral_set(automatic, pipeline);
  const SpectralSet h = spectral_set(manual, pipeline);
  m.wavelengths = a.wavelengths.size() ? a.wavelengths : h.wavelengths;
  if (!a.fingerprints.empty()) {
    m.mean_a = mean_fingerprint(a.fingerprints);
    m.std_a = channel_std(a.fingerprints, m.mean_a);
    m.intensity_a = intensity_histogram(a.intensities, bin_width);
    if (a.fingerprints.size() >= 2) m.sigma_a_e2 = fingerprint_std(a.fingerprints) * 1e2;
  }
  if (!h.fingerprints.empty()) {
    m.has_manual = true;
    m.mean_m = mean_fingerprint(h.fingerprints);
    m.std_m = channel_std(h.fingerprints, m.mean_m);
    m.intensity_m = intensity_histogram(h.intensities, bin_width);
    if (h.fingerprints.size() >= 2) m.sigma_m_e2 = fingerprint_std(h.fingerprints) * 1e2;
    if (!a.fingerprints.empty()) {
      m.rmse_e3 = fingerprint_rmse(m.mean_a, m.mean_m) * 1e3;
      m.theta = spectral_angle(m.mean_a, m.mean_m);
    }
  }
  return m;
}

namespace {

ojson vec_json(const VecX& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VecX json_vec(const ojson& a) {
  VecX v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

ojson path_json(const std::vector<Pixel>& p) {
  ojson a = ojson::array();
  for (const Pixel& q : p) a.push_back({q(0), q(1)});
  return a;
}

std::vector<Pixel> json_path(const ojson& a) {
  std::vector<Pixel> p;
  for (const auto& q : a) p.emplace_back(q[0].get<double>(), q[1].get<double>());
  return p;
}

ojson hist_json(const IntensityHistogram& h) {
  return {{"p25", h.p25}, {"p50", h.p50}, {"p75", h.p75}, {"origin", h.origin},
          {"bin_width", h.bin_width}, {"counts", h.counts}};
}

IntensityHistogram json_hist(const ojson& j) {
  IntensityHistogram h;
  h.p25 = j.at("p25").get<double>();
  h.p50 = j.at("p50").get<double>();
  h.p75 = j.at("p75").get<double>();
  h.origin = j.at("origin").get<double>();
  h.bin_width = j.at("bin_width").get<double>();
  h.counts = j.at("counts").get<std::vector<int>>();
  return h;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "sample,trials,done,approach_median_s,approach_p90_s,p_err_avg_px,p_err_p90_px,l_err_avg_px,"
        "l_err_p90_px,speed_avg_mm_s,speed_std_mm_s,rmse_e3,theta_rad,sigma_m_e2,sigma_a_e2,"
        "m_p25,m_p50,m_p75,a_p25,a_p50,a_p75\n";
  for (const auto& r : rows) {
    os << r.sample << ',' << r.trials << ',' << r.done << ',' << fmt(r.approach_median) << ','
       << fmt(r.approach_p90) << ',' << fmt(r.tip.avg) << ',' << fmt(r.tip.p90) << ',' << fmt(r.light.avg) << ','
       << fmt(r.light.p90) << ',' << fmt(r.speed.avg) << ',' << fmt(r.speed.std) << ',' << fmt(r.rmse_e3) << ','
       << fmt(r.theta) << ',' << fmt(r.sigma_m_e2) << ',' << fmt(r.sigma_a_e2) << ','
       << fmt(r.intensity_m.p25) << ',' << fmt(r.intensity_m.p50) << ',' << fmt(r.intensity_m.p75) << ','
       << fmt(r.intensity_a.p25) << ',' << fmt(r.intensity_a.p50) << ',' << fmt(r.intensity_a.p75) << '\n';
  }
  return os.str();
}

std::string MetricsReport::to_json() const {
  ojson j;
  j["format"] = "drs-report";
  j["version"] = 1;
  j["comparison"] = comparison;
  j["units"] = {{"error", "px"}, {"speed", "mm/s"}, {"rmse", "1e-3"}, {"theta", "rad"}, {"sigma", "1e-2"}};
  ojson rows_json = ojson::array();
  for (const auto& r : rows) {
    ojson o;
    o["sample"] = r.sample;
    o["trials"] = r.trials;
    o["done"] = r.done;
    o["approach_median_s"] = r.approach_median;
    o["approach_p90_s"] = r.approach_p90;
    o["tip_error"] = {{"avg", r.tip.avg}, {"p90", r.tip.p90}, {"count", r.tip.count}};
    o["light_error"] = {{"avg", r.light.avg}, {"p90", r.light.p90}, {"count", r.light.count}};
    o["speed"] = {{"avg", r.speed.avg}, {"std", r.speed.std}, {"count", r.speed.count}};
    o["rmse_e3"] = r.rmse_e3;
    o["theta_rad"] = r.theta;
    o["sigma_m_e2"] = r.sigma_m_e2;
    o["sigma_a_e2"] = r.sigma_a_e2;
    o["has_manual"] = r.has_manual;
    o["intensity_m"] = hist_json(r.intensity_m);
    o["intensity_a"] = hist_json(r.intensity_a);
    o["line"] = {r.line.start(0), r.line.start(1), r.line.end(0), r.line.end(1)};
    o["wavelengths"] = vec_json(r.wavelengths);
    o["mean_a"] = vec_json(r.mean_a);
    o["std_a"] = vec_json(r.std_a);
    o["mean_m"] = vec_json(r.mean_m);
    o["std_m"] = vec_json(r.std_m);
    o["trajectory_tip"] = path_json(r.trajectory_tip);
    o["trajectory_light"] = path_json(r.trajectory_light);
    rows_json.push_back(std::move(o));
  }
  j["rows"] = std::move(rows_json);
  return j.dump(1) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  MetricsReport rep;
  try {
    const ojson j = ojson::parse(text);
    if (j.at("format").get<std::string>() != "drs-report") throw ConfigError("not a report file");
    rep.comparison = j.at("comparison").get<std::string>();
    for (const auto& o : j.at("rows")) {
      SampleMetrics r;
      r.sample = o.at("sample").get<std::string>();
      r.trials = o.at("trials").get<int>();
      r.done = o.at("done").get<int>();
      r.approach_median = o.at("approach_median_s").get<double>();
      r.approach_p90 = o.at("approach_p90_s").get<double>();
      r.tip = {o["tip_error"]["avg"].get<double>(), o["tip_error"]["p90"].get<double>(),
               o["tip_error"]["count"].get<std::size_t>()};
      r.light = {o["light_error"]["avg"].get<double>(), o["light_error"]["p90"].get<double>(),
                 o["light_error"]["count"].get<std::size_t>()};
      r.speed = {o["speed"]["avg"].get<double>(), o["speed"]["std"].get<double>(),
                 o["speed"]["count"].get<std::size_t>()};
      r.rmse_e3 = o.at("rmse_e3").get<double>();
      r.theta = o.at("theta_rad").get<double>();
      r.sigma_m_e2 = o.at("sigma_m_e2").get<double>();
      r.sigma_a_e2 = o.at("sigma_a_e2").get<double>();
      r.has_manual = o.at("has_manual").get<bool>();
      r.intensity_m = json_hist(o.at("intensity_m"));
      r.intensity_a = json_hist(o.at("intensity_a"));
      const auto line = o.at("line").get<std::vector<double>>();
      if (line.size() != 4) throw ConfigError("report: line needs four numbers");
      r.line = {{line[0], line[1]}, {line[2], line[3]}};
      r.wavelengths = json_vec(o.at("wavelengths"));
      r.mean_a = json_vec(o.at("mean_a"));
      r.std_a = json_vec(o.at("std_a"));
      r.mean_m = json_vec(o.at("mean_m"));
      r.std_m = json_vec(o.at("std_m"));
      r.trajectory_tip = json_path(o.at("trajectory_tip"));
      r.trajectory_light = json_path(o.at("trajectory_light"));
      rep.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  return rep;
}

}  // namespace drs
