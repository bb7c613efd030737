#include "drs/trial_io.hpp"

#include "drs/format.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace drs {

using ojson = nlohmann::ordered_json;

const std::vector<std::string> kTickColumns = {
    "tick",    "t",       "stage",   "light_seen", "raw_up",  "raw_vp",  "raw_ul",  "raw_vl",
    "filt_up", "filt_vp", "filt_ul", "filt_vl",    "true_up", "true_vp", "true_ul", "true_vl",
    "target_u", "target_v", "advancing", "h_true", "h_meas", "beta",   "avs_x",   "avs_y",
    "avs_z",   "ahc_x",   "ahc_y",   "ahc_z",      "a_x",     "a_y",     "a_z",     "x",
    "y",       "z",       "spectrum"};

std::string ticks_to_csv(const TrialLog& log) {
  std::ostringstream os;
  for (std::size_t i = 0; i < kTickColumns.size(); ++i) os << (i ? "," : "") << kTickColumns[i];
  os << '\n';
  auto put = [&](double v) { os << ',' << format_double(v); };
  for (const auto& t : log.ticks) {
    os << t.tick;
    put(t.t);
    os << ',' << to_string(t.stage) << ',' << (t.light_seen ? 1 : 0);
    for (int k = 0; k < 4; ++k) put(t.s_raw(k));
    for (int k = 0; k < 4; ++k) put(t.s_filt(k));
    for (int k = 0; k < 4; ++k) put(t.s_true(k));
    put(t.target(0));
    put(t.target(1));
    os << ',' << (t.advancing ? 1 : 0);
    put(t.h_true);
    put(t.h_meas);
    put(t.action.beta);
    for (int k = 0; k < 3; ++k) put(t.action.a_vs(k));
    for (int k = 0; k < 3; ++k) put(t.action.a_hc(k));
    for (int k = 0; k < 3; ++k) put(t.action.a(k));
    for (int k = 0; k < 3; ++k) put(t.position(k));
    os << ',' << t.spectrum << '\n';
  }
  return os.str();
}

std::vector<TrialTick> ticks_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split(line, ',') != kTickColumns)
    throw ConfigError("ticks csv: header does not match the expected columns");
  std::vector<TrialTick> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != kTickColumns.size())
      throw ConfigError("ticks csv row " + std::to_string(row) + ": wrong number of cells");
    std::size_t k = 0;
    auto num = [&] { return parse_double(c[k++]); };
    auto integer = [&] { return std::stoi(c[k++]); };
    TrialTick t;
    t.tick = integer();
    t.t = num();
    t.stage = stage_from_string(c[k++]);
    t.light_seen = integer() != 0;
    for (int i = 0; i < 4; ++i) t.s_raw(i) = num();
    for (int i = 0; i < 4; ++i) t.s_filt(i) = num();
    for (int i = 0; i < 4; ++i) t.s_true(i) = num();
    t.target(0) = num();
    t.target(1) = num();
    t.advancing = integer() != 0;
    t.h_true = num();
    t.h_meas = num();
    t.action.beta = num();
    for (int i = 0; i < 3; ++i) t.action.a_vs(i) = num();
    for (int i = 0; i < 3; ++i) t.action.a_hc(i) = num();
    for (int i = 0; i < 3; ++i) t.action.a(i) = num();
    for (int i = 0; i < 3; ++i) t.position(i) = num();
    t.spectrum = integer();
    out.push_back(t);
  }
  return out;
}

std::string trial_summary_json(const TrialLog& log) {
  ojson j;
  j["format"] = "drs-trial";
  j["version"] = 1;
  j["id"] = log.id;
  j["sample"] = log.sample;
  j["kind"] = log.kind;
  j["seed"] = log.seed;
  j["final_stage"] = to_string(log.final_stage);
  j["failure"] = log.failure;
  j["approach_time_s"] = format_double(log.approach_time);
  j["dt_s"] = format_double(log.dt);
  j["line"] = {format_double(log.command.start(0)), format_double(log.command.start(1)),
               format_double(log.command.end(0)), format_double(log.command.end(1))};
  j["ticks"] = log.ticks.size();
  j["spectra"] = log.spectra.size();
  return j.dump(1) + "\n";
}

void save_trial(const TrialLog& log, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "summary.json", trial_summary_json(log));
  write_text(dir / "ticks.csv", ticks_to_csv(log));
  if (log.white && log.dark) save_spectra({*log.white, *log.dark}, dir / "references.csv");
  if (!log.spectra.empty()) save_spectra(log.spectra, dir / "spectra.csv");
}

TrialLog load_trial(const std::filesystem::path& dir) {
  TrialLog log;
  try {
    const ojson j = ojson::parse(read_text(dir / "summary.json"));
    if (j.at("format").get<std::string>() != "drs-trial") throw ConfigError("not a trial summary");
    log.id = j.at("id").get<std::string>();
    log.sample = j.at("sample").get<std::string>();
    log.kind = j.at("kind").get<std::string>();
    log.seed = j.at("seed").get<std::uint64_t>();
    log.final_stage = stage_from_string(j.at("final_stage").get<std::string>());
    log.failure = j.at("failure").get<std::string>();
    log.approach_time = parse_double(j.at("approach_time_s").get<std::string>());
    log.dt = parse_double(j.at("dt_s").get<std::string>());
    const auto line = j.at("line").get<std::vector<std::string>>();
    if (line.size() != 4) throw ConfigError("trial summary: line needs four numbers");
    log.command.start = Pixel(parse_double(line[0]), parse_double(line[1]));
    log.command.end = Pixel(parse_double(line[2]), parse_double(line[3]));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("trial summary '" + (dir / "summary.json").string() + "': " + e.what());
  }
  log.ticks = ticks_from_csv(read_text(dir / "ticks.csv"));
  if (std::filesystem::exists(dir / "references.csv")) {
    for (auto& s : load_spectra(dir / "references.csv")) {
      if (s.role == SpectrumRole::White) log.white = s;
      if (s.role == SpectrumRole::Dark) log.dark = s;
    }
  }
  if (std::filesystem::exists(dir / "spectra.csv")) log.spectra = load_spectra(dir / "spectra.csv");
  return log;
}

std::vector<std::filesystem::path> find_trials(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(root)) return out;
  if (std::filesystem::exists(root / "summary.json")) out.push_back(root);
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "summary.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace drs
