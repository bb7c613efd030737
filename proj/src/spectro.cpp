#include "drs/spectro.hpp"

#include "drs/format.hpp"

#include <cmath>
#include <sstream>

namespace drs {

int WavelengthGrid::size() const {
  return static_cast<int>(std::llround((lambda_max - lambda_min) / spacing)) + 1;
}

VecX WavelengthGrid::wavelengths() const {
  VecX w(size());
  for (int i = 0; i < w.size(); ++i) w(i) = wavelength(i);
  return w;
}

void WavelengthGrid::validate() const {
  if (!(spacing > 0.0) || !(lambda_max > lambda_min))
    throw ConfigError("wavelength grid must be strictly increasing");
  const double steps = (lambda_max - lambda_min) / spacing;
  if (std::abs(steps - std::round(steps)) > 1e-6)
    throw ConfigError("wavelength grid span is not a multiple of the spacing");
}

std::string to_string(SpectrumRole role) {
  switch (role) {
    case SpectrumRole::Raw: return "raw";
    case SpectrumRole::White: return "white";
    case SpectrumRole::Dark: return "dark";
    case SpectrumRole::Calibrated: return "calibrated";
  }
  return "raw";
}

SpectrumRole role_from_string(const std::string& s) {
  if (s == "raw") return SpectrumRole::Raw;
  if (s == "white") return SpectrumRole::White;
  if (s == "dark") return SpectrumRole::Dark;
  if (s == "calibrated") return SpectrumRole::Calibrated;
  throw ConfigError("unknown spectrum role '" + s + "'");
}

bool Spectrum::flagged() const {
  if (role != SpectrumRole::Calibrated) return false;
  return values.size() > 0 && (values.minCoeff() < -0.1 || values.maxCoeff() > 1.5);
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double bump(double l, double centre, double width) {
  const double z = (l - centre) / width;
  return std::exp(-0.5 * z * z);
}

struct CurveShape {
  double floor, rise, edge, width, dip1, dip2;
};

VecX curve(const WavelengthGrid& grid, const CurveShape& c) {
  VecX b(grid.size());
  for (int i = 0; i < b.size(); ++i) {
    const double l = grid.wavelength(i);
    // Haemoglobin-like absorption bands at 542 and 577 nm on a red edge.
    b(i) = c.floor + c.rise * logistic((l - c.edge) / c.width) - c.dip1 * bump(l, 542.0, 12.0) -
           c.dip2 * bump(l, 577.0, 10.0);
  }
  return b;
}

void check_same_grid(const Spectrum& a, const Spectrum& b, const char* what) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size())
    throw DomainError(std::string("calibrate: ") + what + " grid mismatch");
}

}  // namespace

Spectrum TissueOpticalModel::white() const {
  grid.validate();
  return {grid, VecX::Constant(grid.size(), white_level), SpectrumRole::White, "white"};
}

Spectrum TissueOpticalModel::dark() const {
  grid.validate();
  return {grid, VecX::Constant(grid.size(), dark_level), SpectrumRole::Dark, "dark"};
}

const VecX& TissueOpticalModel::reflectance(const std::string& material) const {
  auto it = base.find(material);
  if (it == base.end()) throw ConfigError("optical model: unknown material '" + material + "'");
  return it->second;
}

TissueOpticalModel TissueOpticalModel::standard(const WavelengthGrid& grid) {
  grid.validate();
  TissueOpticalModel m;
  m.grid = grid;
  m.base["liver_phantom"] = curve(grid, {0.08, 0.45, 600.0, 18.0, 0.030, 0.035});
  m.base["stomach_phantom"] = curve(grid, {0.20, 0.40, 585.0, 20.0, 0.040, 0.045});
  m.base["rump_steak"] = curve(grid, {0.06, 0.38, 595.0, 15.0, 0.025, 0.030});
  m.base["lamb_liver"] = curve(grid, {0.05, 0.30, 610.0, 20.0, 0.020, 0.025});
  return m;
}

double gap_coupling(double h, double h0) {
  const double z = std::max(h, 0.0) / h0;
  return std::exp(-z * z);
}

Spectrum synthesize_raw(const TissueOpticalModel& model, const std::string& material, double h, Rng& rng) {
  const VecX& b = model.reflectance(material);
  const int n = model.grid.size();
  VecX r = b;
  if (h < 0.0 && n > 1) {
    // xi runs linearly from -1 at the blue end to +1 at the red end.
    const VecX xi = VecX::LinSpaced(n, -1.0, 1.0);
    r = b.array() * (1.0 + model.compression * std::abs(h) * xi.array());
  }
  const double g = gap_coupling(h, model.h0);
  Spectrum s;
  s.grid = model.grid;
  s.role = SpectrumRole::Raw;
  s.values = VecX::Constant(n, model.dark_level) + g * (model.white_level - model.dark_level) * r;
  if (model.noise_sigma > 0.0) {
    std::normal_distribution<double> eps(0.0, model.noise_sigma);
    for (int i = 0; i < n; ++i) s.values(i) += eps(rng);
  }
  return s;
}

Spectrum calibrate(const Spectrum& raw, const Spectrum& white, const Spectrum& dark) {
  check_same_grid(raw, white, "white");
  check_same_grid(raw, dark, "dark");
  const VecX denom = white.values - dark.values;
  std::string bad;
  int nbad = 0;
  for (int i = 0; i < denom.size(); ++i) {
    if (!(denom(i) > 0.0)) {
      if (nbad < 8) bad += (bad.empty() ? "" : ", ") + format_double(raw.grid.wavelength(i));
      ++nbad;
    }
  }
  if (nbad > 0)
    throw DomainError("calibrate: white <= dark at " + std::to_string(nbad) + " channel(s) [" + bad +
                      (nbad > 8 ? ", ..." : "") + " nm]");
  Spectrum out;
  out.grid = raw.grid;
  out.id = raw.id;
  out.role = SpectrumRole::Calibrated;
  out.values = (raw.values - dark.values).cwiseQuotient(denom);
  return out;
}

Spectrum savgol(const Spectrum& s, int window, int order) {
  if (window < 1 || window % 2 == 0) throw ConfigError("savgol: window must be a positive odd integer");
  if (order < 0 || order >= window) throw ConfigError("savgol: order must satisfy 0 <= order < window");
  const int n = static_cast<int>(s.values.size());
  if (n < window) throw DomainError("savgol: spectrum shorter than the window");
  const int half = window / 2;

  // Weights w such that (w . y_window) is the fitted polynomial at offset 0.
  auto weights = [&](int lo, int hi) {
    const int m = hi - lo + 1;
    const int deg = std::min(order, m - 1);
    MatX V(m, deg + 1);
    for (int r = 0; r < m; ++r) {
      const double x = static_cast<double>(lo + r) / std::max(half, 1);
      double p = 1.0;
      for (int c = 0; c <= deg; ++c, p *= x) V(r, c) = p;
    }
    const MatX pinv = V.completeOrthogonalDecomposition().pseudoInverse();
    return VecX(pinv.row(0).transpose());
  };

  const VecX centre = weights(-half, half);
  Spectrum out = s;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half) - i;
    const int hi = std::min(n - 1, i + half) - i;
    if (lo == -half && hi == half) {
      out.values(i) = centre.dot(s.values.segment(i - half, window));
    } else {
      out.values(i) = weights(lo, hi).dot(s.values.segment(i + lo, hi - lo + 1));
    }
  }
  return out;
}

Spectrum crop(const Spectrum& s, double lo, double hi) {
  constexpr double eps = 1e-9;
  if (!(lo <= hi)) throw DomainError("crop: empty band");
  if (lo < s.grid.lambda_min - eps || hi > s.grid.lambda_max + eps)
    throw DomainError("crop: band " + format_double(lo) + "-" + format_double(hi) + " nm outside grid " +
                      format_double(s.grid.lambda_min) + "-" + format_double(s.grid.lambda_max) + " nm");
  const int first = static_cast<int>(std::ceil((lo - s.grid.lambda_min) / s.grid.spacing - eps));
  const int last = static_cast<int>(std::floor((hi - s.grid.lambda_min) / s.grid.spacing + eps));
  if (last < first) throw DomainError("crop: band contains no channels");
  Spectrum out;
  out.grid = {s.grid.wavelength(first), s.grid.wavelength(last), s.grid.spacing};
  out.values = s.values.segment(first, last - first + 1);
  out.role = s.role;
  out.id = s.id;
  return out;
}

double intensity(const Spectrum& calibrated) {
  if (calibrated.values.size() == 0) throw DomainError("intensity: empty spectrum");
  return calibrated.values.mean();
}

Fingerprint fingerprint(const Spectrum& calibrated) {
  const double norm = calibrated.values.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("fingerprint: zero-norm spectrum");
  return {calibrated.values / norm, calibrated.id};
}

SpectrumFeatures analyse(const Spectrum& raw, const Spectrum& white, const Spectrum& dark,
                         const SpectralPipeline& p) {
  const Spectrum c = crop(savgol(calibrate(raw, white, dark), p.window, p.order), p.crop_lo, p.crop_hi);
  return {intensity(c), fingerprint(c)};
}

std::string spectra_to_csv(const std::vector<Spectrum>& spectra) {
  if (spectra.empty()) throw DomainError("spectra csv: nothing to write");
  const WavelengthGrid& g = spectra.front().grid;
  for (const auto& s : spectra) {
    if (!(s.grid == g) || s.values.size() != g.size())
      throw DomainError("spectra csv: all spectra must share one grid");
    if (s.id.find(',') != std::string::npos) throw DomainError("spectra csv: id contains a comma");
  }
  std::ostringstream os;
  os << "wavelength_nm";
  for (const auto& s : spectra) os << ',' << to_string(s.role) << ':' << s.id;
  os << '\n';
  for (int i = 0; i < g.size(); ++i) {
    os << format_double(g.wavelength(i));
    for (const auto& s : spectra) os << ',' << format_double(s.values(i));
    os << '\n';
  }
  return os.str();
}

std::vector<Spectrum> spectra_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("spectra csv: empty file");
  const auto header = split(line, ',');
  if (header.empty() || header[0] != "wavelength_nm")
    throw ConfigError("spectra csv: first column must be wavelength_nm");
  std::vector<Spectrum> out(header.size() - 1);
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto colon = header[c].find(':');
    if (colon == std::string::npos) throw ConfigError("spectra csv: column '" + header[c] + "' lacks a role tag");
    out[c - 1].role = role_from_string(header[c].substr(0, colon));
    out[c - 1].id = header[c].substr(colon + 1);
  }
  std::vector<double> lambdas;
  std::vector<std::vector<double>> cols(out.size());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw ConfigError("spectra csv row " + std::to_string(row) + ": expected " +
                        std::to_string(header.size()) + " cells");
    lambdas.push_back(parse_double(cells[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) cols[c - 1].push_back(parse_double(cells[c]));
  }
  if (lambdas.size() < 2) throw ConfigError("spectra csv: need at least two channels");
  WavelengthGrid g{lambdas.front(), lambdas.back(), lambdas[1] - lambdas[0]};
  g.validate();
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    if (std::abs(lambdas[i] - g.wavelength(static_cast<int>(i))) > 1e-6 * g.spacing)
      throw ConfigError("spectra csv: wavelength column is not uniform");
  if (static_cast<std::size_t>(g.size()) != lambdas.size())
    throw ConfigError("spectra csv: wavelength column inconsistent with its spacing");
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c].grid = g;
    out[c].values = Eigen::Map<const VecX>(cols[c].data(), static_cast<Eigen::Index>(cols[c].size()));
  }
  return out;
}

void save_spectra(const std::vector<Spectrum>& spectra, const std::filesystem::path& path) {
  write_text(path, spectra_to_csv(spectra));
}

std::vector<Spectrum> load_spectra(const std::filesystem::path& path) {
  return spectra_from_csv(read_text(path));
}

}  // namespace drs
