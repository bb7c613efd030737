#include "drs/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace drs {

namespace {

constexpr double kWidth = 640.0, kHeight = 400.0, kMargin = 50.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Linear map from data bounds to the plot area; y grows upward unless flipped.
struct Frame {
  double x0, x1, y0, y1;
  bool image_y = false;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const {
    const double f = (y - y0) / (y1 - y0);
    return image_y ? kMargin + f * (kHeight - 2 * kMargin) : kHeight - kMargin - f * (kHeight - 2 * kMargin);
  }
};

Frame pad(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) { x0 -= 1.0; x1 += 1.0; }
  if (!(y1 > y0)) { y0 -= 1.0; y1 += 1.0; }
  const double dx = 0.05 * (x1 - x0), dy = 0.05 * (y1 - y0);
  return {x0 - dx, x1 + dx, y0 - dy, y1 + dy};
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
     << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"14\">" << title << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  os << "<rect x=\"" << num(kMargin) << "\" y=\"" << num(kMargin) << "\" width=\"" << num(kWidth - 2 * kMargin)
     << "\" height=\"" << num(kHeight - 2 * kMargin) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"11\">" << xlabel << " [" << num(f.x0) << ", " << num(f.x1)
     << "]</text>\n";
  os << "<text x=\"14\" y=\"" << num(kHeight / 2) << "\" transform=\"rotate(-90 14 " << num(kHeight / 2)
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << ylabel << " ["
     << num(f.y0) << ", " << num(f.y1) << "]</text>\n";
}

void polyline(std::ostringstream& os, const Frame& f, const std::vector<Pixel>& pts, const char* colour,
              const char* extra = "") {
  if (pts.empty()) return;
  os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.2\" " << extra << " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i)
    os << (i ? " " : "") << num(f.px(pts[i](0))) << ',' << num(f.py(pts[i](1)));
  os << "\"/>\n";
}

void legend(std::ostringstream& os, int slot, const char* colour, const std::string& label) {
  const double y = kMargin + 14 + 14 * slot;
  os << "<rect x=\"" << num(kWidth - kMargin - 120) << "\" y=\"" << num(y - 9) << "\" width=\"10\" height=\"10\" "
     << "fill=\"" << colour << "\"/>\n<text x=\"" << num(kWidth - kMargin - 105) << "\" y=\"" << num(y)
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << label << "</text>\n";
}

}  // namespace

std::string trajectory_svg(const SampleMetrics& row) {
  double x0 = std::min(row.line.start(0), row.line.end(0)), x1 = std::max(row.line.start(0), row.line.end(0));
  double y0 = std::min(row.line.start(1), row.line.end(1)), y1 = std::max(row.line.start(1), row.line.end(1));
  for (const auto* path : {&row.trajectory_tip, &row.trajectory_light})
    for (const Pixel& p : *path) {
      x0 = std::min(x0, p(0)); x1 = std::max(x1, p(0));
      y0 = std::min(y0, p(1)); y1 = std::max(y1, p(1));
    }
  Frame f = pad(x0, x1, y0, y1);
  f.image_y = true;
  std::ostringstream os;
  header(os, row.sample + ": scan trajectory");
  axes(os, f, "u px", "v px");
  polyline(os, f, {row.line.start, row.line.end}, "black", "stroke-dasharray=\"6 3\"");
  polyline(os, f, row.trajectory_tip, "#1f77b4");
  polyline(os, f, row.trajectory_light, "#d62728");
  legend(os, 0, "black", "command line");
  legend(os, 1, "#1f77b4", "probe tip");
  legend(os, 2, "#d62728", "light centre");
  os << "</svg>\n";
  return os.str();
}

std::string fingerprint_band_svg(const SampleMetrics& row) {
  std::ostringstream os;
  header(os, row.sample + ": fingerprint mean +- std");
  if (row.wavelengths.size() < 2) {
    os << "</svg>\n";
    return os.str();
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto extend = [&](const VecX& m, const VecX& s) {
    if (m.size() != row.wavelengths.size()) return;
    lo = std::min(lo, (m - s).minCoeff());
    hi = std::max(hi, (m + s).maxCoeff());
  };
  extend(row.mean_a, row.std_a);
  extend(row.mean_m, row.std_m);
  if (!std::isfinite(lo)) { lo = 0.0; hi = 1.0; }
  const Frame f = pad(row.wavelengths(0), row.wavelengths(row.wavelengths.size() - 1), lo, hi);
  axes(os, f, "wavelength nm", "fingerprint");
  auto band = [&](const VecX& m, const VecX& s, const char* colour) {
    if (m.size() != row.wavelengths.size()) return;
    os << "<polygon fill=\"" << colour << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (Eigen::Index i = 0; i < m.size(); ++i)
      os << (i ? " " : "") << num(f.px(row.wavelengths(i))) << ',' << num(f.py(m(i) + s(i)));
    for (Eigen::Index i = m.size() - 1; i >= 0; --i)
      os << ' ' << num(f.px(row.wavelengths(i))) << ',' << num(f.py(m(i) - s(i)));
    os << "\"/>\n";
    std::vector<Pixel> line;
    for (Eigen::Index i = 0; i < m.size(); ++i) line.emplace_back(row.wavelengths(i), m(i));
    polyline(os, f, line, colour);
  };
  band(row.mean_a, row.std_a, "#1f77b4");
  band(row.mean_m, row.std_m, "#ff7f0e");
  legend(os, 0, "#1f77b4", "automatic");
  if (row.has_manual) legend(os, 1, "#ff7f0e", "manual");
  os << "</svg>\n";
  return os.str();
}

std::string intensity_histogram_svg(const SampleMetrics& row) {
  std::ostringstream os;
  header(os, row.sample + ": intensity distribution");
  const IntensityHistogram* sets[2] = {&row.intensity_a, row.has_manual ? &row.intensity_m : nullptr};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, peak = 1.0;
  for (const auto* h : sets) {
    if (!h || h->counts.empty()) continue;
    x0 = std::min(x0, h->origin);
    x1 = std::max(x1, h->origin + h->bin_width * static_cast<double>(h->counts.size()));
    peak = std::max(peak, static_cast<double>(*std::max_element(h->counts.begin(), h->counts.end())));
  }
  if (!std::isfinite(x0)) {
    os << "</svg>\n";
    return os.str();
  }
  const Frame f = pad(x0, x1, 0.0, peak);
  axes(os, f, "intensity", "count");
  const char* colours[2] = {"#1f77b4", "#ff7f0e"};
  for (int k = 0; k < 2; ++k) {
    const auto* h = sets[k];
    if (!h) continue;
    for (std::size_t b = 0; b < h->counts.size(); ++b) {
      const double a = h->origin + h->bin_width * static_cast<double>(b);
      const double top = f.py(h->counts[b]);
      os << "<rect x=\"" << num(f.px(a)) << "\" y=\"" << num(top) << "\" width=\""
         << num(f.px(a + h->bin_width) - f.px(a)) << "\" height=\"" << num(f.py(0.0) - top) << "\" fill=\""
         << colours[k] << "\" fill-opacity=\"0.45\"/>\n";
    }
    for (double p : {h->p25, h->p50, h->p75})
      os << "<line x1=\"" << num(f.px(p)) << "\" x2=\"" << num(f.px(p)) << "\" y1=\"" << num(f.py(0.0))
         << "\" y2=\"" << num(f.py(peak)) << "\" stroke=\"" << colours[k] << "\" stroke-dasharray=\"4 2\"/>\n";
  }
  legend(os, 0, colours[0], "automatic");
  if (sets[1]) legend(os, 1, colours[1], "manual");
  os << "</svg>\n";
  return os.str();
}

}  // namespace drs
