#ifndef DRS_SVG_HPP
#define DRS_SVG_HPP

#include "drs/evaluation.hpp"

#include <string>

namespace drs {

/// Commanded line with the tip and light-centre paths of one trial, image px.
std::string trajectory_svg(const SampleMetrics& row);
/// Mean fingerprint with a +-1 std band for automatic and manual sets.
std::string fingerprint_band_svg(const SampleMetrics& row);
/// Intensity histograms with 25/50/75 percentile markers.
std::string intensity_histogram_svg(const SampleMetrics& row);

}  // namespace drs

#endif  // DRS_SVG_HPP
