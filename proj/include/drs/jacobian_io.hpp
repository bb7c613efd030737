#ifndef DRS_JACOBIAN_IO_HPP
#define DRS_JACOBIAN_IO_HPP

#include "drs/format.hpp"
#include "drs/jacobian.hpp"

#include <filesystem>
#include <string>

namespace drs {

// Estimator file "drs-jacobian-estimator" version 1: line-oriented text,
// doubles in shortest round-trip form, matrices row-major. Reading back a
// written file reproduces every value bit for bit.
inline constexpr int kEstimatorFormatVersion = 1;

std::string serialize_estimator(const JacobianEstimator& est);
JacobianEstimator parse_estimator(const std::string& text);

void save_estimator(const JacobianEstimator& est, const std::filesystem::path& path);
JacobianEstimator load_estimator(const std::filesystem::path& path);

}  // namespace drs

#endif  // DRS_JACOBIAN_IO_HPP
