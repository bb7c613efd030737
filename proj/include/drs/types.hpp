#ifndef DRS_TYPES_HPP
#define DRS_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace drs {

template <typename Scalar> using Vec2T = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Vec4T = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar> using Mat3T = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar> using Mat4T = Eigen::Matrix<Scalar, 4, 4>;
template <typename Scalar> using Mat34T = Eigen::Matrix<Scalar, 3, 4>;
template <typename Scalar> using Mat43T = Eigen::Matrix<Scalar, 4, 3>;

using Vec2 = Vec2T<double>;
using Vec3 = Vec3T<double>;
using Vec4 = Vec4T<double>;
using Mat3 = Mat3T<double>;
using Mat4 = Mat4T<double>;
using Mat34 = Mat34T<double>;
using Mat43 = Mat43T<double>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Pixel coordinates (u, v).
using Pixel = Vec2;
// Cartesian velocity (v_x, v_y, v_z) in mm/s.
using CartesianVelocity = Vec3;

/// Base class for all library errors. `code()` maps onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind { Config = 2, Trial = 3, Io = 4, Numeric = 5, Domain = 6 };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }
  int code() const { return static_cast<int>(kind_); }

 private:
  Kind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(Kind::Config, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(Kind::Io, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(Kind::Numeric, w) {}
};
// Precondition violations on geometric/domain inputs (off-tissue, behind camera, ...).
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(Kind::Domain, w) {}
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace drs

#endif  // DRS_TYPES_HPP
