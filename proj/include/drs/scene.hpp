#ifndef DRS_SCENE_HPP
#define DRS_SCENE_HPP

#include "drs/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace drs {

/*
 * Pinhole camera with world->camera extrinsics.
 *
 *   p_cam = R * p_world + t
 *   u = f * X / Z + c_u,   v = f * Y / Z + c_v
 *
 * Units: mm for geometry, px for the image plane.
 */
template <typename Scalar>
struct PinholeCameraT {
  Scalar focal = Scalar(900);
  Vec2T<Scalar> principal = Vec2T<Scalar>(640, 360);
  Mat3T<Scalar> rotation = Mat3T<Scalar>::Identity();
  Vec3T<Scalar> translation = Vec3T<Scalar>::Zero();
  int width = 1280;
  int height = 720;

  template <typename Derived>
  Vec3T<Scalar> to_camera(const Eigen::MatrixBase<Derived>& p_world) const {
    return rotation * p_world + translation;
  }

  Vec3T<Scalar> center() const { return -rotation.transpose() * translation; }

  template <typename Derived>
  bool in_image(const Eigen::MatrixBase<Derived>& px) const {
    return px(0) >= Scalar(0) && px(1) >= Scalar(0) && px(0) <= Scalar(width) &&
           px(1) <= Scalar(height);
  }
};

using PinholeCamera = PinholeCameraT<double>;

/// Projects a camera-frame point. Throws DomainError when Z <= 0.
template <typename Scalar, typename Derived>
Vec2T<Scalar> project_camera_frame(const PinholeCameraT<Scalar>& cam,
                                   const Eigen::MatrixBase<Derived>& p_cam) {
  if (!(p_cam(2) > Scalar(0))) throw DomainError("project: point behind camera");
  return Vec2T<Scalar>(cam.focal * p_cam(0) / p_cam(2) + cam.principal(0),
                       cam.focal * p_cam(1) / p_cam(2) + cam.principal(1));
}

template <typename Scalar, typename Derived>
Vec2T<Scalar> project(const PinholeCameraT<Scalar>& cam, const Eigen::MatrixBase<Derived>& p_world) {
  return project_camera_frame(cam, cam.to_camera(p_world));
}

/// d(pixel)/d(p_world), a 2x3 matrix.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, 2, 3> projection_jacobian(const PinholeCameraT<Scalar>& cam,
                                                const Eigen::MatrixBase<Derived>& p_world) {
  const Vec3T<Scalar> pc = cam.to_camera(p_world);
  if (!(pc(2) > Scalar(0))) throw DomainError("projection_jacobian: point behind camera");
  const Scalar iz = Scalar(1) / pc(2);
  Eigen::Matrix<Scalar, 2, 3> d;
  d << cam.focal * iz, Scalar(0), -cam.focal * pc(0) * iz * iz,  //
      Scalar(0), cam.focal * iz, -cam.focal * pc(1) * iz * iz;
  return d * cam.rotation;
}

/// Camera at `eye` looking at `target`; image x axis aligned with `right`
/// projected orthogonal to the viewing direction.
PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& right, double focal,
                      int width, int height);

struct MaterialInfo {
  std::string name;
  std::string fingerprint;    // spectral base curve id
  std::string noise_profile;  // height-sensor profile id
};

/*
 * Rest heightfield g(x, y) sampled on a regular grid, bilinear between nodes.
 * Node (i, j) sits at origin + (i * spacing, j * spacing); heights and
 * materials are stored row-major with i fastest (index j * nx + i).
 * Material ids are per cell; cell (i, j) spans nodes i..i+1, j..j+1.
 */
class TissueSurface {
 public:
  TissueSurface(Vec2 origin, double spacing, int nx, int ny, std::vector<double> heights,
                std::vector<int> materials, std::vector<MaterialInfo> table,
                double max_compression = 3.0);

  static TissueSurface flat(Vec2 origin, double spacing, int nx, int ny, double z,
                            MaterialInfo material, double max_compression = 3.0);
  // Low-amplitude sinusoidal relief g = z + A sin(2 pi x / L) cos(2 pi y / L).
  static TissueSurface relief(Vec2 origin, double spacing, int nx, int ny, double z,
                              double amplitude, double wavelength, MaterialInfo material,
                              double max_compression = 3.0);

  bool contains(double x, double y) const;
  double height(double x, double y) const;
  Vec2 gradient(double x, double y) const;
  int material_id(double x, double y) const;
  const MaterialInfo& material(double x, double y) const;

  Vec2 origin() const { return origin_; }
  double spacing() const { return spacing_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  Vec2 extent_max() const { return origin_ + spacing_ * Vec2(nx_ - 1, ny_ - 1); }
  double max_compression() const { return max_compression_; }
  const std::vector<double>& heights() const { return heights_; }
  const std::vector<int>& materials() const { return materials_; }
  const std::vector<MaterialInfo>& material_table() const { return table_; }

 private:
  struct Cell {
    int i, j;
    double fx, fy;
  };
  Cell locate(double x, double y) const;
  double node(int i, int j) const { return heights_[static_cast<std::size_t>(j) * nx_ + i]; }

  Vec2 origin_;
  double spacing_;
  int nx_, ny_;
  std::vector<double> heights_;
  std::vector<int> materials_;
  std::vector<MaterialInfo> table_;
  double max_compression_;
};

/// Probe tip position in world mm. Orientation is fixed, pointing along -z.
struct ProbePose {
  Vec3 position = Vec3::Zero();
};

struct ContactState {
  double h = 0.0;  // z_tip - g(x_tip, y_tip): > 0 gap, < 0 compression
  int material = 0;
};

/// Immutable value advanced by `step`. The surface is shared read-only.
struct SceneState {
  ProbePose pose;
  std::shared_ptr<const TissueSurface> surface;
  PinholeCamera third_person;
  PinholeCamera wrist_intrinsics;  // pose ignored; mounted on the probe
  Vec3 wrist_offset = Vec3(0, -25, 60);  // camera centre relative to the tip
  double speed_limit = 10.0;             // mm/s
  double time = 0.0;                     // s
};

SceneState step(const SceneState& state, const CartesianVelocity& v, double dt);

struct GroundTruthFeatures {
  Pixel tip;
  Pixel light;
  Vec4 stacked() const { return (Vec4() << tip, light).finished(); }
};

/// Tip pixel and illuminated-area centre (surface point beneath the tip).
GroundTruthFeatures ground_truth_features(const SceneState& state);

ContactState contact_height(const SceneState& state);

/// Surface point vertically beneath the probe tip.
Vec3 light_centre_world(const SceneState& state);

/// Wrist camera posed for the current probe position, looking straight down.
PinholeCamera wrist_camera(const SceneState& state);

/// Intersects the viewing ray through `px` with the rest surface.
Vec3 backproject_to_surface(const PinholeCamera& cam, const Pixel& px, const TissueSurface& surface);

/// Places the probe tip at height `h` above the surface point (x, y).
SceneState with_tip_at(const SceneState& state, double x, double y, double h);

}  // namespace drs

#endif  // DRS_SCENE_HPP
