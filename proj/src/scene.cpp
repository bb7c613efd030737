#include "drs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace drs {

PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& right, double focal,
                      int width, int height) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = right - right.dot(z) * z;
  if (x.norm() < 1e-9) throw ConfigError("look_at: right vector parallel to view direction");
  x.normalize();
  const Vec3 y = z.cross(x);
  PinholeCamera cam;
  cam.focal = focal;
  cam.width = width;
  cam.height = height;
  cam.principal = Vec2(0.5 * width, 0.5 * height);
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.translation = -cam.rotation * eye;
  return cam;
}

TissueSurface::TissueSurface(Vec2 origin, double spacing, int nx, int ny,
                             std::vector<double> heights, std::vector<int> materials,
                             std::vector<MaterialInfo> table, double max_compression)
    : origin_(origin),
      spacing_(spacing),
      nx_(nx),
      ny_(ny),
      heights_(std::move(heights)),
      materials_(std::move(materials)),
      table_(std::move(table)),
      max_compression_(max_compression) {
  if (!(spacing_ > 0.0)) throw ConfigError("surface: grid spacing must be > 0");
  if (nx_ < 2 || ny_ < 2) throw ConfigError("surface: grid needs at least 2x2 nodes");
  if (heights_.size() != static_cast<std::size_t>(nx_) * ny_)
    throw ConfigError("surface: height count does not match grid dims");
  if (materials_.size() != static_cast<std::size_t>(nx_ - 1) * (ny_ - 1))
    throw ConfigError("surface: material count does not match cell count");
  if (!(max_compression_ > 0.0)) throw ConfigError("surface: max_compression must be > 0");
  if (table_.empty()) throw ConfigError("surface: empty material table");
  for (double h : heights_)
    if (!std::isfinite(h)) throw ConfigError("surface: non-finite rest height");
  for (int m : materials_)
    if (m < 0 || m >= static_cast<int>(table_.size()))
      throw ConfigError("surface: material id out of table range");
}

TissueSurface TissueSurface::flat(Vec2 origin, double spacing, int nx, int ny, double z,
                                  MaterialInfo material, double max_compression) {
  return TissueSurface(origin, spacing, nx, ny,
                       std::vector<double>(static_cast<std::size_t>(nx) * ny, z),
                       std::vector<int>(static_cast<std::size_t>(nx - 1) * (ny - 1), 0),
                       {std::move(material)}, max_compression);
}

TissueSurface TissueSurface::relief(Vec2 origin, double spacing, int nx, int ny, double z,
                                    double amplitude, double wavelength, MaterialInfo material,
                                    double max_compression) {
  std::vector<double> h(static_cast<std::size_t>(nx) * ny);
  const double w = 2.0 * std::numbers::pi / wavelength;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double x = origin(0) + i * spacing;
      const double y = origin(1) + j * spacing;
      h[static_cast<std::size_t>(j) * nx + i] = z + amplitude * std::sin(w * x) * std::cos(w * y);
    }
  return TissueSurface(origin, spacing, nx, ny, std::move(h),
                       std::vector<int>(static_cast<std::size_t>(nx - 1) * (ny - 1), 0),
                       {std::move(material)}, max_compression);
}

bool TissueSurface::contains(double x, double y) const {
  const Vec2 hi = extent_max();
  return x >= origin_(0) && y >= origin_(1) && x <= hi(0) && y <= hi(1);
}

TissueSurface::Cell TissueSurface::locate(double x, double y) const {
  if (!std::isfinite(x) || !std::isfinite(y) || !contains(x, y))
    throw DomainError("off-tissue: point outside surface domain");
  const double gx = (x - origin_(0)) / spacing_;
  const double gy = (y - origin_(1)) / spacing_;
  const int i = std::clamp(static_cast<int>(std::floor(gx)), 0, nx_ - 2);
  const int j = std::clamp(static_cast<int>(std::floor(gy)), 0, ny_ - 2);
  return {i, j, gx - i, gy - j};
}

double TissueSurface::height(double x, double y) const {
  const Cell c = locate(x, y);
  const double h00 = node(c.i, c.j), h10 = node(c.i + 1, c.j);
  const double h01 = node(c.i, c.j + 1), h11 = node(c.i + 1, c.j + 1);
  return (1 - c.fx) * (1 - c.fy) * h00 + c.fx * (1 - c.fy) * h10 + (1 - c.fx) * c.fy * h01 +
         c.fx * c.fy * h11;
}

Vec2 TissueSurface::gradient(double x, double y) const {
  const Cell c = locate(x, y);
  const double h00 = node(c.i, c.j), h10 = node(c.i + 1, c.j);
  const double h01 = node(c.i, c.j + 1), h11 = node(c.i + 1, c.j + 1);
  const double dx = ((1 - c.fy) * (h10 - h00) + c.fy * (h11 - h01)) / spacing_;
  const double dy = ((1 - c.fx) * (h01 - h00) + c.fx * (h11 - h10)) / spacing_;
  return {dx, dy};
}

int TissueSurface::material_id(double x, double y) const {
  const Cell c = locate(x, y);
  return materials_[static_cast<std::size_t>(c.j) * (nx_ - 1) + c.i];
}

const MaterialInfo& TissueSurface::material(double x, double y) const {
  return table_[static_cast<std::size_t>(material_id(x, y))];
}

SceneState step(const SceneState& state, const CartesianVelocity& v, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("step: dt must be finite and > 0");
  if (!v.allFinite()) throw DomainError("step: non-finite velocity");
  CartesianVelocity vc = v;
  const double speed = vc.norm();
  if (speed > state.speed_limit) vc *= state.speed_limit / speed;

  SceneState next = state;
  next.pose.position = state.pose.position + vc * dt;
  next.time = state.time + dt;
  const Vec3& p = next.pose.position;
  if (state.surface && state.surface->contains(p(0), p(1))) {
    const double floor_z = state.surface->height(p(0), p(1)) - state.surface->max_compression();
    if (next.pose.position(2) < floor_z) next.pose.position(2) = floor_z;
  }
  return next;
}

Vec3 light_centre_world(const SceneState& state) {
  const Vec3& p = state.pose.position;
  return {p(0), p(1), state.surface->height(p(0), p(1))};
}

GroundTruthFeatures ground_truth_features(const SceneState& state) {
  GroundTruthFeatures f;
  f.tip = project(state.third_person, state.pose.position);
  f.light = project(state.third_person, light_centre_world(state));
  if (!state.third_person.in_image(f.tip) || !state.third_person.in_image(f.light))
    throw DomainError("ground_truth_features: feature outside third-person image");
  return f;
}

ContactState contact_height(const SceneState& state) {
  const Vec3& p = state.pose.position;
  const double h = std::max(p(2) - state.surface->height(p(0), p(1)),
                            -state.surface->max_compression());
  return {h, state.surface->material_id(p(0), p(1))};
}

PinholeCamera wrist_camera(const SceneState& state) {
  PinholeCamera cam = state.wrist_intrinsics;
  // Looking along -z; image x along world +x.
  Mat3 r;
  r << 1, 0, 0,  //
      0, -1, 0,  //
      0, 0, -1;
  cam.rotation = r;
  cam.translation = -r * (state.pose.position + state.wrist_offset);
  return cam;
}

Vec3 backproject_to_surface(const PinholeCamera& cam, const Pixel& px, const TissueSurface& surface) {
  const Vec3 ray_cam((px(0) - cam.principal(0)) / cam.focal, (px(1) - cam.principal(1)) / cam.focal,
                     1.0);
  const Vec3 dir = cam.rotation.transpose() * ray_cam.normalized();
  const Vec3 eye = cam.center();
  if (!(dir(2) < 0.0)) throw DomainError("backproject: ray does not descend toward the surface");
  // Fixed-point on the ray parameter: intersect with the plane z = g(x, y) at
  // the current estimate. Converges for gentle relief.
  double z = surface.height(0.5 * (surface.origin()(0) + surface.extent_max()(0)),
                            0.5 * (surface.origin()(1) + surface.extent_max()(1)));
  Vec3 p = eye;
  for (int it = 0; it < 100; ++it) {
    const double t = (z - eye(2)) / dir(2);
    p = eye + t * dir;
    const double z_new = surface.height(p(0), p(1));
    if (std::abs(z_new - z) < 1e-12) break;
    z = z_new;
  }
  p(2) = surface.height(p(0), p(1));
  return p;
}

SceneState with_tip_at(const SceneState& state, double x, double y, double h) {
  SceneState s = state;
  s.pose.position = Vec3(x, y, state.surface->height(x, y) + h);
  return s;
}

}  // namespace drs
