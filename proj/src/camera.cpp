#include "vdio/camera.hpp"

#include <cmath>

#include "vdio/errors.hpp"

namespace vdio {

Eigen::Vector2d PinholeCamera::distort(const Eigen::Vector2d& n) const {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + dist[0] * r2 + dist[1] * r2 * r2;
  const double xd = x * radial + 2.0 * dist[2] * x * y + dist[3] * (r2 + 2.0 * x * x);
  const double yd = y * radial + dist[2] * (r2 + 2.0 * y * y) + 2.0 * dist[3] * x * y;
  return {xd, yd};
}

Eigen::Matrix2d PinholeCamera::distort_jacobian(const Eigen::Vector2d& n) const {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + dist[0] * r2 + dist[1] * r2 * r2;
  const double dradial = dist[0] + 2.0 * dist[1] * r2;  // d radial / d r2
  Eigen::Matrix2d j;
  j(0, 0) = radial + x * dradial * 2.0 * x + 2.0 * dist[2] * y + 6.0 * dist[3] * x;
  j(0, 1) = x * dradial * 2.0 * y + 2.0 * dist[2] * x + 2.0 * dist[3] * y;
  j(1, 0) = y * dradial * 2.0 * x + 2.0 * dist[2] * x + 2.0 * dist[3] * y;
  j(1, 1) = radial + y * dradial * 2.0 * y + 6.0 * dist[2] * y + 2.0 * dist[3] * x;
  return j;
}

Eigen::Vector2d PinholeCamera::undistort(const Eigen::Vector2d& nd) const {
  if (!has_distortion()) return nd;
  Eigen::Vector2d n = nd;
  for (int it = 0; it < 20; ++it) {
    const Eigen::Vector2d err = distort(n) - nd;
    if (err.squaredNorm() < 1e-24) break;
    n -= distort_jacobian(n).partialPivLu().solve(err);
  }
  return n;
}

BearingVector pixel_to_bearing(const Eigen::Vector2d& px, const PinholeCamera& cam) {
  if (!cam.valid()) throw ConfigError("pixel_to_bearing: invalid camera intrinsics");
  if (!cam.in_bounds(px)) {
    throw DataError("pixel_to_bearing: pixel (" + std::to_string(px.x()) + ", " +
                    std::to_string(px.y()) + ") outside image bounds");
  }
  const Eigen::Vector2d n = cam.normalized_from_pixel(px);
  BearingVector b;
  b.azimuth = std::atan2(n.x(), 1.0);
  b.elevation = std::atan2(n.y(), std::sqrt(n.x() * n.x() + 1.0));
  return b;
}

std::optional<Eigen::Vector2d> bearing_to_pixel(const BearingVector& b,
                                                const PinholeCamera& cam,
                                                Eigen::Matrix2d* jacobian) {
  if (!cam.valid()) throw ConfigError("bearing_to_pixel: invalid camera intrinsics");
  const Eigen::Vector3d m = b.unit();
  if (m.z() < 1e-6) return std::nullopt;  // behind or grazing the image plane
  const Eigen::Vector2d n(m.x() / m.z(), m.y() / m.z());
  const Eigen::Vector2d px = cam.project_normalized(n);
  if (!cam.in_bounds(px)) return std::nullopt;
  if (jacobian) {
    // chain: pixel <- distorted <- normalized <- unit bearing <- (az, el)
    Eigen::Matrix<double, 2, 3> dn_dm;
    dn_dm << 1.0 / m.z(), 0.0, -n.x() / m.z(), 0.0, 1.0 / m.z(), -n.y() / m.z();
    const Eigen::Matrix2d dd_dn = cam.distort_jacobian(n);
    const Eigen::Matrix<double, 3, 2> dm_db = b.unit_jacobian();
    *jacobian = Eigen::DiagonalMatrix<double, 2>(cam.fx, cam.fy) * dd_dn * dn_dm * dm_db;
  }
  return px;
}

RayTable RayTable::build(const PinholeCamera& cam) {
  if (!cam.valid()) throw ConfigError("RayTable: invalid camera intrinsics");
  RayTable t;
  t.width = cam.width;
  t.height = cam.height;
  t.n.resize(size_t(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector2d n =
          cam.normalized_from_pixel(Eigen::Vector2d(double(x), double(y)));
      t.n[size_t(y) * cam.width + x] = n.cast<float>();
    }
  }
  return t;
}

}  // namespace vdio
