#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vdio/geometry.hpp"

namespace vdio {

// Pinhole camera with radial-tangential distortion (k1, k2, p1, p2).
// Pixel coordinates address pixel centers: (0,0) is the center of the
// top-left pixel, valid range [0, width-1] x [0, height-1].
struct PinholeCamera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  std::array<double, 4> dist{0, 0, 0, 0};

  bool valid() const { return fx > 0 && fy > 0 && width > 0 && height > 0; }

  bool has_distortion() const {
    return dist[0] != 0 || dist[1] != 0 || dist[2] != 0 || dist[3] != 0;
  }

  bool in_bounds(const Eigen::Vector2d& px, double margin = 0.0) const {
    return px.x() >= margin && px.x() <= width - 1 - margin && px.y() >= margin &&
           px.y() <= height - 1 - margin;
  }

  // normalized image coords -> distorted normalized coords
  Eigen::Vector2d distort(const Eigen::Vector2d& n) const;
  Eigen::Matrix2d distort_jacobian(const Eigen::Vector2d& n) const;
  // inverse of distort (Newton iteration; exact fixed point for dist = 0)
  Eigen::Vector2d undistort(const Eigen::Vector2d& nd) const;

  Eigen::Vector2d project_normalized(const Eigen::Vector2d& n) const {
    const Eigen::Vector2d d = distort(n);
    return {fx * d.x() + cx, fy * d.y() + cy};
  }

  Eigen::Vector2d normalized_from_pixel(const Eigen::Vector2d& px) const {
    return undistort({(px.x() - cx) / fx, (px.y() - cy) / fy});
  }
};

// Direction in the camera frame (z optical axis, x right, y down):
//   m(az, el) = (sin az * cos el, sin el, cos az * cos el)
// Azimuth rotates rightward in the image, elevation downward.
struct BearingVector {
  double azimuth = 0.0;
  double elevation = 0.0;

  Eigen::Vector3d unit() const {
    const double ca = std::cos(azimuth), sa = std::sin(azimuth);
    const double ce = std::cos(elevation), se = std::sin(elevation);
    return {sa * ce, se, ca * ce};
  }

  static BearingVector from_unit(const Eigen::Vector3d& m) {
    BearingVector b;
    b.azimuth = std::atan2(m.x(), m.z());
    b.elevation = std::atan2(m.y(), std::sqrt(m.x() * m.x() + m.z() * m.z()));
    return b;
  }

  // d unit() / d (azimuth, elevation); columns orthogonal, norms (cos el, 1)
  Eigen::Matrix<double, 3, 2> unit_jacobian() const {
    const double ca = std::cos(azimuth), sa = std::sin(azimuth);
    const double ce = std::cos(elevation), se = std::sin(elevation);
    Eigen::Matrix<double, 3, 2> j;
    j << ca * ce, -sa * se, 0.0, ce, -sa * ce, -ca * se;
    return j;
  }
};

// Pixel must lie inside the image; undistorts and lifts to a bearing.
BearingVector pixel_to_bearing(const Eigen::Vector2d& px, const PinholeCamera& cam);

// Projects a bearing into the image. Returns nullopt when the bearing points
// away from the camera or lands outside the image bounds -- callers treat
// that as "feature left the view", not as an error. When jacobian is given
// it receives d pixel / d (azimuth, elevation) at the bearing.
std::optional<Eigen::Vector2d> bearing_to_pixel(const BearingVector& b,
                                                const PinholeCamera& cam,
                                                Eigen::Matrix2d* jacobian = nullptr);

// Per-pixel undistorted normalized coordinates, precomputed once per camera.
// The 3D point of pixel (u,v) at depth d is (ray(u,v).x * d, ray(u,v).y * d, d).
struct RayTable {
  int width = 0, height = 0;
  std::vector<Eigen::Vector2f> n;

  const Eigen::Vector2f& at(int x, int y) const { return n[size_t(y) * width + x]; }

  static RayTable build(const PinholeCamera& cam);
};

}  // namespace vdio
