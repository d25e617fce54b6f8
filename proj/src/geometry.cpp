#include "vdio/geometry.hpp"

#include <cmath>

namespace vdio {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Eigen::Quaterniond quat_exp(const Eigen::Vector3d& phi) {
  const double angle = phi.norm();
  double c, s_over_angle;
  if (angle < 1e-10) {
    // sin(a/2)/a = 1/2 - a^2/48 + ...
    c = 1.0 - angle * angle / 8.0;
    s_over_angle = 0.5 - angle * angle / 48.0;
  } else {
    c = std::cos(0.5 * angle);
    s_over_angle = std::sin(0.5 * angle) / angle;
  }
  Eigen::Quaterniond q(c, s_over_angle * phi.x(), s_over_angle * phi.y(),
                       s_over_angle * phi.z());
  q.normalize();
  return q;
}

Eigen::Vector3d quat_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0) q.coeffs() *= -1.0;  // angle in [0, pi]
  const Eigen::Vector3d v = q.vec();
  const double n = v.norm();
  if (n < 1e-12) return 2.0 * v;  // q ~ identity
  const double angle = 2.0 * std::atan2(n, q.w());
  return (angle / n) * v;
}

Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& phi) {
  const double a = phi.norm();
  const Eigen::Matrix3d S = skew(phi);
  if (a < 1e-7) {
    return Eigen::Matrix3d::Identity() - 0.5 * S + (1.0 / 6.0) * S * S;
  }
  const double a2 = a * a;
  return Eigen::Matrix3d::Identity() - ((1.0 - std::cos(a)) / a2) * S +
         ((a - std::sin(a)) / (a2 * a)) * S * S;
}

}  // namespace vdio
