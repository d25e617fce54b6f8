#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace vdio {

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

// SO(3) exponential map as a unit quaternion; exact for any rotation vector.
Eigen::Quaterniond quat_exp(const Eigen::Vector3d& phi);

// Inverse of quat_exp; returns the rotation vector with angle in [0, pi].
Eigen::Vector3d quat_log(const Eigen::Quaterniond& q);

// Right Jacobian of SO(3): relates additive tangent perturbations to the
// group composition, Exp(phi + d) ~= Exp(phi) Exp(Jr(phi) d).
Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& phi);

// Rigid transform T_A_B: maps B-frame points into A, p_A = q * p_B + t.
struct RigidTransform {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  RigidTransform() = default;
  RigidTransform(const Eigen::Quaterniond& q_in, const Eigen::Vector3d& t_in)
      : q(q_in.normalized()), t(t_in) {}

  static RigidTransform Identity() { return {}; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return q * p + t; }

  RigidTransform operator*(const RigidTransform& o) const {
    return RigidTransform(q * o.q, q * o.t + t);
  }

  RigidTransform inverse() const {
    const Eigen::Quaterniond qi = q.conjugate();
    return RigidTransform(qi, -(qi * t));
  }
};

}  // namespace vdio
