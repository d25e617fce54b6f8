#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vdio/camera.hpp"
#include "vdio/config.hpp"
#include "vdio/feature_detection.hpp"
#include "vdio/geometry.hpp"

namespace vdio {

struct ImuSample {
  double timestamp = 0.0;
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // specific force, body frame
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   // body rates
};

struct LandmarkState {
  BearingVector bearing;  // direction in the camera frame
  double rho = 0.5;       // inverse depth along the bearing, 1/m
};

// Robocentric filter state. r and v live in the IMU body frame (world
// position is q * r); q maps body to world. Landmarks are camera-frame
// bearings plus inverse depth, so their dynamics never touch global pose.
//
// Error state (dimension 15 + 3J): [dr, dtheta, dv, db_f, db_w] then one
// (d_az, d_el, d_rho) triple per landmark. Quaternion error is
// right-multiplicative: q = q_hat * exp(dtheta); everything else additive.
struct FilterState {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d b_f = Eigen::Vector3d::Zero();
  Eigen::Vector3d b_w = Eigen::Vector3d::Zero();
  std::vector<LandmarkState> landmarks;

  int num_landmarks() const { return int(landmarks.size()); }
  int error_dim() const { return 15 + 3 * num_landmarks(); }

  void retract(const Eigen::VectorXd& delta);
  // delta such that a == b.retract(delta); a and b need equal landmark counts
  static Eigen::VectorXd boxminus(const FilterState& a, const FilterState& b);
};

struct PixelMeasurement {
  int landmark = -1;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double depth = 0.0;  // measured depth at the matched pixel; 0 = none
};

struct UpdateStats {
  int attempted = 0;
  int used = 0;
  int gated = 0;
  double innovation_rms = 0.0;
};

inline constexpr double kChi2Gate2Dof99 = 9.21034037197618;   // chi2(2, 0.99)
inline constexpr double kChi2Gate1Dof99 = 6.63489660102121;   // chi2(1, 0.99)
inline constexpr double kChi2Bound6Dof99 = 16.8118938297709;  // chi2(6, 0.99)

class Ekf {
 public:
  Ekf(const NoiseParams& noise, const FilterParams& params,
      const RigidTransform& t_cam_imu, double d_min, double d_max,
      int max_landmarks,
      const std::array<double, 3>& depth_error_coeffs = {0.0, 0.0, 0.0012});

  // resets to x0 (which must carry no landmarks) with the configured priors
  void initialize(const FilterState& x0);
  bool initialized() const { return initialized_; }

  // integrates one IMU interval; dt > dt_max is split into equal substeps
  void propagate(const ImuSample& imu, double dt);

  // gated stacked pixel update (Joseph form). Measurements that fail the
  // chi-square gate are dropped; if all fail the state is untouched.
  UpdateStats update(const std::vector<PixelMeasurement>& measurements,
                     const PinholeCamera& cam);

  // grows the state by one landmark from a detected keypoint; valid depth
  // seeds rho at 1/d with sigma from the depth error model, otherwise the
  // configured defaults apply. Returns the landmark index, or -1 if full.
  int initialize_landmark(const Keypoint& kp, const PinholeCamera& cam,
                          const std::array<double, 3>& depth_error_coeffs);

  void remove_landmark(int index);

  // world-frame pose of the IMU: (p_W, q_WB)
  std::pair<Eigen::Vector3d, Eigen::Quaterniond> world_pose() const;

  const FilterState& state() const { return state_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const RigidTransform& t_cam_imu() const { return t_cam_imu_; }
  const FilterParams& params() const { return params_; }
  const NoiseParams& noise() const { return noise_; }
  int max_landmarks() const { return max_landmarks_; }

  // Discrete propagation map and its exact error-state Jacobian, exposed for
  // verification against finite differences. Both are smooth (no clamping).
  static FilterState propagate_state(const FilterState& x, const ImuSample& imu,
                                     double dt, const RigidTransform& t_cam_imu,
                                     double gravity);
  static Eigen::MatrixXd propagation_jacobian(const FilterState& x,
                                              const ImuSample& imu, double dt,
                                              const RigidTransform& t_cam_imu,
                                              double gravity);

 private:
  NoiseParams noise_;
  FilterParams params_;
  RigidTransform t_cam_imu_;
  double d_min_, d_max_;
  int max_landmarks_;
  std::array<double, 3> depth_coeffs_;
  bool initialized_ = false;
  FilterState state_;
  Eigen::MatrixXd cov_;

  void clamp_inverse_depths();
  void check_health(const char* where) const;
  Eigen::MatrixXd process_noise(const Eigen::MatrixXd& f, double dt) const;
};

}  // namespace vdio
