#pragma once

#include <filesystem>

#include "vdio/camera.hpp"
#include "vdio/config.hpp"
#include "vdio/geometry.hpp"

namespace vdio {

// Rig extrinsics. t_cam_imu maps IMU-frame points into the color camera
// frame; t_depth_color maps color-frame points into the depth camera frame.
struct ExtrinsicCalib {
  RigidTransform t_cam_imu;
  RigidTransform t_depth_color;
};

struct Calibration {
  PinholeCamera color;
  PinholeCamera depth;
  ExtrinsicCalib extrinsics;
  double d_min = 0.75;  // m; sensor trust range
  double d_max = 6.0;
  double i_dn = 0.0;    // dark-noise intensity offset, gray levels

  void validate() const;  // throws ConfigError on nonsense
};

Calibration calibration_from_kv(KeyValueFile& kv);
Calibration load_calibration(const std::filesystem::path& path);
void save_calibration(const Calibration& c, const std::filesystem::path& path);

}  // namespace vdio
