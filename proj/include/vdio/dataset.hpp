#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vdio/calib.hpp"
#include "vdio/ekf.hpp"
#include "vdio/frame.hpp"
#include "vdio/image.hpp"

namespace vdio {

// ---------------------------------------------------------------- image IO

// 8-bit binary PGM (P5).
void write_pgm(const GrayImage& img, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

// 16-bit grayscale PNG holding depth in millimeters; 0 = invalid.
void write_depth_png(const DepthImage& depth, const std::filesystem::path& path);
DepthImage read_depth_png(const std::filesystem::path& path);

// ------------------------------------------------------------------- CSV IO

struct TrajectorySample {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
};

void write_imu_csv(const std::vector<ImuSample>& samples,
                   const std::filesystem::path& path);
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path);

void write_trajectory_csv(const std::vector<TrajectorySample>& samples,
                          const std::filesystem::path& path);
// Header-driven: any CSV with t,px,py,pz,qw,qx,qy,qz columns qualifies
// (vx,vy,vz are optional); extra columns are ignored. This reads both ground
// truth files and estimated trajectories.
std::vector<TrajectorySample> read_trajectory_csv(const std::filesystem::path& path);

// ------------------------------------------------------------------ dataset
//
// On-disk layout (paths in manifest.txt are relative to the dataset root):
//   manifest.txt      "vdio-dataset 1" header, keys, then one line per frame:
//                     "frame NNNNNN <t> gray/NNNNNN.pgm depth/NNNNNN.png"
//   calib.cfg         intrinsics, extrinsics, sensor ranges
//   imu.csv           t,fx,fy,fz,wx,wy,wz
//   groundtruth.csv   optional; t,px,py,pz,qw,qx,qy,qz,vx,vy,vz
//   gray/*.pgm, depth/*.png
//
// depth_registered=1 marks depth images already resampled onto the color
// grid; otherwise frames are registered on read.

class DatasetWriter {
 public:
  // Creates the directory tree and writes calib.cfg immediately.
  DatasetWriter(const std::filesystem::path& dir, const Calibration& calib,
                bool depth_registered = true);

  // Streams one frame to disk; frames must arrive in time order.
  void add_frame(const RegisteredFrame& frame);
  void set_imu(const std::vector<ImuSample>& samples);
  void set_groundtruth(const std::vector<TrajectorySample>& samples);
  void finish();  // writes manifest.txt; no further calls allowed

 private:
  std::filesystem::path dir_;
  bool depth_registered_;
  bool has_groundtruth_ = false;
  bool finished_ = false;
  std::vector<std::string> frame_lines_;
  double last_t_ = -std::numeric_limits<double>::infinity();
};

class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& dir);

  const Calibration& calib() const { return calib_; }
  int frame_count() const { return int(frames_.size()); }
  double frame_timestamp(int i) const;
  bool depth_registered() const { return depth_registered_; }

  // Loads one frame from disk; registers depth onto the color grid when the
  // dataset stores raw depth-camera images.
  RegisteredFrame read_frame(int i) const;

  const std::vector<ImuSample>& imu() const { return imu_; }
  bool has_groundtruth() const { return !groundtruth_.empty(); }
  const std::vector<TrajectorySample>& groundtruth() const { return groundtruth_; }

  // Chronological sensor stream; IMU samples sort before a frame with the
  // same timestamp so propagation reaches the frame before its update.
  struct Event {
    enum class Kind { kImu, kFrame } kind = Kind::kImu;
    double t = 0.0;
    int index = 0;  // into imu() or frame numbers
  };
  std::vector<Event> events() const;

 private:
  struct FrameEntry {
    double t = 0.0;
    std::filesystem::path gray;
    std::filesystem::path depth;
  };

  std::filesystem::path dir_;
  Calibration calib_;
  bool depth_registered_ = true;
  std::vector<FrameEntry> frames_;
  std::vector<ImuSample> imu_;
  std::vector<TrajectorySample> groundtruth_;
  mutable std::optional<RayTable> depth_rays_;  // built on first registration
};

}  // namespace vdio
