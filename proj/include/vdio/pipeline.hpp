#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vdio/calib.hpp"
#include "vdio/config.hpp"
#include "vdio/dataset.hpp"
#include "vdio/descriptor.hpp"
#include "vdio/ekf.hpp"
#include "vdio/tracking.hpp"

namespace vdio {

// Attitude and gyro-bias bootstrap from a static IMU buffer: roll/pitch from
// the mean specific force (yaw stays free), gyro bias from the mean rates.
FilterState initial_state_from_imu(const std::vector<ImuSample>& buffer);

struct FrameRecord {
  int frame_index = 0;
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();     // IMU position, world frame
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();     // robocentric velocity
  Eigen::Vector3d b_f = Eigen::Vector3d::Zero();
  Eigen::Vector3d b_w = Eigen::Vector3d::Zero();
  int num_landmarks = 0;
  int attempted = 0;  // in-view landmarks offered to the matcher
  int matched = 0;
  int gated = 0;
  int added = 0;
  int dropped = 0;
  Eigen::Matrix<double, 6, 6> pose_cov =
      Eigen::Matrix<double, 6, 6>::Zero();  // [delta r, delta theta] block
  Eigen::VectorXd cov_diag;                 // full error-state diagonal
};

struct TrackRecord {
  int frame_index = 0;
  int64_t landmark_id = -1;
  int slot = -1;
  Eigen::Vector2d predicted = Eigen::Vector2d::Zero();
  Eigen::Vector2d half_extent = Eigen::Vector2d::Zero();
  bool in_view = false;
  bool matched = false;
  Eigen::Vector2d measured = Eigen::Vector2d::Zero();
  int hamming = 0;
};

// Ties the modules into a causal filter loop: IMU samples propagate, frames
// detect / describe / match / update, then the landmark set is refreshed.
class OdometryPipeline {
 public:
  OdometryPipeline(const PipelineConfig& config, const Calibration& calib);

  // Buffers samples until init_static_time is covered, then initializes the
  // filter; afterwards each call propagates one interval.
  void process_imu(const ImuSample& sample);

  // Runs the full frame path. Returns false (and does nothing) while the
  // filter is still waiting for initialization.
  bool process_frame(const RegisteredFrame& frame, int frame_index,
                     FrameRecord* record = nullptr,
                     std::vector<TrackRecord>* tracks = nullptr);

  bool initialized() const { return ekf_.initialized(); }
  const Ekf& ekf() const { return ekf_; }
  const std::vector<TrackedLandmark>& landmarks() const { return landmarks_; }
  int64_t landmarks_created() const { return next_id_; }
  const Calibration& calib() const { return calib_; }

 private:
  PipelineConfig config_;
  Calibration calib_;
  Ekf ekf_;
  SamplingPattern pattern_;
  DescriptorExtractor extractor_;
  RayTable rays_;
  std::vector<TrackedLandmark> landmarks_;
  std::vector<ImuSample> init_buffer_;
  int64_t next_id_ = 0;
  double last_imu_t_ = 0.0;
};

struct RunOptions {
  std::filesystem::path output_dir;  // empty: keep everything in memory
  bool keep_records = true;
  bool write_tracks = true;
};

struct RunReport {
  std::vector<FrameRecord> records;  // when keep_records
  int frames_total = 0;
  int frames_processed = 0;
  int imu_samples = 0;
  int64_t landmarks_created = 0;
  int64_t match_attempts = 0;
  int64_t matches_accepted = 0;
  double duration = 0.0;        // dataset time span, s
  double compute_seconds = 0.0; // pipeline compute, disk IO excluded
  double throughput_hz = 0.0;   // frames_processed / compute_seconds
  std::string config_echo;
};

// Full dataset playback. Writes trajectory.csv, trajectory.bin, tracks.csv
// and report.txt into output_dir when set.
RunReport run_odometry(const DatasetReader& dataset, const PipelineConfig& config,
                       const RunOptions& options);

}  // namespace vdio
