#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vdio/camera.hpp"
#include "vdio/config.hpp"
#include "vdio/descriptor.hpp"
#include "vdio/ekf.hpp"
#include "vdio/feature_detection.hpp"

namespace vdio {

// Bookkeeping the filter does not carry: descriptors, ids, miss counts.
// Index-aligned with the EKF landmark slots at all times.
struct TrackedLandmark {
  int64_t id = -1;
  MultimodalDescriptor descriptor;  // from the first observation, never replaced
  KeypointModality modality = KeypointModality::kVisual;
  int miss_count = 0;
  int64_t frames_tracked = 0;
};

struct PixelPrediction {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();  // J Sigma_mu J^T
};

// Axis-aligned bound of the 3-sigma uncertainty ellipse, with both ellipse
// half-axes clamped into [w_min, w_max] before taking the bound.
struct SearchWindow {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d half_extent = Eigen::Vector2d::Zero();

  bool contains(const Eigen::Vector2d& px) const {
    return std::abs(px.x() - center.x()) <= half_extent.x() &&
           std::abs(px.y() - center.y()) <= half_extent.y();
  }
  double area() const { return 4.0 * half_extent.x() * half_extent.y(); }
};

// Projects landmark j through the current filter state. nullopt when the
// bearing points outside the image (the caller counts that as a miss).
std::optional<PixelPrediction> predict_landmark_pixel(const Ekf& ekf, int landmark,
                                                      const PinholeCamera& cam);

SearchWindow make_search_window(const PixelPrediction& pred,
                                const TrackingParams& params);

struct MatchResult {
  int keypoint = -1;       // index into the frame's keypoint list
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  int distance = 0;        // Hamming
};

// Best-Hamming match inside the window. Accepts only if the best distance is
// within h_max and either beats the runner-up by the margin or is the sole
// candidate. Keypoints without descriptors (too close to the border) never
// match.
std::optional<MatchResult> match_landmark(
    const TrackedLandmark& landmark, const SearchWindow& window,
    const std::vector<Keypoint>& keypoints,
    const std::vector<std::optional<MultimodalDescriptor>>& descriptors,
    const TrackingParams& params);

// What the lifecycle pass decided: landmarks to drop (EKF indices, ascending)
// and keypoints to promote into the freed/unused slots.
struct LandmarkDirectives {
  std::vector<int> drop;
  std::vector<int> add_keypoints;
};

// Drops landmarks that missed miss_max times in a row or left the view, then
// fills the budget with the strongest unmatched keypoints that have
// descriptors and keep min_distance pixels away from every kept landmark
// and from each other.
LandmarkDirectives manage_landmarks(
    const std::vector<TrackedLandmark>& landmarks,
    const std::vector<std::optional<Eigen::Vector2d>>& landmark_pixels,
    const std::vector<bool>& matched_this_frame,
    const std::vector<Keypoint>& keypoints,
    const std::vector<std::optional<MultimodalDescriptor>>& descriptors,
    const std::vector<bool>& keypoint_used, const TrackingParams& params,
    double min_distance);

}  // namespace vdio
