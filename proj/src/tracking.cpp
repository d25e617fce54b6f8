#include "vdio/tracking.hpp"

#include <algorithm>
#include <cmath>

#include "vdio/errors.hpp"

namespace vdio {

std::optional<PixelPrediction> predict_landmark_pixel(const Ekf& ekf, int landmark,
                                                      const PinholeCamera& cam) {
  if (landmark < 0 || landmark >= ekf.state().num_landmarks()) {
    throw DataError("predict_landmark_pixel: landmark index out of range");
  }
  Eigen::Matrix2d jac;
  const auto px = bearing_to_pixel(ekf.state().landmarks[landmark].bearing, cam, &jac);
  if (!px) return std::nullopt;
  const int s = 15 + 3 * landmark;
  PixelPrediction pred;
  pred.pixel = *px;
  pred.cov = jac * ekf.covariance().block<2, 2>(s, s) * jac.transpose();
  return pred;
}

SearchWindow make_search_window(const PixelPrediction& pred,
                                const TrackingParams& params) {
  // eigen-decompose the 2x2 covariance in closed form
  const double a = pred.cov(0, 0), b = 0.5 * (pred.cov(0, 1) + pred.cov(1, 0)),
               c = pred.cov(1, 1);
  const double tr = a + c;
  const double disc = std::sqrt(std::max(0.25 * (a - c) * (a - c) + b * b, 0.0));
  const double l1 = std::max(0.5 * tr + disc, 0.0);
  const double l2 = std::max(0.5 * tr - disc, 0.0);

  // principal axis direction
  double cs = 1.0, sn = 0.0;
  if (std::abs(b) > 1e-12 || a < c) {
    const double theta = 0.5 * std::atan2(2.0 * b, a - c);
    cs = std::cos(theta);
    sn = std::sin(theta);
  }
  const auto clamp_axis = [&](double sigma3) {
    return std::min(std::max(sigma3, params.w_min), params.w_max);
  };
  const double h1 = clamp_axis(3.0 * std::sqrt(l1));
  const double h2 = clamp_axis(3.0 * std::sqrt(l2));

  SearchWindow w;
  w.center = pred.pixel;
  // axis-aligned bound of the clamped ellipse
  w.half_extent.x() = std::sqrt(h1 * h1 * cs * cs + h2 * h2 * sn * sn);
  w.half_extent.y() = std::sqrt(h1 * h1 * sn * sn + h2 * h2 * cs * cs);
  return w;
}

std::optional<MatchResult> match_landmark(
    const TrackedLandmark& landmark, const SearchWindow& window,
    const std::vector<Keypoint>& keypoints,
    const std::vector<std::optional<MultimodalDescriptor>>& descriptors,
    const TrackingParams& params) {
  if (keypoints.size() != descriptors.size()) {
    throw DataError("match_landmark: keypoint/descriptor list size mismatch");
  }
  int best = -1, best_d = std::numeric_limits<int>::max();
  int second_d = std::numeric_limits<int>::max();
  for (size_t i = 0; i < keypoints.size(); ++i) {
    if (!descriptors[i]) continue;
    if (!window.contains(keypoints[i].pixel)) continue;
    const int d = hamming_distance(landmark.descriptor, *descriptors[i]);
    if (d < best_d) {
      second_d = best_d;
      best_d = d;
      best = int(i);
    } else if (d < second_d) {
      second_d = d;
    }
  }
  if (best < 0) return std::nullopt;  // empty window
  if (best_d > params.h_max) return std::nullopt;
  const bool sole_candidate = second_d == std::numeric_limits<int>::max();
  if (params.margin_enabled && !sole_candidate && second_d - best_d < params.margin) {
    return std::nullopt;  // ambiguous
  }
  return MatchResult{best, keypoints[best].pixel, best_d};
}

LandmarkDirectives manage_landmarks(
    const std::vector<TrackedLandmark>& landmarks,
    const std::vector<std::optional<Eigen::Vector2d>>& landmark_pixels,
    const std::vector<bool>& matched_this_frame,
    const std::vector<Keypoint>& keypoints,
    const std::vector<std::optional<MultimodalDescriptor>>& descriptors,
    const std::vector<bool>& keypoint_used, const TrackingParams& params,
    double min_distance) {
  if (landmarks.size() != landmark_pixels.size() ||
      landmarks.size() != matched_this_frame.size()) {
    throw DataError("manage_landmarks: landmark list size mismatch");
  }
  if (keypoints.size() != descriptors.size() ||
      keypoints.size() != keypoint_used.size()) {
    throw DataError("manage_landmarks: keypoint list size mismatch");
  }

  LandmarkDirectives out;
  std::vector<Eigen::Vector2d> kept_pixels;
  for (size_t j = 0; j < landmarks.size(); ++j) {
    // miss_count already includes this frame's outcome; out-of-view
    // landmarks have no pixel and are dropped right away
    const bool lost = !landmark_pixels[j].has_value();
    const bool stale = !matched_this_frame[j] && landmarks[j].miss_count >= params.miss_max;
    if (lost || stale) {
      out.drop.push_back(int(j));
    } else {
      kept_pixels.push_back(*landmark_pixels[j]);
    }
  }

  const int budget = params.j_max - int(landmarks.size() - out.drop.size());
  if (budget <= 0) return out;

  // strongest first, deterministic tie-break on pixel position
  std::vector<int> order;
  for (size_t i = 0; i < keypoints.size(); ++i) {
    if (!keypoint_used[i] && descriptors[i]) order.push_back(int(i));
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (keypoints[a].score != keypoints[b].score)
      return keypoints[a].score > keypoints[b].score;
    if (keypoints[a].pixel.y() != keypoints[b].pixel.y())
      return keypoints[a].pixel.y() < keypoints[b].pixel.y();
    return keypoints[a].pixel.x() < keypoints[b].pixel.x();
  });

  const double min_d2 = min_distance * min_distance;
  for (const int i : order) {
    if (int(out.add_keypoints.size()) >= budget) break;
    bool ok = true;
    for (const auto& p : kept_pixels) {
      if ((keypoints[i].pixel - p).squaredNorm() < min_d2) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    out.add_keypoints.push_back(i);
    kept_pixels.push_back(keypoints[i].pixel);
  }
  return out;
}

}  // namespace vdio
