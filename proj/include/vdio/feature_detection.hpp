#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vdio/config.hpp"
#include "vdio/frame.hpp"
#include "vdio/image.hpp"

namespace vdio {

enum class ScoreKind { kVisual, kDepth, kCombined };

struct ScoreMap {
  FloatImage map;
  ScoreKind kind = ScoreKind::kVisual;

  float at(int x, int y) const { return map.at(x, y); }
};

enum class KeypointModality { kVisual, kDepth, kMultimodal };

struct Keypoint {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double score = 0.0;
  KeypointModality modality = KeypointModality::kVisual;
  double depth = 0.0;  // m; 0 when the depth image had no valid value here

  bool has_depth() const { return depth > 0.0; }
};

// Expected depth measurement error (meters) at range d: a0 + a1*d + a2*d^2.
// d <= 0 is the invalid-depth signal and yields nullopt.
std::optional<double> depth_error(double d, const std::array<double, 3>& coeffs);

// Corner-quality map: normalized Harris responses (Sobel gradients on [0,1]
// intensities, 5x5 window means, k = 0.04), thresholded at params.lambda,
// non-max suppressed over 5x5, survivors min-max normalized to (0, 1].
// Non-keypoint pixels are exactly 0.
ScoreMap compute_visual_score_map(const GrayImage& gray, const DetectorParams& params);

// Depth-discontinuity map: 4-neighbor Laplacian minus the summed expected
// noise of the 8-neighborhood, floored at 0; defined only where the full 3x3
// stencil has valid depth. Survivors of a 3x3 non-max suppression are kept
// when the Sobel gradient direction folded into [0, 90) lies in [30, 60]
// degrees, then min-max normalized to (0, 1].
ScoreMap compute_depth_score_map(const DepthImage& depth, const DetectorParams& params);

// min(gamma * visual + (1 - gamma) * depth, s_sat), elementwise.
ScoreMap combine_score_maps(const ScoreMap& visual, const ScoreMap& depth,
                            const DetectorParams& params);

// Greedy best-first selection with a minimum pairwise pixel distance that
// starts at r_max and halves down to r_min until n_target keypoints fit.
// Each keypoint is tagged with the modality that scored it and the depth
// value under it.
std::vector<Keypoint> select_keypoints(const ScoreMap& combined,
                                       const ScoreMap& visual, const ScoreMap& depth,
                                       const RegisteredFrame& frame,
                                       const DetectorParams& params);

}  // namespace vdio
