#pragma once

#include <utility>
#include <vector>

#include "vdio/dataset.hpp"
#include "vdio/geometry.hpp"

namespace vdio {

// Pairs each estimate sample with the nearest reference sample no further
// than max_dt seconds away. Both inputs must be sorted by time. Unmatched
// samples are skipped.
std::vector<std::pair<int, int>> associate_trajectories(
    const std::vector<TrajectorySample>& estimate,
    const std::vector<TrajectorySample>& reference, double max_dt = 0.005);

struct AteResult {
  double rmse = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double final_error = 0.0;  // residual of the last associated pair
  int pairs = 0;
  RigidTransform alignment;  // maps estimate positions into the reference frame
};

// Absolute trajectory error: positions are aligned with the best rigid
// transform (no scale) before computing residuals. Throws DataError when
// fewer than 3 pairs overlap.
AteResult evaluate_ate(const std::vector<TrajectorySample>& estimate,
                       const std::vector<TrajectorySample>& reference,
                       double max_dt = 0.005);

struct RpeResult {
  double trans_rmse = 0.0;
  double rot_rmse = 0.0;  // rad
  double delta = 0.0;     // s
  int pairs = 0;
};

// Relative pose error over a fixed time offset delta; alignment-free.
RpeResult evaluate_rpe(const std::vector<TrajectorySample>& estimate,
                       const std::vector<TrajectorySample>& reference, double delta,
                       double max_dt = 0.005, double delta_tol = 0.02);

}  // namespace vdio
