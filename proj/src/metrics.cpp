#include "vdio/metrics.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "vdio/errors.hpp"

namespace vdio {

std::vector<std::pair<int, int>> associate_trajectories(
    const std::vector<TrajectorySample>& estimate,
    const std::vector<TrajectorySample>& reference, double max_dt) {
  std::vector<std::pair<int, int>> pairs;
  size_t j = 0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    const double t = estimate[i].t;
    while (j + 1 < reference.size() &&
           std::abs(reference[j + 1].t - t) <= std::abs(reference[j].t - t)) {
      ++j;
    }
    if (!reference.empty() && std::abs(reference[j].t - t) <= max_dt) {
      pairs.emplace_back(int(i), int(j));
    }
  }
  return pairs;
}

AteResult evaluate_ate(const std::vector<TrajectorySample>& estimate,
                       const std::vector<TrajectorySample>& reference,
                       double max_dt) {
  const auto pairs = associate_trajectories(estimate, reference, max_dt);
  if (pairs.size() < 3) {
    throw DataError("trajectories share fewer than 3 associated samples");
  }
  const int n = int(pairs.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (int k = 0; k < n; ++k) {
    src.col(k) = estimate[size_t(pairs[size_t(k)].first)].p;
    dst.col(k) = reference[size_t(pairs[size_t(k)].second)].p;
  }
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, false);
  const Eigen::Matrix3d R = T.topLeftCorner<3, 3>();
  const Eigen::Vector3d t = T.topRightCorner<3, 1>();

  AteResult res;
  res.pairs = n;
  res.alignment.q = Eigen::Quaterniond(R).normalized();
  res.alignment.t = t;
  double sum_sq = 0.0, sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double e = (dst.col(k) - (R * src.col(k) + t)).norm();
    sum_sq += e * e;
    sum += e;
    res.max = std::max(res.max, e);
    if (k == n - 1) res.final_error = e;
  }
  res.rmse = std::sqrt(sum_sq / n);
  res.mean = sum / n;
  return res;
}

RpeResult evaluate_rpe(const std::vector<TrajectorySample>& estimate,
                       const std::vector<TrajectorySample>& reference, double delta,
                       double max_dt, double delta_tol) {
  if (delta <= 0.0) throw ConfigError("RPE delta must be positive");
  const auto pairs = associate_trajectories(estimate, reference, max_dt);
  if (pairs.empty()) {
    throw DataError("trajectories share no associated samples");
  }
  auto pose = [](const TrajectorySample& s) { return RigidTransform{s.q, s.p}; };

  RpeResult res;
  res.delta = delta;
  double sum_t = 0.0, sum_r = 0.0;
  int count = 0;
  for (size_t a = 0; a < pairs.size(); ++a) {
    const double target = estimate[size_t(pairs[a].first)].t + delta;
    // find the associated pair closest to t + delta
    size_t best = pairs.size();
    double best_err = delta_tol;
    for (size_t b = a + 1; b < pairs.size(); ++b) {
      const double err = std::abs(estimate[size_t(pairs[b].first)].t - target);
      if (err <= best_err) {
        best_err = err;
        best = b;
      }
      if (estimate[size_t(pairs[b].first)].t > target + delta_tol) break;
    }
    if (best == pairs.size()) continue;
    const RigidTransform de = pose(estimate[size_t(pairs[a].first)]).inverse() *
                              pose(estimate[size_t(pairs[best].first)]);
    const RigidTransform dr = pose(reference[size_t(pairs[a].second)]).inverse() *
                              pose(reference[size_t(pairs[best].second)]);
    const RigidTransform err = dr.inverse() * de;
    sum_t += err.t.squaredNorm();
    sum_r += quat_log(err.q).squaredNorm();
    ++count;
  }
  if (count == 0) {
    throw DataError("no sample pairs separated by the requested delta");
  }
  res.trans_rmse = std::sqrt(sum_t / count);
  res.rot_rmse = std::sqrt(sum_r / count);
  res.pairs = count;
  return res;
}

}  // namespace vdio
