#include "vdio/frame.hpp"

#include <cmath>

#include "vdio/errors.hpp"

namespace vdio {

DepthImage register_depth_to_color(const DepthImage& depth_raw,
                                   const ExtrinsicCalib& extrinsics,
                                   const PinholeCamera& depth_cam,
                                   const PinholeCamera& color_cam, double d_min,
                                   double d_max, const RayTable* depth_rays) {
  if (!depth_cam.valid() || !color_cam.valid())
    throw ConfigError("register_depth_to_color: invalid camera intrinsics");
  if (depth_raw.width != depth_cam.width || depth_raw.height != depth_cam.height) {
    throw ConfigError("register_depth_to_color: depth image is " +
                      std::to_string(depth_raw.width) + "x" +
                      std::to_string(depth_raw.height) +
                      " but calibration expects " + std::to_string(depth_cam.width) +
                      "x" + std::to_string(depth_cam.height));
  }

  RayTable local;
  if (!depth_rays) {
    local = RayTable::build(depth_cam);
    depth_rays = &local;
  }

  // color-frame points from depth-frame points
  const RigidTransform t_color_depth = extrinsics.t_depth_color.inverse();
  const Eigen::Matrix3d r = t_color_depth.q.toRotationMatrix();
  const Eigen::Vector3d t = t_color_depth.t;

  DepthImage out(color_cam.width, color_cam.height, 0.0f);
  for (int y = 0; y < depth_raw.height; ++y) {
    for (int x = 0; x < depth_raw.width; ++x) {
      const float d = depth_raw.at(x, y);
      if (!(d > 0.0f)) continue;
      const Eigen::Vector2f n = depth_rays->at(x, y);
      const Eigen::Vector3d p_depth(double(n.x()) * d, double(n.y()) * d, double(d));
      const Eigen::Vector3d p_color = r * p_depth + t;
      if (p_color.z() < d_min || p_color.z() > d_max) continue;
      const Eigen::Vector2d px = color_cam.project_normalized(
          {p_color.x() / p_color.z(), p_color.y() / p_color.z()});
      const int u = int(std::lround(px.x()));
      const int v = int(std::lround(px.y()));
      if (!out.in_bounds(u, v)) continue;
      float& slot = out.at(u, v);
      const float z = float(p_color.z());
      if (slot == 0.0f || z < slot) slot = z;  // nearest surface wins
    }
  }
  return out;
}

}  // namespace vdio
