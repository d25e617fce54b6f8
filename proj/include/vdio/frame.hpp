#pragma once

#include "vdio/calib.hpp"
#include "vdio/camera.hpp"
#include "vdio/image.hpp"

namespace vdio {

// One synchronized frame pair: gray image plus depth re-registered into the
// color camera grid (meters; 0 = no valid depth at that pixel).
struct RegisteredFrame {
  double timestamp = 0.0;
  GrayImage gray;
  DepthImage depth;
  PinholeCamera camera;  // color intrinsics, shared by both images
};

// Re-projects a raw depth image from the depth camera into the color camera
// frame. Nearest-pixel splatting with a z-buffer (closest surface wins);
// pixels with no projected sample stay 0. Output values always lie in
// [d_min, d_max] or are exactly 0.
DepthImage register_depth_to_color(const DepthImage& depth_raw,
                                   const ExtrinsicCalib& extrinsics,
                                   const PinholeCamera& depth_cam,
                                   const PinholeCamera& color_cam, double d_min,
                                   double d_max, const RayTable* depth_rays = nullptr);

}  // namespace vdio
