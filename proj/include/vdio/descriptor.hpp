#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vdio/camera.hpp"
#include "vdio/config.hpp"
#include "vdio/feature_detection.hpp"
#include "vdio/frame.hpp"
#include "vdio/image.hpp"

namespace vdio {

inline constexpr int kDescriptorPairs = 256;
inline constexpr int kDescriptorWindowHalf = 24;  // 48x48 sampling window
inline constexpr int kDescriptorPatchRadius = 4;  // 9x9 intensity patches
inline constexpr int kPatternClamp = 20;  // keeps patches inside the window
inline constexpr int kNormalFitRadius = 2;  // 5x5 plane fits for normals

// 256 point pairs drawn from an isotropic Gaussian (sigma = window/5) and
// clamped so every 9x9 patch stays inside the 48x48 window. Generated from a
// fixed seed so every run and both match sides use the same pattern.
struct SamplingPattern {
  struct PointPair {
    Eigen::Vector2i a, b;
  };
  std::array<PointPair, kDescriptorPairs> pairs;

  static SamplingPattern generate(uint64_t seed);
};

// Dark-noise intensity offset I_DN, the mean gray level the sensor reports
// with the lens capped. Subtracted (with a floor at 0) before intensity
// comparisons so sensor noise in dark scenes does not flip bits.
struct DarkNoiseModel {
  double i_dn = 0.0;
};

// Mean gray level over a set of dark frames; empty input is a config error.
DarkNoiseModel calibrate_dark_noise(const std::vector<GrayImage>& dark_frames);

// One binary intensity comparison: 1 iff max(0, m1 - I_DN) < max(0, m2 - I_DN).
bool visual_bit(double patch_mean_1, double patch_mean_2, const DarkNoiseModel& dn);

struct MultimodalDescriptor {
  std::array<uint64_t, 4> words{0, 0, 0, 0};
  // which modality branches were evaluated for this keypoint (visual-only
  // keypoints never get depth bits and vice versa)
  bool has_visual = false;
  bool has_depth = false;

  void set_bit(int k) { words[k >> 6] |= uint64_t(1) << (k & 63); }
  bool bit(int k) const { return (words[k >> 6] >> (k & 63)) & 1; }
  int popcount() const;
};

int hamming_distance(const MultimodalDescriptor& a, const MultimodalDescriptor& b);

// Surface normal from a least-squares plane fit over the valid depth samples
// in a (2*radius+1)^2 neighborhood; oriented toward the camera. nullopt when
// fewer than 6 samples are valid or the fit is degenerate.
std::optional<Eigen::Vector3d> fit_patch_normal(const DepthImage& depth,
                                                const RayTable& rays, int cx, int cy,
                                                int radius = kNormalFitRadius);

// Per-frame descriptor extraction. The pattern and dark-noise model are
// fixed at construction; set_frame() precomputes the intensity integral
// image, after which extract() is pure and safe to call concurrently.
class DescriptorExtractor {
 public:
  DescriptorExtractor(const SamplingPattern& pattern, const DarkNoiseModel& dn,
                      const DescriptorParams& params);

  // rays may be null; the extractor then builds and caches its own table
  void set_frame(const RegisteredFrame& frame, const RayTable* rays = nullptr);

  // nullopt when the sampling window does not fit inside the image
  std::optional<MultimodalDescriptor> extract(const Keypoint& kp) const;

 private:
  SamplingPattern pattern_;
  DarkNoiseModel dn_;
  DescriptorParams params_;
  const RegisteredFrame* frame_ = nullptr;
  const RayTable* rays_ = nullptr;
  RayTable own_rays_;
  std::optional<IntegralImage> integral_;
};

}  // namespace vdio
