#include "vdio/descriptor.hpp"

#include <bit>
#include <cmath>

#include "vdio/errors.hpp"
#include "vdio/rng.hpp"

namespace vdio {

IntegralImage::IntegralImage(const GrayImage& img) : width(img.width), height(img.height) {
  sum.assign(size_t(width + 1) * (height + 1), 0.0);
  for (int y = 0; y < height; ++y) {
    double row = 0.0;
    for (int x = 0; x < width; ++x) {
      row += img.at(x, y);
      sum[size_t(y + 1) * (width + 1) + (x + 1)] =
          sum[size_t(y) * (width + 1) + (x + 1)] + row;
    }
  }
}

SamplingPattern SamplingPattern::generate(uint64_t seed) {
  SamplingPattern p;
  Rng rng(seed);
  const double sigma = double(2 * kDescriptorWindowHalf) / 5.0;
  auto draw_point = [&]() {
    const auto clamp = [](long v) {
      return int(std::max<long>(-kPatternClamp, std::min<long>(kPatternClamp, v)));
    };
    const int x = clamp(std::lround(rng.gaussian() * sigma));
    const int y = clamp(std::lround(rng.gaussian() * sigma));
    return Eigen::Vector2i(x, y);
  };
  for (auto& pair : p.pairs) {
    pair.a = draw_point();
    pair.b = draw_point();
    while (pair.b == pair.a) pair.b = draw_point();
  }
  return p;
}

DarkNoiseModel calibrate_dark_noise(const std::vector<GrayImage>& dark_frames) {
  if (dark_frames.empty())
    throw ConfigError("calibrate_dark_noise: no dark frames given");
  double total = 0.0;
  size_t count = 0;
  for (const auto& img : dark_frames) {
    if (img.empty()) throw ConfigError("calibrate_dark_noise: empty dark frame");
    for (const uint8_t v : img.data) total += v;
    count += img.data.size();
  }
  return DarkNoiseModel{total / double(count)};
}

bool visual_bit(double patch_mean_1, double patch_mean_2, const DarkNoiseModel& dn) {
  return std::max(0.0, patch_mean_1 - dn.i_dn) < std::max(0.0, patch_mean_2 - dn.i_dn);
}

int MultimodalDescriptor::popcount() const {
  int n = 0;
  for (const uint64_t w : words) n += std::popcount(w);
  return n;
}

int hamming_distance(const MultimodalDescriptor& a, const MultimodalDescriptor& b) {
  int n = 0;
  for (int i = 0; i < 4; ++i) n += std::popcount(a.words[i] ^ b.words[i]);
  return n;
}

std::optional<Eigen::Vector3d> fit_patch_normal(const DepthImage& depth,
                                                const RayTable& rays, int cx, int cy,
                                                int radius) {
  // least-squares plane z = a*x + b*y + c over the valid neighborhood points
  double sxx = 0, sxy = 0, syy = 0, sx = 0, sy = 0, sz = 0, sxz = 0, syz = 0;
  int n = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = cy + dy;
    if (y < 0 || y >= depth.height) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx;
      if (x < 0 || x >= depth.width) continue;
      const float d = depth.at(x, y);
      if (!(d > 0.0f)) continue;
      const Eigen::Vector2f r = rays.at(x, y);
      const double px = double(r.x()) * d, py = double(r.y()) * d, pz = d;
      sxx += px * px;
      sxy += px * py;
      syy += py * py;
      sx += px;
      sy += py;
      sz += pz;
      sxz += px * pz;
      syz += py * pz;
      if (dx == 0 && dy == 0) center = {px, py, pz};
      ++n;
    }
  }
  if (n < 6) return std::nullopt;
  Eigen::Matrix3d m;
  m << sxx, sxy, sx, sxy, syy, sy, sx, sy, double(n);
  Eigen::Vector3d rhs(sxz, syz, sz);
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::Vector3d abc = lu.solve(rhs);
  Eigen::Vector3d normal(abc.x(), abc.y(), -1.0);
  normal.normalize();
  if (center.isZero()) center = {sx / n, sy / n, sz / n};
  if (normal.dot(center) > 0.0) normal = -normal;  // face the camera
  return normal;
}

DescriptorExtractor::DescriptorExtractor(const SamplingPattern& pattern,
                                         const DarkNoiseModel& dn,
                                         const DescriptorParams& params)
    : pattern_(pattern), dn_(dn), params_(params) {}

void DescriptorExtractor::set_frame(const RegisteredFrame& frame, const RayTable* rays) {
  if (frame.gray.empty()) throw DataError("DescriptorExtractor: frame has no image");
  frame_ = &frame;
  integral_.emplace(frame.gray);
  if (rays) {
    rays_ = rays;
  } else {
    if (own_rays_.width != frame.camera.width || own_rays_.height != frame.camera.height) {
      own_rays_ = RayTable::build(frame.camera);
    }
    rays_ = &own_rays_;
  }
}

std::optional<MultimodalDescriptor> DescriptorExtractor::extract(const Keypoint& kp) const {
  if (!frame_) throw DataError("DescriptorExtractor: set_frame not called");
  const GrayImage& gray = frame_->gray;
  const DepthImage& depth = frame_->depth;
  const int x0 = int(std::lround(kp.pixel.x()));
  const int y0 = int(std::lround(kp.pixel.y()));
  const int m = kDescriptorWindowHalf;
  if (x0 - m < 0 || x0 + m > gray.width - 1 || y0 - m < 0 || y0 + m > gray.height - 1) {
    return std::nullopt;  // sampling window would leave the image
  }

  MultimodalDescriptor desc;
  const bool use_visual = kp.modality != KeypointModality::kDepth;
  const bool use_depth =
      kp.modality != KeypointModality::kVisual && !depth.empty();
  desc.has_visual = use_visual;
  desc.has_depth = use_depth;

  for (int k = 0; k < kDescriptorPairs; ++k) {
    const auto& pair = pattern_.pairs[k];
    bool bit = false;
    if (use_visual) {
      const double m1 = integral_->patch_mean(x0 + pair.a.x(), y0 + pair.a.y(),
                                              kDescriptorPatchRadius);
      const double m2 = integral_->patch_mean(x0 + pair.b.x(), y0 + pair.b.y(),
                                              kDescriptorPatchRadius);
      bit = visual_bit(m1, m2, dn_);
    }
    if (!bit && use_depth) {
      const int ax = x0 + pair.a.x(), ay = y0 + pair.a.y();
      const int bx = x0 + pair.b.x(), by = y0 + pair.b.y();
      const float da = depth.at(ax, ay);
      const float db = depth.at(bx, by);
      if (da > 0.0f && db > 0.0f) {  // depth bits need two valid samples
        const Eigen::Vector2f ra = rays_->at(ax, ay);
        const Eigen::Vector2f rb = rays_->at(bx, by);
        const Eigen::Vector3d pa(double(ra.x()) * da, double(ra.y()) * da, da);
        const Eigen::Vector3d pb(double(rb.x()) * db, double(rb.y()) * db, db);
        bool geom = (pa - pb).squaredNorm() <= params_.tau;
        if (!geom) {
          const auto na = fit_patch_normal(depth, *rays_, ax, ay);
          const auto nb = fit_patch_normal(depth, *rays_, bx, by);
          if (na && nb) geom = na->dot(*nb) <= params_.normal_cos_max;
        }
        bit = geom;
      }
    }
    if (bit) desc.set_bit(k);
  }
  return desc;
}

}  // namespace vdio
