#include "vdio/feature_detection.hpp"

#include <algorithm>
#include <cmath>

#include "vdio/errors.hpp"

namespace vdio {

namespace {

constexpr double kHarrisK = 0.04;
constexpr int kHarrisWindowRadius = 2;   // 5x5 window means
constexpr int kVisualNmsRadius = 2;      // 5x5 suppression
constexpr int kDepthNmsRadius = 1;       // 3x3 suppression
constexpr float kNormFloor = 1e-3f;      // weakest survivor after normalization

// Non-max suppression with a deterministic tie rule: a pixel survives only
// if no earlier-raster neighbor ties it and no neighbor beats it. Exactly
// one pixel of any constant plateau survives.
bool is_local_max(const FloatImage& v, int x, int y, int radius) {
  const float s = v.at(x, y);
  for (int dy = -radius; dy <= radius; ++dy) {
    const int ny = y + dy;
    if (ny < 0 || ny >= v.height) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int nx = x + dx;
      if (nx < 0 || nx >= v.width) continue;
      const float o = v.at(nx, ny);
      if (o > s) return false;
      if (o == s && (dy < 0 || (dy == 0 && dx < 0))) return false;
    }
  }
  return true;
}

// affine map of survivor scores onto [kNormFloor, 1]; max maps to 1 exactly
void minmax_normalize(FloatImage& m) {
  float lo = std::numeric_limits<float>::max();
  float hi = 0.0f;
  for (const float s : m.data) {
    if (s > 0.0f) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  if (hi <= 0.0f) return;  // nothing survived
  const float span = hi - lo;
  for (float& s : m.data) {
    if (s > 0.0f) {
      s = span > 0.0f ? kNormFloor + (1.0f - kNormFloor) * (s - lo) / span : 1.0f;
    }
  }
}

struct Integral {
  int w = 0, h = 0;
  std::vector<double> s;  // (w+1) x (h+1)

  void build(const std::vector<double>& v, int width, int height) {
    w = width;
    h = height;
    s.assign(size_t(w + 1) * (h + 1), 0.0);
    for (int y = 0; y < h; ++y) {
      double row = 0.0;
      for (int x = 0; x < w; ++x) {
        row += v[size_t(y) * w + x];
        s[size_t(y + 1) * (w + 1) + (x + 1)] = s[size_t(y) * (w + 1) + (x + 1)] + row;
      }
    }
  }

  double box(int x0, int y0, int x1, int y1) const {
    return s[size_t(y1 + 1) * (w + 1) + (x1 + 1)] - s[size_t(y0) * (w + 1) + (x1 + 1)] -
           s[size_t(y1 + 1) * (w + 1) + x0] + s[size_t(y0) * (w + 1) + x0];
  }
};

}  // namespace

std::optional<double> depth_error(double d, const std::array<double, 3>& coeffs) {
  if (!(d > 0.0)) return std::nullopt;
  return coeffs[0] + coeffs[1] * d + coeffs[2] * d * d;
}

ScoreMap compute_visual_score_map(const GrayImage& gray, const DetectorParams& params) {
  if (gray.empty()) throw ConfigError("compute_visual_score_map: empty image");
  const int w = gray.width, h = gray.height;
  ScoreMap out;
  out.kind = ScoreKind::kVisual;
  out.map = FloatImage(w, h, 0.0f);
  const int border = kHarrisWindowRadius + 1;  // Sobel needs one more ring
  if (w <= 2 * border || h <= 2 * border) return out;

  // Sobel gradients of [0,1] intensities, /8 kernel normalization
  std::vector<double> ixx(size_t(w) * h, 0.0), iyy(size_t(w) * h, 0.0),
      ixy(size_t(w) * h, 0.0);
  constexpr double kScale = 1.0 / (8.0 * 255.0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double tl = gray.at(x - 1, y - 1), tc = gray.at(x, y - 1),
                   tr = gray.at(x + 1, y - 1);
      const double ml = gray.at(x - 1, y), mr = gray.at(x + 1, y);
      const double bl = gray.at(x - 1, y + 1), bc = gray.at(x, y + 1),
                   br = gray.at(x + 1, y + 1);
      const double gx = ((tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)) * kScale;
      const double gy = ((bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)) * kScale;
      const size_t i = size_t(y) * w + x;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  }
  Integral sxx, syy, sxy;
  sxx.build(ixx, w, h);
  syy.build(iyy, w, h);
  sxy.build(ixy, w, h);

  FloatImage response(w, h, 0.0f);
  const int r = kHarrisWindowRadius;
  const double inv_n = 1.0 / double((2 * r + 1) * (2 * r + 1));
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const double a = sxx.box(x - r, y - r, x + r, y + r) * inv_n;
      const double c = syy.box(x - r, y - r, x + r, y + r) * inv_n;
      const double b = sxy.box(x - r, y - r, x + r, y + r) * inv_n;
      const double resp = a * c - b * b - kHarrisK * (a + c) * (a + c);
      if (resp > 0.0) response.at(x, y) = float(resp);
    }
  }

  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const float s = response.at(x, y);
      if (s >= params.lambda && is_local_max(response, x, y, kVisualNmsRadius)) {
        out.map.at(x, y) = s;
      }
    }
  }
  minmax_normalize(out.map);
  return out;
}

ScoreMap compute_depth_score_map(const DepthImage& depth, const DetectorParams& params) {
  if (depth.empty()) throw ConfigError("compute_depth_score_map: empty image");
  const int w = depth.width, h = depth.height;
  ScoreMap out;
  out.kind = ScoreKind::kDepth;
  out.map = FloatImage(w, h, 0.0f);
  if (w < 3 || h < 3) return out;

  // raw edge response: foreground-positive Laplacian minus the noise floor
  // of the 8-neighborhood, only where the whole 3x3 stencil is valid
  FloatImage raw(w, h, 0.0f);
  const auto& cf = params.depth_error_coeffs;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double c = depth.at(x, y);
      const double l = depth.at(x - 1, y), rr = depth.at(x + 1, y);
      const double t = depth.at(x, y - 1), b = depth.at(x, y + 1);
      const double tl = depth.at(x - 1, y - 1), tr = depth.at(x + 1, y - 1);
      const double bl = depth.at(x - 1, y + 1), br = depth.at(x + 1, y + 1);
      if (!(c > 0) || !(l > 0) || !(rr > 0) || !(t > 0) || !(b > 0) || !(tl > 0) ||
          !(tr > 0) || !(bl > 0) || !(br > 0)) {
        continue;
      }
      const double lap = (l + rr + t + b) - 4.0 * c;  // foreground pixels positive
      double noise = 0.0;
      for (const double d : {l, rr, t, b, tl, tr, bl, br}) {
        noise += cf[0] + cf[1] * d + cf[2] * d * d;
      }
      const double score = lap - noise;
      if (score > 0.0) raw.at(x, y) = float(score);
    }
  }

  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const float s = raw.at(x, y);
      if (s <= 0.0f || !is_local_max(raw, x, y, kDepthNmsRadius)) continue;
      // keep only edges whose gradient direction is well away from the
      // image axes: folded into [0, 90), it must lie in [30, 60] degrees
      const double gx = ((depth.at(x + 1, y - 1) + 2.0 * depth.at(x + 1, y) +
                          depth.at(x + 1, y + 1)) -
                         (depth.at(x - 1, y - 1) + 2.0 * depth.at(x - 1, y) +
                          depth.at(x - 1, y + 1))) /
                        8.0;
      const double gy = ((depth.at(x - 1, y + 1) + 2.0 * depth.at(x, y + 1) +
                          depth.at(x + 1, y + 1)) -
                         (depth.at(x - 1, y - 1) + 2.0 * depth.at(x, y - 1) +
                          depth.at(x + 1, y - 1))) /
                        8.0;
      const double deg = std::atan2(gy, gx) * 180.0 / M_PI;
      const double folded = std::fmod(std::fmod(deg, 90.0) + 90.0, 90.0);
      if (folded < 30.0 || folded > 60.0) continue;
      out.map.at(x, y) = s;
    }
  }
  minmax_normalize(out.map);
  return out;
}

ScoreMap combine_score_maps(const ScoreMap& visual, const ScoreMap& depth,
                            const DetectorParams& params) {
  if (!visual.map.same_size(depth.map)) {
    throw ConfigError("combine_score_maps: visual map " +
                      std::to_string(visual.map.width) + "x" +
                      std::to_string(visual.map.height) + " vs depth map " +
                      std::to_string(depth.map.width) + "x" +
                      std::to_string(depth.map.height));
  }
  ScoreMap out;
  out.kind = ScoreKind::kCombined;
  out.map = FloatImage(visual.map.width, visual.map.height, 0.0f);
  const float g = float(params.gamma);
  const float sat = float(params.s_sat);
  for (size_t i = 0; i < out.map.data.size(); ++i) {
    const float c = g * visual.map.data[i] + (1.0f - g) * depth.map.data[i];
    out.map.data[i] = std::min(c, sat);
  }
  return out;
}

std::vector<Keypoint> select_keypoints(const ScoreMap& combined,
                                       const ScoreMap& visual, const ScoreMap& depth,
                                       const RegisteredFrame& frame,
                                       const DetectorParams& params) {
  if (!combined.map.same_size(visual.map) || !combined.map.same_size(depth.map)) {
    throw ConfigError("select_keypoints: score map sizes differ");
  }
  struct Cand {
    float score;
    int x, y;
  };
  std::vector<Cand> cands;
  for (int y = 0; y < combined.map.height; ++y) {
    for (int x = 0; x < combined.map.width; ++x) {
      const float s = combined.at(x, y);
      if (s > 0.0f) cands.push_back({s, x, y});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  // widest spacing first; halve until enough keypoints fit
  std::vector<Cand> picked;
  double radius = params.r_max;
  while (true) {
    picked.clear();
    const double r2 = radius * radius;
    for (const Cand& c : cands) {
      bool ok = true;
      for (const Cand& p : picked) {
        const double dx = c.x - p.x, dy = c.y - p.y;
        if (dx * dx + dy * dy < r2) {
          ok = false;
          break;
        }
      }
      if (ok) picked.push_back(c);
      if (int(picked.size()) >= params.n_target) break;
    }
    if (int(picked.size()) >= params.n_target || radius <= params.r_min) break;
    radius = std::max(radius / 2.0, params.r_min);
  }

  std::vector<Keypoint> out;
  out.reserve(picked.size());
  for (const Cand& c : picked) {
    Keypoint kp;
    kp.pixel = Eigen::Vector2d(c.x, c.y);
    kp.score = c.score;
    const bool vis = visual.at(c.x, c.y) > 0.0f;
    const bool dep = depth.at(c.x, c.y) > 0.0f;
    kp.modality = vis && dep    ? KeypointModality::kMultimodal
                  : vis         ? KeypointModality::kVisual
                                : KeypointModality::kDepth;
    if (!frame.depth.empty() && frame.depth.in_bounds(c.x, c.y)) {
      const float d = frame.depth.at(c.x, c.y);
      if (d > 0.0f) kp.depth = d;
    }
    out.push_back(kp);
  }
  return out;
}

}  // namespace vdio
