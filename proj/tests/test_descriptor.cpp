#include <doctest.h>

#include <cmath>

#include "vdio/descriptor.hpp"
#include "vdio/errors.hpp"
#include "vdio/rng.hpp"

using namespace vdio;

namespace {

PinholeCamera small_camera(int w = 160, int h = 120) {
  PinholeCamera cam;
  cam.fx = 120;
  cam.fy = 120;
  cam.cx = (w - 1) / 2.0;
  cam.cy = (h - 1) / 2.0;
  cam.width = w;
  cam.height = h;
  return cam;
}

RegisteredFrame textured_frame(uint64_t seed, int w = 160, int h = 120) {
  RegisteredFrame f;
  f.camera = small_camera(w, h);
  f.gray = GrayImage(w, h);
  f.depth = DepthImage(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.gray.at(x, y) = uint8_t(40 + 180 * hash_uniform(seed, uint64_t(y), uint64_t(x)));
      f.depth.at(x, y) =
          float(1.5 + 1.2 * hash_uniform(seed + 1, uint64_t(y), uint64_t(x)));
    }
  }
  return f;
}

Keypoint keypoint_at(double x, double y, KeypointModality m) {
  Keypoint kp;
  kp.pixel = Eigen::Vector2d(x, y);
  kp.score = 0.5;
  kp.modality = m;
  return kp;
}

}  // namespace

// ----------------------------------------------------------------- pattern

TEST_CASE("sampling pattern is deterministic and respects the clamp") {
  const SamplingPattern p1 = SamplingPattern::generate(9241);
  const SamplingPattern p2 = SamplingPattern::generate(9241);
  const SamplingPattern p3 = SamplingPattern::generate(1234);
  bool differs = false;
  for (int i = 0; i < kDescriptorPairs; ++i) {
    CHECK(p1.pairs[i].a == p2.pairs[i].a);
    CHECK(p1.pairs[i].b == p2.pairs[i].b);
    if (p1.pairs[i].a != p3.pairs[i].a) differs = true;
    for (const auto& pt : {p1.pairs[i].a, p1.pairs[i].b}) {
      CHECK(std::abs(pt.x()) <= kPatternClamp);
      CHECK(std::abs(pt.y()) <= kPatternClamp);
      // the 9x9 patch around the sample stays inside the 48x48 window
      CHECK(std::abs(pt.x()) + kDescriptorPatchRadius <= kDescriptorWindowHalf);
      CHECK(std::abs(pt.y()) + kDescriptorPatchRadius <= kDescriptorWindowHalf);
    }
  }
  CHECK(differs);  // seed actually matters
  // the pattern is spread out, not collapsed to the center
  double mean_norm = 0;
  for (const auto& pr : p1.pairs) mean_norm += (pr.a - pr.b).cast<double>().norm();
  CHECK(mean_norm / kDescriptorPairs > 5.0);
}

// ---------------------------------------------------------------- dark noise

TEST_CASE("dark-noise calibration averages all pixels of all frames") {
  CHECK(calibrate_dark_noise({GrayImage(8, 8, uint8_t(0))}).i_dn == 0.0);
  CHECK(calibrate_dark_noise({GrayImage(8, 8, uint8_t(3))}).i_dn == doctest::Approx(3.0));
  CHECK(calibrate_dark_noise({GrayImage(4, 4, uint8_t(2)), GrayImage(4, 4, uint8_t(4))})
            .i_dn == doctest::Approx(3.0));
  // unequal pixel counts weight by pixel, not by frame
  CHECK(calibrate_dark_noise({GrayImage(2, 1, uint8_t(0)), GrayImage(1, 1, uint8_t(6))})
            .i_dn == doctest::Approx(2.0));
  CHECK_THROWS_AS(calibrate_dark_noise({}), ConfigError);
}

TEST_CASE("visual bit implements the clamped comparison") {
  CHECK(visual_bit(10, 20, {0.0}) == true);
  CHECK(visual_bit(20, 10, {0.0}) == false);
  CHECK(visual_bit(10, 10, {0.0}) == false);  // strict inequality
  CHECK(visual_bit(2, 4, {5.0}) == false);    // both clamp to zero
  CHECK(visual_bit(4, 10, {5.0}) == true);    // 0 < 5
  CHECK(visual_bit(10, 4, {5.0}) == false);   // 5 < 0 is false
}

// -------------------------------------------------------------- extraction

TEST_CASE("extraction is deterministic and the window bound is enforced") {
  const SamplingPattern pattern = SamplingPattern::generate(9241);
  const DescriptorParams params;
  DescriptorExtractor ex(pattern, {1.5}, params);
  const RegisteredFrame f = textured_frame(3);
  ex.set_frame(f);

  const Keypoint kp = keypoint_at(80, 60, KeypointModality::kMultimodal);
  const auto d1 = ex.extract(kp);
  const auto d2 = ex.extract(kp);
  REQUIRE(d1.has_value());
  REQUIRE(d2.has_value());
  CHECK(hamming_distance(*d1, *d2) == 0);
  CHECK(d1->has_visual);
  CHECK(d1->has_depth);
  CHECK(d1->popcount() > 0);
  CHECK(d1->popcount() < 256);

  // window hangs outside the image -> no descriptor
  CHECK_FALSE(ex.extract(keypoint_at(10, 60, KeypointModality::kVisual)).has_value());
  CHECK_FALSE(ex.extract(keypoint_at(80, 5, KeypointModality::kVisual)).has_value());
  CHECK_FALSE(ex.extract(keypoint_at(155, 60, KeypointModality::kVisual)).has_value());
  CHECK(ex.extract(keypoint_at(29, 29, KeypointModality::kVisual)).has_value());
}

TEST_CASE("global intensity offset leaves visual bits unchanged") {
  const SamplingPattern pattern = SamplingPattern::generate(9241);
  const DescriptorParams params;
  const DarkNoiseModel dn{2.0};
  RegisteredFrame f = textured_frame(7);
  // keep every patch mean comfortably above I_DN and below 255 - 30
  for (auto& g : f.gray.data) g = uint8_t(30 + (g % 150));

  RegisteredFrame shifted = f;
  for (auto& g : shifted.gray.data) g = uint8_t(g + 30);

  DescriptorExtractor ex(pattern, dn, params);
  const Keypoint kp = keypoint_at(80, 60, KeypointModality::kVisual);
  ex.set_frame(f);
  const auto a = ex.extract(kp);
  ex.set_frame(shifted);
  const auto b = ex.extract(kp);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(a->has_visual);
  CHECK_FALSE(a->has_depth);  // visual-only keypoint gets no depth bits
  CHECK(hamming_distance(*a, *b) == 0);
}

TEST_CASE("patch means at or below the dark floor give all-zero visual bits") {
  const SamplingPattern pattern = SamplingPattern::generate(9241);
  RegisteredFrame f = textured_frame(9);
  for (auto& g : f.gray.data) g = uint8_t(g % 4);  // everything <= 3

  DescriptorExtractor ex(pattern, {4.0}, DescriptorParams{});
  ex.set_frame(f);
  const auto d = ex.extract(keypoint_at(80, 60, KeypointModality::kVisual));
  REQUIRE(d.has_value());
  CHECK(d->popcount() == 0);
}

TEST_CASE("multimodal bits are the bitwise OR of the per-modality bits") {
  const SamplingPattern pattern = SamplingPattern::generate(9241);
  const DescriptorParams params;
  DescriptorExtractor ex(pattern, {1.0}, params);
  const RegisteredFrame f = textured_frame(11);
  ex.set_frame(f);

  const auto vis = ex.extract(keypoint_at(80, 60, KeypointModality::kVisual));
  const auto dep = ex.extract(keypoint_at(80, 60, KeypointModality::kDepth));
  const auto both = ex.extract(keypoint_at(80, 60, KeypointModality::kMultimodal));
  REQUIRE(vis.has_value());
  REQUIRE(dep.has_value());
  REQUIRE(both.has_value());
  CHECK(vis->has_visual);
  CHECK_FALSE(vis->has_depth);
  CHECK(dep->has_depth);
  CHECK_FALSE(dep->has_visual);
  for (int w = 0; w < 4; ++w)
    CHECK(both->words[size_t(w)] == (vis->words[size_t(w)] | dep->words[size_t(w)]));
  CHECK(vis->popcount() > 0);
  CHECK(dep->popcount() > 0);
}

TEST_CASE("textureless depth structure still yields a discriminative descriptor") {
  const SamplingPattern pattern = SamplingPattern::generate(9241);
  const DescriptorParams params;
  // constant gray; two different depth structures under the two keypoints
  RegisteredFrame f;
  f.camera = small_camera(200, 120);
  f.gray = GrayImage(200, 120, uint8_t(2));
  f.depth = DepthImage(200, 120, 0.0f);
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 200; ++x) {
      // left: diagonal step wedge; right: smooth slope
      if (x < 100) {
        f.depth.at(x, y) = (x + y < 110) ? 1.0f : 1.6f;
      } else {
        f.depth.at(x, y) = float(1.0 + 0.004 * (x - 100) + 0.002 * y);
      }
    }
  }
  DescriptorExtractor ex(pattern, {0.0}, params);
  ex.set_frame(f);
  const auto left = ex.extract(keypoint_at(55, 55, KeypointModality::kDepth));
  const auto right = ex.extract(keypoint_at(150, 55, KeypointModality::kDepth));
  REQUIRE(left.has_value());
  REQUIRE(right.has_value());
  CHECK_FALSE(left->has_visual);
  CHECK(left->has_depth);
  CHECK(hamming_distance(*left, *right) > 0);
}

TEST_CASE("invalid depth under the samples drops the depth bits") {
  const SamplingPattern pattern = SamplingPattern::generate(9241);
  RegisteredFrame f = textured_frame(13);
  f.depth = DepthImage(f.gray.width, f.gray.height, 0.0f);  // all invalid
  DescriptorExtractor ex(pattern, {1.0}, DescriptorParams{});
  ex.set_frame(f);
  const auto d = ex.extract(keypoint_at(80, 60, KeypointModality::kDepth));
  REQUIRE(d.has_value());
  // the depth branch ran (has_depth marks the modality, not data validity)
  // but every pair lacked two valid samples, so no bit was set
  CHECK(d->has_depth);
  CHECK_FALSE(d->has_visual);
  CHECK(d->popcount() == 0);
}

// ------------------------------------------------------------ patch normals

TEST_CASE("plane fit recovers the normal of a synthetic plane") {
  const PinholeCamera cam = small_camera();
  const RayTable rays = RayTable::build(cam);
  // plane: n . p = h with n pointing toward the camera (negative z component
  // flipped by orientation rule); depth(x,y) solves n . (z*ray) = h
  const Eigen::Vector3d n_true = Eigen::Vector3d(0.3, -0.2, -1.0).normalized();
  const double h = -2.0;  // plane in front of the camera
  DepthImage depth(cam.width, cam.height, 0.0f);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector2f r = rays.at(x, y);
      const Eigen::Vector3d dir(r.x(), r.y(), 1.0);
      const double denom = n_true.dot(dir);
      if (std::abs(denom) < 1e-9) continue;
      const double z = h / denom;
      if (z > 0.1) depth.at(x, y) = float(z);
    }
  }
  const auto n = fit_patch_normal(depth, rays, 80, 60);
  REQUIRE(n.has_value());
  CHECK(n->norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(n->z() < 0.0);  // oriented toward the camera
  CHECK(std::abs(n->dot(n_true)) > 0.9999);

  // degenerate: fewer than 6 valid samples
  DepthImage sparse(cam.width, cam.height, 0.0f);
  sparse.at(80, 60) = 2.0f;
  sparse.at(81, 60) = 2.0f;
  CHECK_FALSE(fit_patch_normal(sparse, rays, 80, 60).has_value());
}

// ------------------------------------------------------------------ hamming

TEST_CASE("hamming distance matches a naive bit loop") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    MultimodalDescriptor a, b;
    for (int w = 0; w < 4; ++w) {
      a.words[size_t(w)] = rng.next_u64();
      b.words[size_t(w)] = rng.next_u64();
    }
    int naive = 0;
    for (int k = 0; k < 256; ++k) naive += int(a.bit(k) != b.bit(k));
    CHECK(hamming_distance(a, b) == naive);
    CHECK(hamming_distance(a, b) == hamming_distance(b, a));
    CHECK(hamming_distance(a, a) == 0);
  }
  MultimodalDescriptor zero, full;
  for (auto& w : full.words) w = ~uint64_t(0);
  CHECK(hamming_distance(zero, full) == 256);
  CHECK(zero.popcount() == 0);
  CHECK(full.popcount() == 256);
}

// ---------------------------------------------------- two-view match sanity

TEST_CASE("descriptors match across a small viewpoint change") {
  // same textured wall seen twice with a 2 px shift: nearest-neighbor
  // matching by Hamming distance must link the shifted keypoints
  const SamplingPattern pattern = SamplingPattern::generate(9241);
  const DescriptorParams params;
  RegisteredFrame a;
  a.camera = small_camera(240, 160);
  a.gray = GrayImage(240, 160);
  a.depth = DepthImage(240, 160, 0.0f);
  for (int y = 0; y < 160; ++y) {
    for (int x = 0; x < 240; ++x) {
      // smooth-ish texture so a 2 px shift changes patches only mildly:
      // blend a couple of incommensurate sinusoids
      const double v = 128 + 60 * std::sin(0.19 * x) * std::cos(0.23 * y) +
                       40 * std::sin(0.11 * (x + y));
      a.gray.at(x, y) = uint8_t(std::clamp(v, 0.0, 255.0));
      a.depth.at(x, y) = float(2.0 + 0.3 * std::sin(0.07 * x) * std::sin(0.09 * y));
    }
  }
  RegisteredFrame b = a;
  for (int y = 0; y < 160; ++y)
    for (int x = 0; x < 240; ++x) {
      const int sx = std::min(239, x + 2);
      b.gray.at(x, y) = a.gray.at(sx, y);
      b.depth.at(x, y) = a.depth.at(sx, y);
    }

  DescriptorExtractor exa(pattern, {0.0}, params);
  DescriptorExtractor exb(pattern, {0.0}, params);
  exa.set_frame(a);
  exb.set_frame(b);

  std::vector<Eigen::Vector2d> sites;
  for (int y = 40; y <= 120; y += 20)
    for (int x = 50; x <= 190; x += 20) sites.emplace_back(x, y);

  int correct = 0, total = 0;
  for (size_t i = 0; i < sites.size(); ++i) {
    const auto da = exa.extract(
        keypoint_at(sites[i].x(), sites[i].y(), KeypointModality::kMultimodal));
    if (!da) continue;
    int best = 1 << 20;
    size_t best_j = 0;
    for (size_t j = 0; j < sites.size(); ++j) {
      const auto db = exb.extract(keypoint_at(sites[j].x() - 2.0, sites[j].y(),
                                              KeypointModality::kMultimodal));
      if (!db) continue;
      const int hd = hamming_distance(*da, *db);
      if (hd < best) {
        best = hd;
        best_j = j;
      }
    }
    ++total;
    if (best_j == i) ++correct;
  }
  REQUIRE(total >= 25);
  CHECK(double(correct) / double(total) >= 0.9);
}
