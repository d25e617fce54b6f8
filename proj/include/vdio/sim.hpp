#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "vdio/calib.hpp"
#include "vdio/camera.hpp"
#include "vdio/config.hpp"
#include "vdio/ekf.hpp"
#include "vdio/frame.hpp"
#include "vdio/geometry.hpp"
#include "vdio/rng.hpp"

namespace vdio {

// Analytic rigid-body motion of the IMU frame: world-frame position with
// exact first and second derivatives, attitude with exact body rates. All
// built-in profiles start at rest and are twice differentiable, so sampled
// IMU signals are consistent with numerically differentiated poses.
class Trajectory {
 public:
  virtual ~Trajectory() = default;
  virtual double duration() const = 0;
  virtual Eigen::Vector3d position(double t) const = 0;
  virtual Eigen::Vector3d velocity(double t) const = 0;
  virtual Eigen::Vector3d acceleration(double t) const = 0;
  virtual Eigen::Quaterniond orientation(double t) const = 0;  // body -> world
  virtual Eigen::Vector3d body_rates(double t) const = 0;
};

// Reads "trajectory.*" keys. Types: static, spin, rect, circle, sway.
std::unique_ptr<Trajectory> make_trajectory(KeyValueFile& kv);

struct AlbedoPattern {
  enum class Kind { kUniform, kChecker, kNoise } kind = Kind::kUniform;
  double albedo_a = 0.8;
  double albedo_b = 0.2;
  double cell = 0.25;  // m
  uint64_t seed = 0;

  double sample(double u, double v) const;
};

// Rect: finite rectangle in its local x-y plane (size.x by size.y), normal
// along local +z. Box: axis-aligned cuboid of full extents size, centered at
// the local origin. pose maps local points to world.
struct Primitive {
  enum class Kind { kRect, kBox } kind = Kind::kRect;
  RigidTransform pose;
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  AlbedoPattern albedo;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  double ambient = 0.3;
  double i_dn_sim = 0.0;  // simulated dark-noise mean, gray levels
  std::array<double, 3> depth_noise_coeffs{0.0, 0.0, 0.0};
  double depth_quant = 0.001;  // m, sensor quantization step
};

// Reads "scene.*" keys (ambient, i_dn, depth_noise_coeffs, depth_quant, and
// repeated rect/box/room primitive lines).
SceneSpec scene_from_kv(KeyValueFile& kv);

struct RayHit {
  double t = 0.0;  // distance along the unit ray direction
  const Primitive* prim = nullptr;
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
};

std::optional<RayHit> intersect_scene(const SceneSpec& scene,
                                      const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& dir);

// Renders what the camera at t_world_cam sees. gray = clamp(255 * albedo *
// ambient + dark_noise, 0, 255); depth is the camera-frame z of the nearest
// hit, perturbed by the quadratic error model, quantized, and zeroed outside
// [d_min, d_max]. Pixel noise is a pure function of (seed, frame_index,
// pixel), so the render is independent of traversal order.
RegisteredFrame render_frame(const SceneSpec& scene, const RigidTransform& t_world_cam,
                             const PinholeCamera& cam, double d_min, double d_max,
                             uint64_t seed, uint64_t frame_index,
                             const RayTable* rays = nullptr, double timestamp = 0.0);

struct GroundTruthSample {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
};

// Samples ideal IMU readings along the trajectory at the given rate:
//   f = R^T (a - g) + b_f + n_f,  w = body_rates + b_w + n_w.
// With noisy=true, white noise scales with sqrt(rate) and the biases random
// walk from zero. Ground truth (when requested) is sampled at the same times.
std::vector<ImuSample> generate_imu(const Trajectory& traj, double rate,
                                    const NoiseParams& noise, bool noisy,
                                    double gravity, Rng& rng,
                                    std::vector<GroundTruthSample>* gt = nullptr);

struct SimReport {
  int frames = 0;
  int imu_samples = 0;
  int dark_frames = 0;
  double duration = 0.0;
  std::filesystem::path dataset_dir;
};

// Full dataset synthesis driven by one config (scene.*, trajectory.*, sim.*,
// camera.* keys): renders frames, samples IMU and ground truth, and writes a
// loadable dataset directory.
SimReport simulate_dataset(KeyValueFile& kv, const std::filesystem::path& out_dir,
                           uint64_t seed);

}  // namespace vdio
