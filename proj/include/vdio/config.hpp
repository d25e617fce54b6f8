#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vdio/errors.hpp"

namespace vdio {

// Line-oriented "key = value" file with '#' comments. Keys are dotted paths;
// repeating a key appends to its value list. Every key must be consumed by a
// getter: unconsumed keys make check_all_consumed() throw ConfigError naming
// the first offender, so typos in config files fail loudly.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::filesystem::path& path);
  static KeyValueFile parse_string(const std::string& text,
                                   const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  double require_double(const std::string& key);
  int get_int(const std::string& key, int fallback);
  uint64_t get_u64(const std::string& key, uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  // whitespace-separated doubles in one value
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback);
  std::vector<double> require_doubles(const std::string& key, size_t count);
  // all values of a repeated key, in file order
  std::vector<std::string> get_repeated(const std::string& key);

  void check_all_consumed() const;
  const std::string& origin() const { return origin_; }

  static std::vector<double> parse_doubles(const std::string& text,
                                           const std::string& context);

 private:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
    bool consumed = false;
  };
  std::vector<Entry> entries_;
  std::string origin_;

  const std::string* find(const std::string& key);
  double to_double(const std::string& key, const std::string& value) const;
};

// ---------------------------------------------------------------- parameters

struct DetectorParams {
  double lambda = 1e-4;      // minimum Harris response kept in the visual map
  double gamma = 0.5;        // visual weight in the combined map
  double s_sat = 0.9;        // combined score saturation
  int n_target = 25;         // keypoints the selector aims for
  double r_min = 8.0;        // px; floor of the selection radius schedule
  double r_max = 32.0;       // px; start of the selection radius schedule
  std::array<double, 3> depth_error_coeffs{0.0, 0.0, 0.0012};  // a0+a1 d+a2 d^2 [m]
};

struct DescriptorParams {
  double tau = 0.0025;                       // m^2; displacement closeness gate
  double normal_cos_max = 0.70710678118654752;  // normals differ >= 45 deg
  uint64_t pattern_seed = 9241;              // fixed so every run shares a pattern
};

struct TrackingParams {
  int h_max = 64;             // max accepted Hamming distance
  int margin = 8;             // best-vs-second-best separation
  bool margin_enabled = true;
  double w_min = 8.0;         // px; search window half-axis clamp
  double w_max = 64.0;
  int miss_max = 3;           // consecutive misses before a landmark is dropped
  int j_max = 25;             // landmark budget
};

struct NoiseParams {
  double accel_density = 2e-3;   // m/s^2/sqrt(Hz)
  double gyro_density = 2e-4;    // rad/s/sqrt(Hz)
  double accel_walk = 1e-4;      // m/s^3/sqrt(Hz)
  double gyro_walk = 1e-5;       // rad/s^2/sqrt(Hz)
  double sigma_px = 1.0;         // pixel measurement noise
  double bearing_process = 1e-3; // rad/sqrt(Hz) landmark direction process noise
  double rho_process = 1e-2;     // 1/m/sqrt(Hz) inverse-depth process noise
  double pos_process = 0.0;      // m/sqrt(Hz) extra position process noise
};

struct FilterParams {
  double dt_max = 0.02;          // s; propagation substep ceiling
  double rho_default = 0.5;      // 1/m when a keypoint has no valid depth
  double sigma_rho0 = 0.25;      // 1/m prior stddev for depthless landmarks
  double d_max_track = 20.0;     // m; inverse depth clamped to [1/d_max_track, 1/d_min]
  double gravity = 9.81;         // m/s^2, world z up
  double init_static_time = 0.5; // s of accel averaging before the filter starts
  bool depth_as_update = false;  // measured depth as an extra rho update
  // initial robot-state standard deviations
  double sigma_r0 = 1e-4;        // m
  double sigma_theta0 = 1e-2;    // rad
  double sigma_v0 = 1e-3;        // m/s
  double sigma_bf0 = 1e-2;       // m/s^2
  double sigma_bw0 = 1e-3;       // rad/s
};

struct PipelineConfig {
  DetectorParams detector;
  DescriptorParams descriptor;
  TrackingParams tracking;
  NoiseParams noise;
  FilterParams filter;
  uint64_t seed = 1;

  static PipelineConfig from_kv(KeyValueFile& kv);
  static PipelineConfig load(const std::filesystem::path& path);
  // resolved values, one per line, in config file syntax
  std::string describe() const;
};

}  // namespace vdio
