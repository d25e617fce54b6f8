#include "vdio/calib.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace vdio {

namespace {

PinholeCamera camera_from_kv(KeyValueFile& kv, const std::string& prefix,
                             const PinholeCamera* fallback) {
  PinholeCamera cam;
  if (fallback) cam = *fallback;
  const bool any = kv.has(prefix + ".fx");
  if (!fallback || any) {
    cam.fx = kv.require_double(prefix + ".fx");
    cam.fy = kv.require_double(prefix + ".fy");
    cam.cx = kv.require_double(prefix + ".cx");
    cam.cy = kv.require_double(prefix + ".cy");
    cam.width = kv.get_int(prefix + ".width", fallback ? fallback->width : 0);
    cam.height = kv.get_int(prefix + ".height", fallback ? fallback->height : 0);
  }
  const auto dist = kv.get_doubles(
      prefix + ".dist", {cam.dist[0], cam.dist[1], cam.dist[2], cam.dist[3]});
  if (dist.size() != 4)
    throw ConfigError(prefix + ".dist: expected 4 numbers (k1 k2 p1 p2)");
  cam.dist = {dist[0], dist[1], dist[2], dist[3]};
  return cam;
}

RigidTransform transform_from_kv(KeyValueFile& kv, const std::string& key,
                                 bool required) {
  if (!required && !kv.has(key)) return RigidTransform::Identity();
  const auto v = kv.require_doubles(key, 7);  // qw qx qy qz tx ty tz
  Eigen::Quaterniond q(v[0], v[1], v[2], v[3]);
  if (q.norm() < 1e-6) throw ConfigError(key + ": quaternion has zero norm");
  q.normalize();
  return RigidTransform(q, Eigen::Vector3d(v[4], v[5], v[6]));
}

}  // namespace

void Calibration::validate() const {
  if (!color.valid())
    throw ConfigError("calibration: color camera intrinsics invalid");
  if (!depth.valid())
    throw ConfigError("calibration: depth camera intrinsics invalid");
  if (!(d_min > 0.0) || !(d_max > d_min))
    throw ConfigError("calibration: need 0 < d_min < d_max");
  if (i_dn < 0.0) throw ConfigError("calibration: i_dn must be non-negative");
}

Calibration calibration_from_kv(KeyValueFile& kv) {
  Calibration c;
  c.color = camera_from_kv(kv, "camera.color", nullptr);
  // depth camera defaults to the color intrinsics (pre-registered rigs)
  c.depth = camera_from_kv(kv, "camera.depth", &c.color);
  c.extrinsics.t_cam_imu = transform_from_kv(kv, "extrinsics.t_cam_imu", true);
  c.extrinsics.t_depth_color =
      transform_from_kv(kv, "extrinsics.t_depth_color", false);
  c.d_min = kv.get_double("camera.d_min", c.d_min);
  c.d_max = kv.get_double("camera.d_max", c.d_max);
  c.i_dn = kv.get_double("camera.i_dn", c.i_dn);
  c.validate();
  return c;
}

Calibration load_calibration(const std::filesystem::path& path) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  Calibration c = calibration_from_kv(kv);
  kv.check_all_consumed();
  return c;
}

void save_calibration(const Calibration& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write calibration file: " + path.string());
  char buf[256];
  auto cam = [&](const char* prefix, const PinholeCamera& p) {
    std::snprintf(buf, sizeof(buf),
                  "%s.fx = %.9g\n%s.fy = %.9g\n%s.cx = %.9g\n%s.cy = %.9g\n"
                  "%s.width = %d\n%s.height = %d\n%s.dist = %.9g %.9g %.9g %.9g\n",
                  prefix, p.fx, prefix, p.fy, prefix, p.cx, prefix, p.cy, prefix,
                  p.width, prefix, p.height, prefix, p.dist[0], p.dist[1], p.dist[2],
                  p.dist[3]);
    out << buf;
  };
  auto tf = [&](const char* key, const RigidTransform& t) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  key, t.q.w(), t.q.x(), t.q.y(), t.q.z(), t.t.x(), t.t.y(), t.t.z());
    out << buf;
  };
  out << "# camera rig calibration\n";
  cam("camera.color", c.color);
  cam("camera.depth", c.depth);
  out << "# T_A_B convention: p_A = q * p_B + t (value: qw qx qy qz tx ty tz)\n";
  tf("extrinsics.t_cam_imu", c.extrinsics.t_cam_imu);
  tf("extrinsics.t_depth_color", c.extrinsics.t_depth_color);
  std::snprintf(buf, sizeof(buf),
                "camera.d_min = %.9g\ncamera.d_max = %.9g\ncamera.i_dn = %.9g\n",
                c.d_min, c.d_max, c.i_dn);
  out << buf;
  if (!out) throw DataError("failed writing calibration file: " + path.string());
}

}  // namespace vdio
