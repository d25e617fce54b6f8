#include "vdio/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vdio/dataset.hpp"
#include "vdio/feature_detection.hpp"

namespace vdio {
namespace {

constexpr double kPi = 3.14159265358979323846;

// C2 ramp: s(0)=s'(0)=s''(0)=0, s(1)=1, s'(1)=s''(1)=0.
double smooth5(double x) { return x * x * x * (10.0 + x * (-15.0 + 6.0 * x)); }
double smooth5_d(double x) { return x * x * (30.0 + x * (-60.0 + 30.0 * x)); }
double smooth5_dd(double x) { return x * (60.0 + x * (-180.0 + 120.0 * x)); }
// integral of smooth5 from 0 to x
double smooth5_i(double x) {
  return x * x * x * x * (2.5 + x * (-3.0 + x));
}

Eigen::Quaterniond yaw_quat(double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
}

struct EulerZyx {
  double yaw = 0.0, pitch = 0.0, roll = 0.0;
  double dyaw = 0.0, dpitch = 0.0, droll = 0.0;
};

Eigen::Quaterniond zyx_quat(const EulerZyx& e) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(e.yaw, Eigen::Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(e.pitch, Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(e.roll, Eigen::Vector3d::UnitX()));
}

// Body angular velocity of a ZYX Euler motion.
Eigen::Vector3d zyx_body_rates(const EulerZyx& e) {
  const double sp = std::sin(e.pitch), cp = std::cos(e.pitch);
  const double sr = std::sin(e.roll), cr = std::cos(e.roll);
  return {e.droll - e.dyaw * sp,
          e.dpitch * cr + e.dyaw * cp * sr,
          e.dyaw * cp * cr - e.dpitch * sr};
}

class StaticTrajectory : public Trajectory {
 public:
  StaticTrajectory(double duration, const Eigen::Vector3d& p, double yaw)
      : duration_(duration), p_(p), q_(yaw_quat(yaw)) {}
  double duration() const override { return duration_; }
  Eigen::Vector3d position(double) const override { return p_; }
  Eigen::Vector3d velocity(double) const override { return Eigen::Vector3d::Zero(); }
  Eigen::Vector3d acceleration(double) const override { return Eigen::Vector3d::Zero(); }
  Eigen::Quaterniond orientation(double) const override { return q_; }
  Eigen::Vector3d body_rates(double) const override { return Eigen::Vector3d::Zero(); }

 private:
  double duration_;
  Eigen::Vector3d p_;
  Eigen::Quaterniond q_;
};

// Pure yaw at a constant rate from t = 0; position fixed. The rate is
// discontinuous at t = 0 by design: every sampled instant t >= 0 sees the
// same angular velocity.
class SpinTrajectory : public Trajectory {
 public:
  SpinTrajectory(double duration, const Eigen::Vector3d& p, double yaw0, double rate)
      : duration_(duration), p_(p), yaw0_(yaw0), rate_(rate) {}
  double duration() const override { return duration_; }
  Eigen::Vector3d position(double) const override { return p_; }
  Eigen::Vector3d velocity(double) const override { return Eigen::Vector3d::Zero(); }
  Eigen::Vector3d acceleration(double) const override { return Eigen::Vector3d::Zero(); }
  Eigen::Quaterniond orientation(double t) const override {
    return yaw_quat(yaw0_ + rate_ * t);
  }
  Eigen::Vector3d body_rates(double) const override { return {0.0, 0.0, rate_}; }

 private:
  double duration_;
  Eigen::Vector3d p_;
  double yaw0_, rate_;
};

// Axis-aligned rectangle lap: four straight sides, each a rest-to-rest
// quintic, corners (0,0), (L,0), (L,W), (0,W) relative to the start. Attitude
// stays fixed so the camera keeps facing the same wall.
class RectTrajectory : public Trajectory {
 public:
  RectTrajectory(double duration, double static_time, const Eigen::Vector3d& start,
                 double yaw, double length, double width, double lap_time)
      : duration_(duration), static_time_(static_time), start_(start),
        q_(yaw_quat(yaw)), length_(length), width_(width), lap_time_(lap_time) {}

  double duration() const override { return duration_; }

  Eigen::Vector3d position(double t) const override {
    Side s = side_at(t);
    return start_ + s.base + s.dir * (s.len * smooth5(s.tau));
  }
  Eigen::Vector3d velocity(double t) const override {
    Side s = side_at(t);
    return s.dir * (s.len * smooth5_d(s.tau) / side_time());
  }
  Eigen::Vector3d acceleration(double t) const override {
    Side s = side_at(t);
    return s.dir * (s.len * smooth5_dd(s.tau) / (side_time() * side_time()));
  }
  Eigen::Quaterniond orientation(double) const override { return q_; }
  Eigen::Vector3d body_rates(double) const override { return Eigen::Vector3d::Zero(); }

  double lap_length() const { return 2.0 * (length_ + width_); }

 private:
  struct Side {
    Eigen::Vector3d base, dir;
    double len = 0.0, tau = 0.0;
  };
  double side_time() const { return lap_time_ / 4.0; }

  Side side_at(double t) const {
    double u = t - static_time_;
    if (u < 0.0) u = 0.0;
    u = std::fmod(u, lap_time_);
    int k = std::min(3, int(u / side_time()));
    const double tau = std::clamp(u / side_time() - k, 0.0, 1.0);
    const double L = length_, W = width_;
    static const Eigen::Vector3d dirs[4] = {{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}};
    const Eigen::Vector3d bases[4] = {
        {0, 0, 0}, {L, 0, 0}, {L, W, 0}, {0, W, 0}};
    const double lens[4] = {L, W, L, W};
    return {bases[k], dirs[k], lens[k], tau};
  }

  double duration_, static_time_;
  Eigen::Vector3d start_;
  Eigen::Quaterniond q_;
  double length_, width_, lap_time_;
};

// Circle of radius R about a fixed center. The angular rate ramps from zero
// to `rate` over ramp_time with a quintic profile and then stays constant,
// so the steady state is a pure constant-rate turn with centripetal
// acceleration rate^2 * R. With tangent_yaw the body yaws with the angle.
class CircleTrajectory : public Trajectory {
 public:
  CircleTrajectory(double duration, double static_time, const Eigen::Vector3d& center,
                   double radius, double rate, double ramp_time, bool tangent_yaw)
      : duration_(duration), static_time_(static_time), center_(center),
        radius_(radius), rate_(rate), ramp_(ramp_time), tangent_yaw_(tangent_yaw) {}

  double duration() const override { return duration_; }

  Eigen::Vector3d position(double t) const override {
    const double th = theta(t);
    return center_ + radius_ * Eigen::Vector3d(std::cos(th), std::sin(th), 0.0);
  }
  Eigen::Vector3d velocity(double t) const override {
    const double th = theta(t), w = theta_d(t);
    return radius_ * w * Eigen::Vector3d(-std::sin(th), std::cos(th), 0.0);
  }
  Eigen::Vector3d acceleration(double t) const override {
    const double th = theta(t), w = theta_d(t), a = theta_dd(t);
    const Eigen::Vector3d tangent(-std::sin(th), std::cos(th), 0.0);
    const Eigen::Vector3d inward(-std::cos(th), -std::sin(th), 0.0);
    return radius_ * (a * tangent + w * w * inward);
  }
  Eigen::Quaterniond orientation(double t) const override {
    return tangent_yaw_ ? yaw_quat(theta(t)) : Eigen::Quaterniond::Identity();
  }
  Eigen::Vector3d body_rates(double t) const override {
    return tangent_yaw_ ? Eigen::Vector3d(0.0, 0.0, theta_d(t))
                        : Eigen::Vector3d::Zero();
  }

 private:
  double theta(double t) const {
    double u = t - static_time_;
    if (u <= 0.0) return 0.0;
    if (u < ramp_) return rate_ * ramp_ * smooth5_i(u / ramp_);
    return rate_ * ramp_ * smooth5_i(1.0) + rate_ * (u - ramp_);
  }
  double theta_d(double t) const {
    double u = t - static_time_;
    if (u <= 0.0) return 0.0;
    return u < ramp_ ? rate_ * smooth5(u / ramp_) : rate_;
  }
  double theta_dd(double t) const {
    double u = t - static_time_;
    if (u <= 0.0 || u >= ramp_) return 0.0;
    return rate_ * smooth5_d(u / ramp_) / ramp_;
  }

  double duration_, static_time_;
  Eigen::Vector3d center_;
  double radius_, rate_, ramp_;
  bool tangent_yaw_;
};

// Three-axis sinusoidal translation plus small ZYX Euler oscillations, all
// multiplied by a C2 envelope that ramps in over envelope_time, holds at one,
// and ramps out before the end. Starts and ends at rest.
class SwayTrajectory : public Trajectory {
 public:
  SwayTrajectory(double duration, double static_time, const Eigen::Vector3d& start,
                 double yaw0, const Eigen::Vector3d& amp, const Eigen::Vector3d& period,
                 const Eigen::Vector3d& phase, double envelope_time, double yaw_amp,
                 double yaw_period, double pitch_amp, double pitch_period,
                 double roll_amp, double roll_period)
      : duration_(duration), static_time_(static_time), start_(start), yaw0_(yaw0),
        amp_(amp), phase_(phase), env_(envelope_time), yaw_amp_(yaw_amp),
        pitch_amp_(pitch_amp), roll_amp_(roll_amp) {
    for (int i = 0; i < 3; ++i) omega_[i] = 2.0 * kPi / period[i];
    yaw_w_ = 2.0 * kPi / yaw_period;
    pitch_w_ = 2.0 * kPi / pitch_period;
    roll_w_ = 2.0 * kPi / roll_period;
  }

  double duration() const override { return duration_; }

  Eigen::Vector3d position(double t) const override {
    const Env e = envelope(t);
    Eigen::Vector3d p = start_;
    for (int i = 0; i < 3; ++i) p[i] += e.v * sine(i, t).v * amp_[i];
    return p;
  }
  Eigen::Vector3d velocity(double t) const override {
    const Env e = envelope(t);
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) {
      const Osc s = sine(i, t);
      v[i] = amp_[i] * (e.d * s.v + e.v * s.d);
    }
    return v;
  }
  Eigen::Vector3d acceleration(double t) const override {
    const Env e = envelope(t);
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) {
      const Osc s = sine(i, t);
      a[i] = amp_[i] * (e.dd * s.v + 2.0 * e.d * s.d + e.v * s.dd);
    }
    return a;
  }
  Eigen::Quaterniond orientation(double t) const override {
    return zyx_quat(euler(t));
  }
  Eigen::Vector3d body_rates(double t) const override {
    return zyx_body_rates(euler(t));
  }

 private:
  struct Env {
    double v = 0.0, d = 0.0, dd = 0.0;
  };
  struct Osc {
    double v = 0.0, d = 0.0, dd = 0.0;
  };

  Env envelope(double t) const {
    const double u = t - static_time_;
    const double span = duration_ - static_time_;
    if (u <= 0.0 || span <= 0.0) return {};
    if (u < env_) {
      const double x = u / env_;
      return {smooth5(x), smooth5_d(x) / env_, smooth5_dd(x) / (env_ * env_)};
    }
    if (u > span - env_) {
      const double x = (span - u) / env_;
      if (x <= 0.0) return {};
      return {smooth5(x), -smooth5_d(x) / env_, smooth5_dd(x) / (env_ * env_)};
    }
    return {1.0, 0.0, 0.0};
  }

  Osc sine(int i, double t) const {
    const double u = t - static_time_;
    const double a = omega_[i] * u + phase_[i];
    return {std::sin(a), omega_[i] * std::cos(a),
            -omega_[i] * omega_[i] * std::sin(a)};
  }

  EulerZyx euler(double t) const {
    const Env e = envelope(t);
    const double u = std::max(t - static_time_, 0.0);
    EulerZyx out;
    auto osc = [&](double amp, double w, double& ang, double& rate) {
      const double s = std::sin(w * u), c = std::cos(w * u);
      ang = e.v * amp * s;
      rate = amp * (e.d * s + e.v * w * c);
    };
    osc(yaw_amp_, yaw_w_, out.yaw, out.dyaw);
    osc(pitch_amp_, pitch_w_, out.pitch, out.dpitch);
    osc(roll_amp_, roll_w_, out.roll, out.droll);
    out.yaw += yaw0_;
    return out;
  }

  double duration_, static_time_;
  Eigen::Vector3d start_;
  double yaw0_;
  Eigen::Vector3d amp_, omega_, phase_;
  double env_;
  double yaw_amp_, yaw_w_, pitch_amp_, pitch_w_, roll_amp_, roll_w_;
};

Eigen::Vector3d vec3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

}  // namespace

std::unique_ptr<Trajectory> make_trajectory(KeyValueFile& kv) {
  const std::string type = kv.require_string("trajectory.type");
  const double duration = kv.require_double("trajectory.duration");
  const double static_time = kv.get_double("trajectory.static_time", 0.0);
  const Eigen::Vector3d start = vec3(kv.get_doubles("trajectory.start", {0, 0, 0}));
  const double yaw = kv.get_double("trajectory.yaw", 0.0);
  if (duration <= 0.0)
    throw ConfigError("trajectory.duration must be positive");
  if (static_time < 0.0 || static_time >= duration)
    throw ConfigError("trajectory.static_time must lie in [0, duration)");

  if (type == "static") {
    return std::make_unique<StaticTrajectory>(duration, start, yaw);
  }
  if (type == "spin") {
    const double rate = kv.require_double("trajectory.yaw_rate");
    return std::make_unique<SpinTrajectory>(duration, start, yaw, rate);
  }
  if (type == "rect") {
    const double length = kv.require_double("trajectory.length");
    const double width = kv.require_double("trajectory.width");
    const double lap_time = kv.require_double("trajectory.lap_time");
    if (length <= 0.0 || width <= 0.0 || lap_time <= 0.0)
      throw ConfigError("rect trajectory needs positive length, width, lap_time");
    return std::make_unique<RectTrajectory>(duration, static_time, start, yaw,
                                            length, width, lap_time);
  }
  if (type == "circle") {
    const double radius = kv.require_double("trajectory.radius");
    const double rate = kv.require_double("trajectory.yaw_rate");
    const double ramp = kv.get_double("trajectory.ramp_time", 2.0);
    const bool tangent = kv.get_bool("trajectory.tangent_yaw", true);
    if (radius <= 0.0 || ramp <= 0.0)
      throw ConfigError("circle trajectory needs positive radius and ramp_time");
    return std::make_unique<CircleTrajectory>(duration, static_time, start, radius,
                                              rate, ramp, tangent);
  }
  if (type == "sway") {
    const Eigen::Vector3d amp = vec3(kv.get_doubles("trajectory.sway_amp", {0.1, 0.1, 0.05}));
    const Eigen::Vector3d period =
        vec3(kv.get_doubles("trajectory.sway_period", {7.0, 9.0, 11.0}));
    const Eigen::Vector3d phase = vec3(kv.get_doubles("trajectory.sway_phase", {0, 0, 0}));
    const double env = kv.get_double("trajectory.envelope_time", 2.0);
    const double yaw_amp = kv.get_double("trajectory.yaw_amp", 0.0);
    const double yaw_period = kv.get_double("trajectory.yaw_period", 10.0);
    const double pitch_amp = kv.get_double("trajectory.pitch_amp", 0.0);
    const double pitch_period = kv.get_double("trajectory.pitch_period", 10.0);
    const double roll_amp = kv.get_double("trajectory.roll_amp", 0.0);
    const double roll_period = kv.get_double("trajectory.roll_period", 10.0);
    if (period.minCoeff() <= 0.0 || yaw_period <= 0.0 || pitch_period <= 0.0 ||
        roll_period <= 0.0 || env <= 0.0)
      throw ConfigError("sway trajectory periods and envelope_time must be positive");
    return std::make_unique<SwayTrajectory>(duration, static_time, start, yaw, amp,
                                            period, phase, env, yaw_amp, yaw_period,
                                            pitch_amp, pitch_period, roll_amp,
                                            roll_period);
  }
  throw ConfigError("unknown trajectory.type '" + type + "'");
}

// ------------------------------------------------------------------- scene

double AlbedoPattern::sample(double u, double v) const {
  switch (kind) {
    case Kind::kUniform:
      return albedo_a;
    case Kind::kChecker: {
      const long iu = long(std::floor(u / cell));
      const long iv = long(std::floor(v / cell));
      return ((iu + iv) & 1) == 0 ? albedo_a : albedo_b;
    }
    case Kind::kNoise: {
      const double fu = u / cell, fv = v / cell;
      const long iu = long(std::floor(fu)), iv = long(std::floor(fv));
      const double xu = smooth5(fu - double(iu));
      const double xv = smooth5(fv - double(iv));
      auto lattice = [&](long a, long b) {
        return hash_uniform(seed, uint64_t(a), uint64_t(b));
      };
      const double top = lattice(iu, iv) * (1 - xu) + lattice(iu + 1, iv) * xu;
      const double bot =
          lattice(iu, iv + 1) * (1 - xu) + lattice(iu + 1, iv + 1) * xu;
      const double val = top * (1 - xv) + bot * xv;
      return albedo_b + (albedo_a - albedo_b) * val;
    }
  }
  return albedo_a;
}

namespace {

AlbedoPattern parse_albedo(const std::vector<std::string>& tok, size_t& i,
                           const std::string& context) {
  auto need = [&](size_t n) {
    if (i + n > tok.size())
      throw ConfigError(context + ": truncated albedo spec");
  };
  auto num = [&](size_t k) {
    return KeyValueFile::parse_doubles(tok[k], context).at(0);
  };
  need(1);
  const std::string kind = tok[i++];
  AlbedoPattern a;
  if (kind == "uniform") {
    need(1);
    a.kind = AlbedoPattern::Kind::kUniform;
    a.albedo_a = num(i++);
  } else if (kind == "checker" || kind == "noise") {
    need(3);
    a.kind = kind == "checker" ? AlbedoPattern::Kind::kChecker
                               : AlbedoPattern::Kind::kNoise;
    a.albedo_a = num(i++);
    a.albedo_b = num(i++);
    a.cell = num(i++);
    if (a.cell <= 0.0) throw ConfigError(context + ": albedo cell must be positive");
    if (kind == "noise" && i < tok.size() && tok[i].find_first_not_of("0123456789") ==
                                                 std::string::npos) {
      a.seed = uint64_t(std::stoull(tok[i++]));
    }
  } else {
    throw ConfigError(context + ": unknown albedo kind '" + kind + "'");
  }
  return a;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

// Shared token grammar for primitive lines:
//   center X Y Z   size A B [C]   yaw R  pitch R  roll R
//   albedo uniform A | albedo checker A B CELL | albedo noise A B CELL [SEED]
struct PrimSpec {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  std::vector<double> size;
  double yaw = 0.0, pitch = 0.0, roll = 0.0;
  AlbedoPattern albedo;
  bool has_size = false;
};

PrimSpec parse_prim(const std::string& line, const std::string& context) {
  const std::vector<std::string> tok = tokenize(line);
  PrimSpec p;
  size_t i = 0;
  auto num = [&]() {
    if (i >= tok.size()) throw ConfigError(context + ": truncated value list");
    return KeyValueFile::parse_doubles(tok[i++], context).at(0);
  };
  while (i < tok.size()) {
    const std::string word = tok[i++];
    if (word == "center") {
      for (int k = 0; k < 3; ++k) p.center[k] = num();
    } else if (word == "size") {
      p.size.clear();
      // consume as many numbers as follow (2 for rects, 3 for boxes/rooms)
      while (i < tok.size() &&
             tok[i].find_first_not_of("+-.0123456789eE") == std::string::npos) {
        p.size.push_back(num());
      }
      p.has_size = true;
    } else if (word == "yaw") {
      p.yaw = num();
    } else if (word == "pitch") {
      p.pitch = num();
    } else if (word == "roll") {
      p.roll = num();
    } else if (word == "albedo") {
      p.albedo = parse_albedo(tok, i, context);
    } else {
      throw ConfigError(context + ": unknown token '" + word + "'");
    }
  }
  if (!p.has_size) throw ConfigError(context + ": missing 'size'");
  return p;
}

Eigen::Quaterniond zyx(double yaw, double pitch, double roll) {
  return zyx_quat(EulerZyx{yaw, pitch, roll, 0, 0, 0});
}

void add_room(SceneSpec& scene, const PrimSpec& p, const std::string& context) {
  if (p.size.size() != 3) throw ConfigError(context + ": room size needs 3 values");
  const Eigen::Vector3d h = 0.5 * vec3(p.size);
  const Eigen::Vector3d c = p.center;
  struct Wall {
    Eigen::Vector3d center;
    Eigen::Quaterniond q;
    Eigen::Vector2d size;
  };
  const double sx = p.size[0], sy = p.size[1], sz = p.size[2];
  auto rx = [](double a) {
    return Eigen::Quaterniond(Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()));
  };
  auto ry = [](double a) {
    return Eigen::Quaterniond(Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()));
  };
  const Wall walls[6] = {
      {c - Eigen::Vector3d(0, 0, h.z()), Eigen::Quaterniond::Identity(), {sx, sy}},
      {c + Eigen::Vector3d(0, 0, h.z()), rx(kPi), {sx, sy}},
      {c - Eigen::Vector3d(0, h.y(), 0), rx(-kPi / 2), {sx, sz}},
      {c + Eigen::Vector3d(0, h.y(), 0), rx(kPi / 2), {sx, sz}},
      {c - Eigen::Vector3d(h.x(), 0, 0), ry(kPi / 2), {sz, sy}},
      {c + Eigen::Vector3d(h.x(), 0, 0), ry(-kPi / 2), {sz, sy}},
  };
  for (int w = 0; w < 6; ++w) {
    Primitive prim;
    prim.kind = Primitive::Kind::kRect;
    prim.pose = {walls[w].q, walls[w].center};
    prim.size = {walls[w].size.x(), walls[w].size.y(), 0.0};
    prim.albedo = p.albedo;
    prim.albedo.seed = p.albedo.seed + uint64_t(w);  // decorrelate the walls
    scene.primitives.push_back(prim);
  }
}

}  // namespace

SceneSpec scene_from_kv(KeyValueFile& kv) {
  SceneSpec scene;
  scene.ambient = kv.get_double("scene.ambient", 0.3);
  scene.i_dn_sim = kv.get_double("scene.i_dn", 0.0);
  const std::vector<double> coeffs =
      kv.get_doubles("scene.depth_noise_coeffs", {0.0, 0.0, 0.0});
  if (coeffs.size() != 3)
    throw ConfigError("scene.depth_noise_coeffs needs 3 values");
  for (int i = 0; i < 3; ++i) scene.depth_noise_coeffs[size_t(i)] = coeffs[size_t(i)];
  scene.depth_quant = kv.get_double("scene.depth_quant", 0.001);
  if (scene.ambient < 0.0 || scene.i_dn_sim < 0.0 || scene.depth_quant < 0.0)
    throw ConfigError("scene.ambient, scene.i_dn, scene.depth_quant must be >= 0");

  for (const std::string& line : kv.get_repeated("scene.room")) {
    add_room(scene, parse_prim(line, "scene.room"), "scene.room");
  }
  for (const std::string& line : kv.get_repeated("scene.rect")) {
    const PrimSpec p = parse_prim(line, "scene.rect");
    if (p.size.size() != 2) throw ConfigError("scene.rect size needs 2 values");
    Primitive prim;
    prim.kind = Primitive::Kind::kRect;
    prim.pose = {zyx(p.yaw, p.pitch, p.roll), p.center};
    prim.size = {p.size[0], p.size[1], 0.0};
    prim.albedo = p.albedo;
    scene.primitives.push_back(prim);
  }
  for (const std::string& line : kv.get_repeated("scene.box")) {
    const PrimSpec p = parse_prim(line, "scene.box");
    if (p.size.size() != 3) throw ConfigError("scene.box size needs 3 values");
    Primitive prim;
    prim.kind = Primitive::Kind::kBox;
    prim.pose = {zyx(p.yaw, p.pitch, p.roll), p.center};
    prim.size = vec3(p.size);
    prim.albedo = p.albedo;
    scene.primitives.push_back(prim);
  }
  return scene;
}

// ---------------------------------------------------------------- ray casts

namespace {

constexpr double kRayEps = 1e-6;

std::optional<RayHit> intersect_rect(const Primitive& prim, const Eigen::Vector3d& ol,
                                     const Eigen::Vector3d& dl) {
  if (std::abs(dl.z()) < 1e-12) return std::nullopt;
  const double t = -ol.z() / dl.z();
  if (t <= kRayEps) return std::nullopt;
  const double x = ol.x() + t * dl.x();
  const double y = ol.y() + t * dl.y();
  if (std::abs(x) > 0.5 * prim.size.x() || std::abs(y) > 0.5 * prim.size.y())
    return std::nullopt;
  RayHit hit;
  hit.t = t;
  hit.prim = &prim;
  hit.uv = {x + 0.5 * prim.size.x(), y + 0.5 * prim.size.y()};
  return hit;
}

std::optional<RayHit> intersect_box(const Primitive& prim, const Eigen::Vector3d& ol,
                                    const Eigen::Vector3d& dl) {
  const Eigen::Vector3d h = 0.5 * prim.size;
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int axis = -1;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dl[i]) < 1e-12) {
      if (std::abs(ol[i]) > h[i]) return std::nullopt;
      continue;
    }
    double t1 = (-h[i] - ol[i]) / dl[i];
    double t2 = (h[i] - ol[i]) / dl[i];
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > tmin) {
      tmin = t1;
      axis = i;
    }
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return std::nullopt;
  }
  if (axis < 0 || tmin <= kRayEps) return std::nullopt;  // inside or behind
  const Eigen::Vector3d p = ol + tmin * dl;
  const int j = (axis + 1) % 3, k = (axis + 2) % 3;
  RayHit hit;
  hit.t = tmin;
  hit.prim = &prim;
  hit.uv = {p[j] + h[j], p[k] + h[k]};
  return hit;
}

}  // namespace

std::optional<RayHit> intersect_scene(const SceneSpec& scene,
                                      const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& dir) {
  std::optional<RayHit> best;
  for (const Primitive& prim : scene.primitives) {
    const RigidTransform inv = prim.pose.inverse();
    const Eigen::Vector3d ol = inv.q * origin + inv.t;
    const Eigen::Vector3d dl = inv.q * dir;
    std::optional<RayHit> hit = prim.kind == Primitive::Kind::kRect
                                    ? intersect_rect(prim, ol, dl)
                                    : intersect_box(prim, ol, dl);
    if (hit && (!best || hit->t < best->t)) best = hit;
  }
  return best;
}

RegisteredFrame render_frame(const SceneSpec& scene, const RigidTransform& t_world_cam,
                             const PinholeCamera& cam, double d_min, double d_max,
                             uint64_t seed, uint64_t frame_index, const RayTable* rays,
                             double timestamp) {
  RayTable local;
  if (rays == nullptr || rays->width != cam.width || rays->height != cam.height) {
    local = RayTable::build(cam);
    rays = &local;
  }
  RegisteredFrame out;
  out.timestamp = timestamp;
  out.camera = cam;
  out.gray = GrayImage(cam.width, cam.height);
  out.depth = DepthImage(cam.width, cam.height);

  const uint64_t gray_stream = 2 * frame_index;
  const uint64_t depth_stream = 2 * frame_index + 1;
  const Eigen::Vector3d origin = t_world_cam.t;

  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector2f n = rays->at(x, y);
      const Eigen::Vector3d dir_cam =
          Eigen::Vector3d(double(n.x()), double(n.y()), 1.0).normalized();
      const Eigen::Vector3d dir_w = t_world_cam.q * dir_cam;
      const std::optional<RayHit> hit = intersect_scene(scene, origin, dir_w);

      const uint64_t idx = uint64_t(y) * uint64_t(cam.width) + uint64_t(x);
      double intensity = 0.0;
      if (hit) {
        const double albedo = hit->prim->albedo.sample(hit->uv.x(), hit->uv.y());
        intensity = 255.0 * albedo * scene.ambient;
      }
      if (scene.i_dn_sim > 0.0) {
        const double dn = scene.i_dn_sim + (scene.i_dn_sim / 3.0) *
                                               hash_gaussian(seed, gray_stream, idx);
        intensity += std::max(0.0, dn);
      }
      out.gray.at(x, y) =
          uint8_t(std::lround(std::clamp(intensity, 0.0, 255.0)));

      double d = 0.0;
      if (hit) {
        d = hit->t * dir_cam.z();  // camera-frame z of the hit point
        const std::optional<double> sigma = depth_error(d, scene.depth_noise_coeffs);
        if (sigma && *sigma > 0.0) {
          d += *sigma * hash_gaussian(seed, depth_stream, idx);
        }
        if (scene.depth_quant > 0.0) {
          d = std::round(d / scene.depth_quant) * scene.depth_quant;
        }
        if (d < d_min || d > d_max) d = 0.0;
      }
      out.depth.at(x, y) = float(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------- IMU

std::vector<ImuSample> generate_imu(const Trajectory& traj, double rate,
                                    const NoiseParams& noise, bool noisy,
                                    double gravity, Rng& rng,
                                    std::vector<GroundTruthSample>* gt) {
  if (rate <= 0.0) throw ConfigError("IMU rate must be positive");
  const double dt = 1.0 / rate;
  const int n = int(std::floor(traj.duration() * rate + 1e-9)) + 1;
  const Eigen::Vector3d g_w(0.0, 0.0, -gravity);
  const double sigma_f = noise.accel_density * std::sqrt(rate);
  const double sigma_w = noise.gyro_density * std::sqrt(rate);
  const double walk_f = noise.accel_walk * std::sqrt(dt);
  const double walk_w = noise.gyro_walk * std::sqrt(dt);

  Eigen::Vector3d b_f = Eigen::Vector3d::Zero();
  Eigen::Vector3d b_w = Eigen::Vector3d::Zero();
  auto gauss3 = [&]() {
    return Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
  };

  std::vector<ImuSample> out;
  out.reserve(size_t(n));
  if (gt) gt->reserve(size_t(n));
  for (int k = 0; k < n; ++k) {
    const double t = double(k) * dt;
    const Eigen::Quaterniond q = traj.orientation(t).normalized();
    ImuSample s;
    s.timestamp = t;
    s.accel = q.conjugate() * (traj.acceleration(t) - g_w);
    s.gyro = traj.body_rates(t);
    if (noisy) {
      s.accel += b_f + sigma_f * gauss3();
      s.gyro += b_w + sigma_w * gauss3();
      b_f += walk_f * gauss3();
      b_w += walk_w * gauss3();
    }
    out.push_back(s);
    if (gt) {
      GroundTruthSample g;
      g.t = t;
      g.p = traj.position(t);
      g.q = q;
      g.v = traj.velocity(t);
      gt->push_back(g);
    }
  }
  return out;
}

// ------------------------------------------------------------------ driver

SimReport simulate_dataset(KeyValueFile& kv, const std::filesystem::path& out_dir,
                           uint64_t seed) {
  const SceneSpec scene = scene_from_kv(kv);
  const std::unique_ptr<Trajectory> traj = make_trajectory(kv);

  Calibration calib;
  calib.color.width = kv.get_int("camera.width", 640);
  calib.color.height = kv.get_int("camera.height", 480);
  calib.color.fx = kv.get_double("camera.fx", 460.0);
  calib.color.fy = kv.get_double("camera.fy", 460.0);
  calib.color.cx = kv.get_double("camera.cx", (calib.color.width - 1) * 0.5);
  calib.color.cy = kv.get_double("camera.cy", (calib.color.height - 1) * 0.5);
  const std::vector<double> dist = kv.get_doubles("camera.dist", {0, 0, 0, 0});
  if (dist.size() != 4) throw ConfigError("camera.dist needs 4 values");
  for (int i = 0; i < 4; ++i) calib.color.dist[size_t(i)] = dist[size_t(i)];
  calib.depth = calib.color;  // depth is rendered on the color grid
  calib.d_min = kv.get_double("camera.d_min", 0.75);
  calib.d_max = kv.get_double("camera.d_max", 6.0);
  calib.i_dn = kv.get_double("camera.i_dn", scene.i_dn_sim);

  // Default mounting: camera optical axis along body +y, image x along body
  // x, image y along body -z (level flight keeps the image upright).
  std::vector<double> tci = kv.get_doubles(
      "camera.t_cam_imu", {std::sqrt(0.5), std::sqrt(0.5), 0, 0, 0, 0, 0});
  if (tci.size() != 7) throw ConfigError("camera.t_cam_imu needs 7 values");
  calib.extrinsics.t_cam_imu.q =
      Eigen::Quaterniond(tci[0], tci[1], tci[2], tci[3]).normalized();
  calib.extrinsics.t_cam_imu.t = {tci[4], tci[5], tci[6]};
  calib.extrinsics.t_depth_color = RigidTransform::Identity();
  calib.validate();

  const double imu_rate = kv.get_double("sim.imu_rate", 200.0);
  const double frame_rate = kv.get_double("sim.frame_rate", 10.0);
  const bool noisy = kv.get_bool("sim.noisy", true);
  const int dark_frames = kv.get_int("sim.dark_frames", 0);
  if (imu_rate <= 0.0 || frame_rate <= 0.0 || imu_rate < frame_rate)
    throw ConfigError("sim rates must be positive with imu_rate >= frame_rate");
  if (dark_frames < 0) throw ConfigError("sim.dark_frames must be >= 0");
  kv.check_all_consumed();

  Rng rng(Rng::mix(seed ^ 0x53494d31ULL));
  std::vector<GroundTruthSample> gt;
  const std::vector<ImuSample> imu =
      generate_imu(*traj, imu_rate, NoiseParams{}, noisy, 9.81, rng, &gt);

  const RigidTransform t_body_cam = calib.extrinsics.t_cam_imu.inverse();
  const RayTable rays = RayTable::build(calib.color);

  DatasetWriter writer(out_dir, calib);
  const int n_frames = int(std::floor(traj->duration() * frame_rate + 1e-9)) + 1;
  for (int k = 0; k < n_frames; ++k) {
    const double t = double(k) / frame_rate;
    const RigidTransform t_world_body{traj->orientation(t).normalized(),
                                      traj->position(t)};
    const RegisteredFrame frame =
        render_frame(scene, t_world_body * t_body_cam, calib.color, calib.d_min,
                     calib.d_max, seed, uint64_t(k), &rays, t);
    writer.add_frame(frame);
  }
  writer.set_imu(imu);
  std::vector<TrajectorySample> gt_samples;
  gt_samples.reserve(gt.size());
  for (const GroundTruthSample& g : gt) {
    TrajectorySample s;
    s.t = g.t;
    s.p = g.p;
    s.q = g.q;
    s.v = g.v;
    gt_samples.push_back(s);
  }
  writer.set_groundtruth(gt_samples);
  writer.finish();

  // Lens-capped frames for dark-noise calibration: same sensor, no light.
  if (dark_frames > 0) {
    SceneSpec dark = scene;
    dark.ambient = 0.0;
    const std::filesystem::path dark_dir = out_dir / "dark";
    std::filesystem::create_directories(dark_dir);
    for (int k = 0; k < dark_frames; ++k) {
      const RigidTransform t_world_body{traj->orientation(0.0).normalized(),
                                        traj->position(0.0)};
      const RegisteredFrame frame =
          render_frame(dark, t_world_body * t_body_cam, calib.color, calib.d_min,
                       calib.d_max, seed, uint64_t(1000000 + k), &rays, 0.0);
      char name[32];
      std::snprintf(name, sizeof(name), "%06d.pgm", k);
      write_pgm(frame.gray, dark_dir / name);
    }
  }

  SimReport report;
  report.frames = n_frames;
  report.imu_samples = int(imu.size());
  report.dark_frames = dark_frames;
  report.duration = traj->duration();
  report.dataset_dir = out_dir;
  return report;
}

}  // namespace vdio
