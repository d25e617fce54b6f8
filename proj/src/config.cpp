#include "vdio/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vdio {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path.string());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text,
                                        const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got: " + line);
    }
    Entry e;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    kv.entries_.push_back(std::move(e));
  }
  return kv;
}

bool KeyValueFile::has(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.key == key) return true;
  return false;
}

const std::string* KeyValueFile::find(const std::string& key) {
  const std::string* last = nullptr;
  for (auto& e : entries_) {
    if (e.key == key) {
      e.consumed = true;
      last = &e.value;
    }
  }
  return last;
}

std::string KeyValueFile::get_string(const std::string& key,
                                     const std::string& fallback) {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

std::string KeyValueFile::require_string(const std::string& key) {
  const std::string* v = find(key);
  if (!v) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return *v;
}

double KeyValueFile::to_double(const std::string& key, const std::string& value) const {
  try {
    size_t pos = 0;
    const double d = std::stod(value, &pos);
    if (trim(value.substr(pos)).empty()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(origin_ + ": key '" + key + "': not a number: '" + value + "'");
}

double KeyValueFile::get_double(const std::string& key, double fallback) {
  const std::string* v = find(key);
  return v ? to_double(key, *v) : fallback;
}

double KeyValueFile::require_double(const std::string& key) {
  return to_double(key, require_string(key));
}

int KeyValueFile::get_int(const std::string& key, int fallback) {
  const double d = get_double(key, double(fallback));
  const int i = int(d);
  if (double(i) != d)
    throw ConfigError(origin_ + ": key '" + key + "': expected an integer");
  return i;
}

uint64_t KeyValueFile::get_u64(const std::string& key, uint64_t fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  uint64_t out = 0;
  const std::string s = trim(*v);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(origin_ + ": key '" + key + "': expected an unsigned integer");
  return out;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "off") return false;
  throw ConfigError(origin_ + ": key '" + key + "': expected a boolean, got '" + *v +
                    "'");
}

std::vector<double> KeyValueFile::parse_doubles(const std::string& text,
                                                const std::string& context) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    try {
      size_t pos = 0;
      const double d = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      out.push_back(d);
    } catch (const std::exception&) {
      throw ConfigError(context + ": not a number: '" + tok + "'");
    }
  }
  return out;
}

std::vector<double> KeyValueFile::get_doubles(const std::string& key,
                                              const std::vector<double>& fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  return parse_doubles(*v, origin_ + ": key '" + key + "'");
}

std::vector<double> KeyValueFile::require_doubles(const std::string& key,
                                                  size_t count) {
  const auto vals =
      parse_doubles(require_string(key), origin_ + ": key '" + key + "'");
  if (vals.size() != count) {
    throw ConfigError(origin_ + ": key '" + key + "': expected " +
                      std::to_string(count) + " numbers, got " +
                      std::to_string(vals.size()));
  }
  return vals;
}

std::vector<std::string> KeyValueFile::get_repeated(const std::string& key) {
  std::vector<std::string> out;
  for (auto& e : entries_) {
    if (e.key == key) {
      e.consumed = true;
      out.push_back(e.value);
    }
  }
  return out;
}

void KeyValueFile::check_all_consumed() const {
  for (const auto& e : entries_) {
    if (!e.consumed) {
      throw ConfigError(origin_ + ":" + std::to_string(e.line) +
                        ": unknown key '" + e.key + "'");
    }
  }
}

// -------------------------------------------------------------- PipelineConfig

PipelineConfig PipelineConfig::from_kv(KeyValueFile& kv) {
  PipelineConfig c;
  auto& d = c.detector;
  d.lambda = kv.get_double("detector.lambda", d.lambda);
  d.gamma = kv.get_double("detector.gamma", d.gamma);
  d.s_sat = kv.get_double("detector.s_sat", d.s_sat);
  d.n_target = kv.get_int("detector.n_target", d.n_target);
  d.r_min = kv.get_double("detector.r_min", d.r_min);
  d.r_max = kv.get_double("detector.r_max", d.r_max);
  {
    const auto v = kv.get_doubles(
        "detector.depth_error_coeffs",
        {d.depth_error_coeffs[0], d.depth_error_coeffs[1], d.depth_error_coeffs[2]});
    if (v.size() != 3)
      throw ConfigError("detector.depth_error_coeffs: expected 3 numbers");
    d.depth_error_coeffs = {v[0], v[1], v[2]};
  }
  if (d.gamma < 0.0 || d.gamma > 1.0)
    throw ConfigError("detector.gamma must lie in [0, 1]");
  if (d.s_sat <= 0.0) throw ConfigError("detector.s_sat must be positive");
  if (d.r_min <= 0.0 || d.r_max < d.r_min)
    throw ConfigError("detector radius schedule requires 0 < r_min <= r_max");

  auto& ds = c.descriptor;
  ds.tau = kv.get_double("descriptor.tau", ds.tau);
  ds.normal_cos_max = kv.get_double("descriptor.normal_cos_max", ds.normal_cos_max);
  ds.pattern_seed = kv.get_u64("descriptor.pattern_seed", ds.pattern_seed);

  auto& t = c.tracking;
  t.h_max = kv.get_int("tracking.h_max", t.h_max);
  t.margin = kv.get_int("tracking.margin", t.margin);
  t.margin_enabled = kv.get_bool("tracking.margin_enabled", t.margin_enabled);
  t.w_min = kv.get_double("tracking.w_min", t.w_min);
  t.w_max = kv.get_double("tracking.w_max", t.w_max);
  t.miss_max = kv.get_int("tracking.miss_max", t.miss_max);
  t.j_max = kv.get_int("tracking.j_max", t.j_max);
  if (t.j_max < 1) throw ConfigError("tracking.j_max must be at least 1");
  if (t.w_min <= 0.0 || t.w_max < t.w_min)
    throw ConfigError("tracking window clamp requires 0 < w_min <= w_max");

  auto& n = c.noise;
  n.accel_density = kv.get_double("noise.accel_density", n.accel_density);
  n.gyro_density = kv.get_double("noise.gyro_density", n.gyro_density);
  n.accel_walk = kv.get_double("noise.accel_walk", n.accel_walk);
  n.gyro_walk = kv.get_double("noise.gyro_walk", n.gyro_walk);
  n.sigma_px = kv.get_double("noise.sigma_px", n.sigma_px);
  n.bearing_process = kv.get_double("noise.bearing_process", n.bearing_process);
  n.rho_process = kv.get_double("noise.rho_process", n.rho_process);
  n.pos_process = kv.get_double("noise.pos_process", n.pos_process);
  if (n.sigma_px <= 0.0) throw ConfigError("noise.sigma_px must be positive");

  auto& f = c.filter;
  f.dt_max = kv.get_double("filter.dt_max", f.dt_max);
  f.rho_default = kv.get_double("filter.rho_default", f.rho_default);
  f.sigma_rho0 = kv.get_double("filter.sigma_rho0", f.sigma_rho0);
  f.d_max_track = kv.get_double("filter.d_max_track", f.d_max_track);
  f.gravity = kv.get_double("filter.gravity", f.gravity);
  f.init_static_time = kv.get_double("filter.init_static_time", f.init_static_time);
  f.depth_as_update = kv.get_bool("filter.depth_as_update", f.depth_as_update);
  f.sigma_r0 = kv.get_double("filter.sigma_r0", f.sigma_r0);
  f.sigma_theta0 = kv.get_double("filter.sigma_theta0", f.sigma_theta0);
  f.sigma_v0 = kv.get_double("filter.sigma_v0", f.sigma_v0);
  f.sigma_bf0 = kv.get_double("filter.sigma_bf0", f.sigma_bf0);
  f.sigma_bw0 = kv.get_double("filter.sigma_bw0", f.sigma_bw0);
  if (f.dt_max <= 0.0) throw ConfigError("filter.dt_max must be positive");

  c.seed = kv.get_u64("seed", c.seed);
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  PipelineConfig c = from_kv(kv);
  kv.check_all_consumed();
  return c;
}

std::string PipelineConfig::describe() const {
  char buf[256];
  std::string s;
  auto add = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.9g\n", key, v);
    s += buf;
  };
  std::snprintf(buf, sizeof(buf), "seed = %llu\n", (unsigned long long)seed);
  s += buf;
  add("detector.lambda", detector.lambda);
  add("detector.gamma", detector.gamma);
  add("detector.s_sat", detector.s_sat);
  add("detector.n_target", detector.n_target);
  add("detector.r_min", detector.r_min);
  add("detector.r_max", detector.r_max);
  std::snprintf(buf, sizeof(buf), "detector.depth_error_coeffs = %.9g %.9g %.9g\n",
                detector.depth_error_coeffs[0], detector.depth_error_coeffs[1],
                detector.depth_error_coeffs[2]);
  s += buf;
  add("descriptor.tau", descriptor.tau);
  add("descriptor.normal_cos_max", descriptor.normal_cos_max);
  std::snprintf(buf, sizeof(buf), "descriptor.pattern_seed = %llu\n",
                (unsigned long long)descriptor.pattern_seed);
  s += buf;
  add("tracking.h_max", tracking.h_max);
  add("tracking.margin", tracking.margin);
  std::snprintf(buf, sizeof(buf), "tracking.margin_enabled = %s\n",
                tracking.margin_enabled ? "true" : "false");
  s += buf;
  add("tracking.w_min", tracking.w_min);
  add("tracking.w_max", tracking.w_max);
  add("tracking.miss_max", tracking.miss_max);
  add("tracking.j_max", tracking.j_max);
  add("noise.accel_density", noise.accel_density);
  add("noise.gyro_density", noise.gyro_density);
  add("noise.accel_walk", noise.accel_walk);
  add("noise.gyro_walk", noise.gyro_walk);
  add("noise.sigma_px", noise.sigma_px);
  add("noise.bearing_process", noise.bearing_process);
  add("noise.rho_process", noise.rho_process);
  add("noise.pos_process", noise.pos_process);
  add("filter.dt_max", filter.dt_max);
  add("filter.rho_default", filter.rho_default);
  add("filter.sigma_rho0", filter.sigma_rho0);
  add("filter.d_max_track", filter.d_max_track);
  add("filter.gravity", filter.gravity);
  add("filter.init_static_time", filter.init_static_time);
  std::snprintf(buf, sizeof(buf), "filter.depth_as_update = %s\n",
                filter.depth_as_update ? "true" : "false");
  s += buf;
  add("filter.sigma_r0", filter.sigma_r0);
  add("filter.sigma_theta0", filter.sigma_theta0);
  add("filter.sigma_v0", filter.sigma_v0);
  add("filter.sigma_bf0", filter.sigma_bf0);
  add("filter.sigma_bw0", filter.sigma_bw0);
  return s;
}

}  // namespace vdio
