#include "vdio/dataset.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "vdio/errors.hpp"

namespace vdio {
namespace {

std::string path_str(const std::filesystem::path& p) { return p.string(); }

void require_strictly_increasing(const std::vector<double>& ts,
                                 const std::string& what) {
  for (size_t i = 1; i < ts.size(); ++i) {
    if (!(ts[i] > ts[i - 1])) {
      throw DataError(what + " timestamps must strictly increase (index " +
                      std::to_string(i) + ")");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- image IO

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path_str(path));
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            std::streamsize(img.data.size()));
  if (!out) throw DataError("short write: " + path_str(path));
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path_str(path));
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError("not a binary PGM: " + path_str(path));
  auto next_int = [&]() {
    // skip whitespace and '#' comment lines between header fields
    while (true) {
      const int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long v = 0;
    in >> v;
    if (!in) throw DataError("bad PGM header: " + path_str(path));
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255)
    throw DataError("unsupported PGM (need 8-bit): " + path_str(path));
  in.get();  // single whitespace after maxval
  GrayImage img{int(w), int(h)};
  in.read(reinterpret_cast<char*>(img.data.data()), std::streamsize(img.data.size()));
  if (in.gcount() != std::streamsize(img.data.size()))
    throw DataError("truncated PGM: " + path_str(path));
  return img;
}

void write_depth_png(const DepthImage& depth, const std::filesystem::path& path) {
  FILE* fp = std::fopen(path_str(path).c_str(), "wb");
  if (!fp) throw DataError("cannot open for writing: " + path_str(path));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("PNG write failed: " + path_str(path));
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(depth.width), png_uint_32(depth.height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(size_t(depth.width) * 2);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const double mm = std::lround(double(depth.at(x, y)) * 1000.0);
      const uint16_t v = uint16_t(std::clamp(mm, 0.0, 65535.0));
      row[size_t(x) * 2] = uint8_t(v >> 8);  // PNG is big-endian
      row[size_t(x) * 2 + 1] = uint8_t(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

DepthImage read_depth_png(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path_str(path).c_str(), "rb");
  if (!fp) throw DataError("cannot open: " + path_str(path));
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("PNG read failed: " + path_str(path));
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth_bits = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth_bits != 16 || color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("depth PNG must be 16-bit grayscale: " + path_str(path));
  }
  DepthImage out{int(w), int(h)};
  std::vector<uint8_t> row(size_t(w) * 2);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      const uint16_t v =
          uint16_t((uint16_t(row[size_t(x) * 2]) << 8) | row[size_t(x) * 2 + 1]);
      out.at(int(x), int(y)) = float(v) / 1000.0f;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

// ------------------------------------------------------------------- CSV IO

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

double parse_num(const std::string& s, const std::filesystem::path& path) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(uint8_t(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad number '" + s + "' in " + path_str(path));
  }
}

// maps header names to column indices
std::map<std::string, size_t> header_index(const std::string& line) {
  std::map<std::string, size_t> idx;
  const std::vector<std::string> names = split_csv(line);
  for (size_t i = 0; i < names.size(); ++i) {
    std::string n = names[i];
    n.erase(0, n.find_first_not_of(" \t\r"));
    n.erase(n.find_last_not_of(" \t\r") + 1);
    idx[n] = i;
  }
  return idx;
}

size_t need_column(const std::map<std::string, size_t>& idx, const std::string& name,
                   const std::filesystem::path& path) {
  const auto it = idx.find(name);
  if (it == idx.end())
    throw DataError("missing column '" + name + "' in " + path_str(path));
  return it->second;
}

}  // namespace

void write_imu_csv(const std::vector<ImuSample>& samples,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path_str(path));
  out << "t,fx,fy,fz,wx,wy,wz\n";
  char buf[256];
  for (const ImuSample& s : samples) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  s.timestamp, s.accel.x(), s.accel.y(), s.accel.z(), s.gyro.x(),
                  s.gyro.y(), s.gyro.z());
    out << buf;
  }
  if (!out) throw DataError("short write: " + path_str(path));
}

std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path_str(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty IMU file: " + path_str(path));
  const auto idx = header_index(line);
  const size_t it = need_column(idx, "t", path);
  const size_t cols[6] = {need_column(idx, "fx", path), need_column(idx, "fy", path),
                          need_column(idx, "fz", path), need_column(idx, "wx", path),
                          need_column(idx, "wy", path), need_column(idx, "wz", path)};
  std::vector<ImuSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() < idx.size()) throw DataError("short IMU row in " + path_str(path));
    ImuSample s;
    s.timestamp = parse_num(f[it], path);
    s.accel = {parse_num(f[cols[0]], path), parse_num(f[cols[1]], path),
               parse_num(f[cols[2]], path)};
    s.gyro = {parse_num(f[cols[3]], path), parse_num(f[cols[4]], path),
              parse_num(f[cols[5]], path)};
    out.push_back(s);
  }
  std::vector<double> ts;
  ts.reserve(out.size());
  for (const ImuSample& s : out) ts.push_back(s.timestamp);
  require_strictly_increasing(ts, "IMU");
  return out;
}

void write_trajectory_csv(const std::vector<TrajectorySample>& samples,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path_str(path));
  out << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz\n";
  char buf[512];
  for (const TrajectorySample& s : samples) {
    std::snprintf(buf, sizeof(buf),
                  "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", s.t,
                  s.p.x(), s.p.y(), s.p.z(), s.q.w(), s.q.x(), s.q.y(), s.q.z(),
                  s.v.x(), s.v.y(), s.v.z());
    out << buf;
  }
  if (!out) throw DataError("short write: " + path_str(path));
}

std::vector<TrajectorySample> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path_str(path));
  std::string line;
  if (!std::getline(in, line))
    throw DataError("empty trajectory file: " + path_str(path));
  const auto idx = header_index(line);
  const size_t it = need_column(idx, "t", path);
  const size_t ip[3] = {need_column(idx, "px", path), need_column(idx, "py", path),
                        need_column(idx, "pz", path)};
  const size_t iq[4] = {need_column(idx, "qw", path), need_column(idx, "qx", path),
                        need_column(idx, "qy", path), need_column(idx, "qz", path)};
  const bool has_v = idx.count("vx") && idx.count("vy") && idx.count("vz");
  std::vector<TrajectorySample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() < idx.size())
      throw DataError("short trajectory row in " + path_str(path));
    TrajectorySample s;
    s.t = parse_num(f[it], path);
    for (int k = 0; k < 3; ++k) s.p[k] = parse_num(f[ip[k]], path);
    s.q = Eigen::Quaterniond(parse_num(f[iq[0]], path), parse_num(f[iq[1]], path),
                             parse_num(f[iq[2]], path), parse_num(f[iq[3]], path));
    if (s.q.norm() < 1e-9)
      throw DataError("zero quaternion in " + path_str(path));
    s.q.normalize();
    if (has_v) {
      s.v = {parse_num(f[idx.at("vx")], path), parse_num(f[idx.at("vy")], path),
             parse_num(f[idx.at("vz")], path)};
    }
    out.push_back(s);
  }
  return out;
}

// ------------------------------------------------------------------ dataset

DatasetWriter::DatasetWriter(const std::filesystem::path& dir,
                             const Calibration& calib, bool depth_registered)
    : dir_(dir), depth_registered_(depth_registered) {
  calib.validate();
  std::filesystem::create_directories(dir_ / "gray");
  std::filesystem::create_directories(dir_ / "depth");
  save_calibration(calib, dir_ / "calib.cfg");
}

void DatasetWriter::add_frame(const RegisteredFrame& frame) {
  if (finished_) throw DataError("DatasetWriter already finished");
  if (!(frame.timestamp > last_t_))
    throw DataError("frame timestamps must strictly increase");
  last_t_ = frame.timestamp;
  const int i = int(frame_lines_.size());
  char gray_name[32], depth_name[32], line[160];
  std::snprintf(gray_name, sizeof(gray_name), "gray/%06d.pgm", i);
  std::snprintf(depth_name, sizeof(depth_name), "depth/%06d.png", i);
  write_pgm(frame.gray, dir_ / gray_name);
  write_depth_png(frame.depth, dir_ / depth_name);
  std::snprintf(line, sizeof(line), "frame %06d %.9g %s %s", i, frame.timestamp,
                gray_name, depth_name);
  frame_lines_.push_back(line);
}

void DatasetWriter::set_imu(const std::vector<ImuSample>& samples) {
  if (finished_) throw DataError("DatasetWriter already finished");
  std::vector<double> ts;
  ts.reserve(samples.size());
  for (const ImuSample& s : samples) ts.push_back(s.timestamp);
  require_strictly_increasing(ts, "IMU");
  write_imu_csv(samples, dir_ / "imu.csv");
}

void DatasetWriter::set_groundtruth(const std::vector<TrajectorySample>& samples) {
  if (finished_) throw DataError("DatasetWriter already finished");
  write_trajectory_csv(samples, dir_ / "groundtruth.csv");
  has_groundtruth_ = true;
}

void DatasetWriter::finish() {
  if (finished_) return;
  if (!std::filesystem::exists(dir_ / "imu.csv"))
    throw DataError("dataset needs IMU data before finish()");
  std::ofstream out(dir_ / "manifest.txt");
  if (!out) throw DataError("cannot write manifest in " + path_str(dir_));
  out << "vdio-dataset 1\n";
  out << "calib calib.cfg\n";
  out << "imu imu.csv\n";
  if (has_groundtruth_) out << "groundtruth groundtruth.csv\n";
  out << "depth_registered " << (depth_registered_ ? 1 : 0) << "\n";
  out << "frame_count " << frame_lines_.size() << "\n";
  for (const std::string& line : frame_lines_) out << line << "\n";
  if (!out) throw DataError("short write: manifest.txt");
  finished_ = true;
}

DatasetReader::DatasetReader(const std::filesystem::path& dir) : dir_(dir) {
  const std::filesystem::path manifest = dir_ / "manifest.txt";
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open: " + path_str(manifest));
  std::string line;
  if (!std::getline(in, line) || line.rfind("vdio-dataset 1", 0) != 0)
    throw DataError("unrecognized dataset manifest: " + path_str(manifest));

  std::filesystem::path calib_path, imu_path, gt_path;
  long declared_count = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "calib") {
      std::string p;
      ls >> p;
      calib_path = dir_ / p;
    } else if (word == "imu") {
      std::string p;
      ls >> p;
      imu_path = dir_ / p;
    } else if (word == "groundtruth") {
      std::string p;
      ls >> p;
      gt_path = dir_ / p;
    } else if (word == "depth_registered") {
      int v = 0;
      ls >> v;
      depth_registered_ = v != 0;
    } else if (word == "frame_count") {
      ls >> declared_count;
    } else if (word == "frame") {
      FrameEntry e;
      std::string index, gray, depth;
      ls >> index >> e.t >> gray >> depth;
      if (!ls) throw DataError("bad frame line in manifest: " + line);
      e.gray = dir_ / gray;
      e.depth = dir_ / depth;
      frames_.push_back(e);
    } else {
      throw DataError("unknown manifest directive '" + word + "'");
    }
  }
  if (calib_path.empty() || imu_path.empty())
    throw DataError("manifest missing calib or imu entries");
  if (declared_count >= 0 && size_t(declared_count) != frames_.size())
    throw DataError("manifest frame_count does not match frame lines");

  calib_ = load_calibration(calib_path);
  imu_ = read_imu_csv(imu_path);
  if (imu_.empty()) throw DataError("dataset has no IMU samples");
  if (!gt_path.empty()) groundtruth_ = read_trajectory_csv(gt_path);

  std::vector<double> ts;
  ts.reserve(frames_.size());
  for (const FrameEntry& e : frames_) ts.push_back(e.t);
  require_strictly_increasing(ts, "frame");
}

double DatasetReader::frame_timestamp(int i) const {
  if (i < 0 || size_t(i) >= frames_.size())
    throw DataError("frame index out of range");
  return frames_[size_t(i)].t;
}

RegisteredFrame DatasetReader::read_frame(int i) const {
  if (i < 0 || size_t(i) >= frames_.size())
    throw DataError("frame index out of range");
  const FrameEntry& e = frames_[size_t(i)];
  RegisteredFrame frame;
  frame.timestamp = e.t;
  frame.camera = calib_.color;
  frame.gray = read_pgm(e.gray);
  if (frame.gray.width != calib_.color.width ||
      frame.gray.height != calib_.color.height)
    throw DataError("gray image size does not match calibration: " +
                    path_str(e.gray));
  DepthImage depth = read_depth_png(e.depth);
  if (depth_registered_) {
    if (!depth.same_size(frame.gray))
      throw DataError("registered depth size mismatch: " + path_str(e.depth));
    // clamp the trusted range exactly like the registration path does
    for (float& d : depth.data) {
      if (d < calib_.d_min || d > calib_.d_max) d = 0.0f;
    }
    frame.depth = std::move(depth);
  } else {
    if (depth.width != calib_.depth.width || depth.height != calib_.depth.height)
      throw DataError("raw depth size does not match calibration: " +
                      path_str(e.depth));
    if (!depth_rays_) depth_rays_ = RayTable::build(calib_.depth);
    frame.depth =
        register_depth_to_color(depth, calib_.extrinsics, calib_.depth, calib_.color,
                                calib_.d_min, calib_.d_max, &*depth_rays_);
  }
  return frame;
}

std::vector<DatasetReader::Event> DatasetReader::events() const {
  std::vector<Event> out;
  out.reserve(imu_.size() + frames_.size());
  size_t i = 0, f = 0;
  while (i < imu_.size() || f < frames_.size()) {
    const bool take_imu =
        f >= frames_.size() ||
        (i < imu_.size() && imu_[i].timestamp <= frames_[f].t);
    if (take_imu) {
      out.push_back({Event::Kind::kImu, imu_[i].timestamp, int(i)});
      ++i;
    } else {
      out.push_back({Event::Kind::kFrame, frames_[f].t, int(f)});
      ++f;
    }
  }
  return out;
}

}  // namespace vdio
