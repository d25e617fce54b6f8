// Python bindings: dataset IO, feature detection, descriptors, the filter
// pipeline, simulation, and trajectory metrics. Images cross the boundary as
// numpy arrays (gray: uint8 HxW, depth: float32 HxW, meters, 0 = invalid).

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "vdio/calib.hpp"
#include "vdio/dataset.hpp"
#include "vdio/descriptor.hpp"
#include "vdio/feature_detection.hpp"
#include "vdio/metrics.hpp"
#include "vdio/pipeline.hpp"
#include "vdio/sim.hpp"

namespace py = pybind11;
using namespace vdio;

namespace {

// ------------------------------------------------------------- conversions

using GrayArray = py::array_t<uint8_t, py::array::c_style>;
using DepthArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

GrayImage gray_from_numpy(const GrayArray& a) {
  if (a.ndim() != 2) throw py::value_error("gray image must be a 2-D uint8 array");
  GrayImage img(int(a.shape(1)), int(a.shape(0)));
  std::memcpy(img.data.data(), a.data(), img.data.size());
  return img;
}

DepthImage depth_from_numpy(const DepthArray& a) {
  if (a.ndim() != 2) throw py::value_error("depth image must be a 2-D float array");
  DepthImage img(int(a.shape(1)), int(a.shape(0)));
  std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(float));
  return img;
}

template <typename T>
py::array_t<T> image_to_numpy(const Image<T>& img) {
  py::array_t<T> a({img.height, img.width});
  std::memcpy(a.mutable_data(), img.data.data(), img.data.size() * sizeof(T));
  return a;
}

// rows: t, px, py, pz, qw, qx, qy, qz[, vx, vy, vz]
py::array_t<double> trajectory_to_numpy(const std::vector<TrajectorySample>& ts) {
  py::array_t<double> a({py::ssize_t(ts.size()), py::ssize_t(11)});
  auto r = a.mutable_unchecked<2>();
  for (size_t i = 0; i < ts.size(); ++i) {
    const TrajectorySample& s = ts[i];
    r(i, 0) = s.t;
    r(i, 1) = s.p.x();
    r(i, 2) = s.p.y();
    r(i, 3) = s.p.z();
    r(i, 4) = s.q.w();
    r(i, 5) = s.q.x();
    r(i, 6) = s.q.y();
    r(i, 7) = s.q.z();
    r(i, 8) = s.v.x();
    r(i, 9) = s.v.y();
    r(i, 10) = s.v.z();
  }
  return a;
}

std::vector<TrajectorySample> trajectory_from_numpy(
    const DoubleArray& a) {
  if (a.ndim() != 2 || a.shape(1) < 8) {
    throw py::value_error(
        "trajectory must be an (n, 8+) array with columns "
        "t, px, py, pz, qw, qx, qy, qz[, vx, vy, vz]");
  }
  auto r = a.unchecked<2>();
  std::vector<TrajectorySample> out(size_t(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    TrajectorySample& s = out[size_t(i)];
    s.t = r(i, 0);
    s.p = Eigen::Vector3d(r(i, 1), r(i, 2), r(i, 3));
    s.q = Eigen::Quaterniond(r(i, 4), r(i, 5), r(i, 6), r(i, 7)).normalized();
    if (a.shape(1) >= 11) s.v = Eigen::Vector3d(r(i, 8), r(i, 9), r(i, 10));
  }
  return out;
}

py::array_t<double> keypoints_to_numpy(const std::vector<Keypoint>& kps) {
  // columns: x, y, score, modality (0 visual / 1 depth / 2 multimodal), depth
  py::array_t<double> a({py::ssize_t(kps.size()), py::ssize_t(5)});
  auto r = a.mutable_unchecked<2>();
  for (size_t i = 0; i < kps.size(); ++i) {
    r(i, 0) = kps[i].pixel.x();
    r(i, 1) = kps[i].pixel.y();
    r(i, 2) = kps[i].score;
    r(i, 3) = double(int(kps[i].modality));
    r(i, 4) = kps[i].depth;
  }
  return a;
}

PipelineConfig config_from_text(const std::string& text) {
  KeyValueFile kv = KeyValueFile::parse_string(text, "<config>");
  PipelineConfig c = PipelineConfig::from_kv(kv);
  kv.check_all_consumed();
  return c;
}

py::dict camera_to_dict(const PinholeCamera& c) {
  py::dict d;
  d["fx"] = c.fx;
  d["fy"] = c.fy;
  d["cx"] = c.cx;
  d["cy"] = c.cy;
  d["width"] = c.width;
  d["height"] = c.height;
  d["dist"] = c.dist;
  return d;
}

py::dict report_to_dict(const RunReport& rep) {
  py::dict d;
  d["frames_total"] = rep.frames_total;
  d["frames_processed"] = rep.frames_processed;
  d["imu_samples"] = rep.imu_samples;
  d["landmarks_created"] = rep.landmarks_created;
  d["match_attempts"] = rep.match_attempts;
  d["matches_accepted"] = rep.matches_accepted;
  d["duration"] = rep.duration;
  d["compute_seconds"] = rep.compute_seconds;
  d["throughput_hz"] = rep.throughput_hz;
  d["config"] = rep.config_echo;
  return d;
}

// ------------------------------------------------------------ Pipeline glue

// Owns the calibration so the C++ pipeline can reference it safely.
class PyPipeline {
 public:
  PyPipeline(const std::string& calib_path, const std::string& config_text)
      : calib_(load_calibration(calib_path)),
        pipeline_(config_from_text(config_text), calib_) {}

  void process_imu(double t, const Eigen::Vector3d& accel,
                   const Eigen::Vector3d& gyro) {
    pipeline_.process_imu(ImuSample{t, accel, gyro});
  }

  std::optional<py::dict> process_frame(
      double t, const GrayArray& gray,
      const py::array_t<float, py::array::c_style>& depth, int frame_index) {
    RegisteredFrame frame;
    frame.timestamp = t;
    frame.gray = gray_from_numpy(gray);
    frame.depth = depth_from_numpy(depth);
    frame.camera = calib_.color;
    FrameRecord rec;
    if (!pipeline_.process_frame(frame, frame_index, &rec)) return std::nullopt;
    py::dict d;
    d["t"] = rec.t;
    d["p"] = rec.p;
    d["q"] = Eigen::Vector4d(rec.q.w(), rec.q.x(), rec.q.y(), rec.q.z());
    d["v"] = rec.v;
    d["num_landmarks"] = rec.num_landmarks;
    d["matched"] = rec.matched;
    d["added"] = rec.added;
    d["dropped"] = rec.dropped;
    return d;
  }

  bool initialized() const { return pipeline_.initialized(); }
  int num_landmarks() const { return int(pipeline_.landmarks().size()); }

 private:
  Calibration calib_;
  OdometryPipeline pipeline_;
};

}  // namespace

PYBIND11_MODULE(_vdio, m) {
  m.doc() = "Visual-depth-inertial odometry core";

  // ----------------------------------------------------------------- dataset
  py::class_<DatasetReader>(m, "DatasetReader")
      .def(py::init<const std::filesystem::path&>(), py::arg("dir"))
      .def_property_readonly("frame_count", &DatasetReader::frame_count)
      .def_property_readonly("has_groundtruth", &DatasetReader::has_groundtruth)
      .def("frame_timestamp", &DatasetReader::frame_timestamp, py::arg("i"))
      .def(
          "read_frame",
          [](const DatasetReader& r, int i) {
            const RegisteredFrame f = r.read_frame(i);
            return py::make_tuple(f.timestamp, image_to_numpy(f.gray),
                                  image_to_numpy(f.depth));
          },
          py::arg("i"), "Returns (timestamp, gray uint8 HxW, depth float32 HxW).")
      .def("imu",
           [](const DatasetReader& r) {
             const auto& samples = r.imu();
             py::array_t<double> a({py::ssize_t(samples.size()), py::ssize_t(7)});
             auto w = a.mutable_unchecked<2>();
             for (size_t i = 0; i < samples.size(); ++i) {
               w(i, 0) = samples[i].timestamp;
               for (int k = 0; k < 3; ++k) {
                 w(i, 1 + k) = samples[i].accel[k];
                 w(i, 4 + k) = samples[i].gyro[k];
               }
             }
             return a;
           })
      .def("groundtruth",
           [](const DatasetReader& r) { return trajectory_to_numpy(r.groundtruth()); })
      .def("camera",
           [](const DatasetReader& r) { return camera_to_dict(r.calib().color); });

  // ---------------------------------------------------------------- detection
  m.def(
      "detect_keypoints",
      [](const GrayArray& gray,
         const std::optional<DepthArray>& depth,
         double lambda_, double gamma, double s_sat, int n_target) {
        DetectorParams params;
        params.lambda = lambda_;
        params.gamma = gamma;
        params.s_sat = s_sat;
        params.n_target = n_target;
        RegisteredFrame frame;
        frame.gray = gray_from_numpy(gray);
        if (depth) frame.depth = depth_from_numpy(*depth);
        const ScoreMap v = compute_visual_score_map(frame.gray, params);
        ScoreMap d;
        d.kind = ScoreKind::kDepth;
        d.map = FloatImage(frame.gray.width, frame.gray.height, 0.0f);
        if (!frame.depth.empty()) d = compute_depth_score_map(frame.depth, params);
        const ScoreMap c = combine_score_maps(v, d, params);
        const auto kps = select_keypoints(c, v, d, frame, params);
        py::dict out;
        out["keypoints"] = keypoints_to_numpy(kps);
        out["visual_map"] = image_to_numpy(v.map);
        out["depth_map"] = image_to_numpy(d.map);
        out["combined_map"] = image_to_numpy(c.map);
        return out;
      },
      py::arg("gray"), py::arg("depth") = std::nullopt, py::arg("lam") = 1e-4,
      py::arg("gamma") = 0.5, py::arg("s_sat") = 0.9, py::arg("n_target") = 25,
      "Multimodal keypoint detection. Returns a dict with 'keypoints' (n x 5: "
      "x, y, score, modality, depth) and the three score maps.");

  // --------------------------------------------------------------- descriptor
  m.def(
      "extract_descriptors",
      [](const GrayArray& gray, const DoubleArray& keypoints,
         const std::optional<DepthArray>& depth, double fx, double fy, double cx,
         double cy, double i_dn) {
        if (keypoints.ndim() != 2 || keypoints.shape(1) < 5) {
          throw py::value_error("keypoints must be (n, 5): x, y, score, modality, depth");
        }
        RegisteredFrame frame;
        frame.gray = gray_from_numpy(gray);
        if (depth) frame.depth = depth_from_numpy(*depth);
        frame.camera.width = frame.gray.width;
        frame.camera.height = frame.gray.height;
        frame.camera.fx = fx > 0 ? fx : frame.gray.width * 0.8;
        frame.camera.fy = fy > 0 ? fy : frame.gray.width * 0.8;
        frame.camera.cx = cx >= 0 ? cx : (frame.gray.width - 1) * 0.5;
        frame.camera.cy = cy >= 0 ? cy : (frame.gray.height - 1) * 0.5;

        const DescriptorParams params;
        DescriptorExtractor ex(SamplingPattern::generate(params.pattern_seed),
                               DarkNoiseModel{i_dn}, params);
        ex.set_frame(frame);

        auto r = keypoints.unchecked<2>();
        const py::ssize_t n = keypoints.shape(0);
        py::array_t<uint64_t> words({n, py::ssize_t(4)});
        auto ww = words.mutable_unchecked<2>();
        py::array_t<bool> valid(n);
        auto wv = valid.mutable_unchecked<1>();
        for (py::ssize_t i = 0; i < n; ++i) {
          Keypoint kp;
          kp.pixel = Eigen::Vector2d(r(i, 0), r(i, 1));
          kp.score = r(i, 2);
          kp.modality = KeypointModality(int(r(i, 3)));
          kp.depth = r(i, 4);
          const auto desc = ex.extract(kp);
          wv(i) = desc.has_value();
          for (int k = 0; k < 4; ++k) ww(i, k) = desc ? desc->words[size_t(k)] : 0;
        }
        py::dict out;
        out["words"] = words;
        out["valid"] = valid;
        return out;
      },
      py::arg("gray"), py::arg("keypoints"), py::arg("depth") = std::nullopt,
      py::arg("fx") = -1.0, py::arg("fy") = -1.0, py::arg("cx") = -1.0,
      py::arg("cy") = -1.0, py::arg("i_dn") = 0.0,
      "256-bit multimodal descriptors for keypoint rows (x, y, score, modality, "
      "depth). Returns dict with 'words' (n x 4 uint64) and 'valid' (n bool).");

  m.def(
      "hamming_distance",
      [](const py::array_t<uint64_t, py::array::c_style>& a,
         const py::array_t<uint64_t, py::array::c_style>& b) {
        if (a.ndim() != 1 || a.shape(0) != 4 || b.ndim() != 1 || b.shape(0) != 4) {
          throw py::value_error("descriptors are 4-element uint64 arrays");
        }
        MultimodalDescriptor da, db;
        for (int k = 0; k < 4; ++k) {
          da.words[size_t(k)] = a.at(k);
          db.words[size_t(k)] = b.at(k);
        }
        return hamming_distance(da, db);
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "calibrate_dark_noise",
      [](const std::vector<GrayArray>& frames) {
        std::vector<GrayImage> imgs;
        imgs.reserve(frames.size());
        for (const auto& f : frames) imgs.push_back(gray_from_numpy(f));
        return calibrate_dark_noise(imgs).i_dn;
      },
      py::arg("frames"), "Mean gray level of lens-capped frames (the I_DN offset).");

  // ----------------------------------------------------------------- pipeline
  py::class_<PyPipeline>(m, "Pipeline")
      .def(py::init<const std::string&, const std::string&>(), py::arg("calib_path"),
           py::arg("config_text") = std::string(),
           "Streaming odometry: feed process_imu / process_frame in time order.")
      .def("process_imu", &PyPipeline::process_imu, py::arg("t"), py::arg("accel"),
           py::arg("gyro"))
      .def("process_frame", &PyPipeline::process_frame, py::arg("t"), py::arg("gray"),
           py::arg("depth"), py::arg("frame_index"),
           "Returns a pose dict once the filter is initialized, else None.")
      .def_property_readonly("initialized", &PyPipeline::initialized)
      .def_property_readonly("num_landmarks", &PyPipeline::num_landmarks);

  m.def(
      "run_odometry",
      [](const std::filesystem::path& dataset_dir, const std::string& config_text,
         const std::filesystem::path& output_dir) {
        const DatasetReader reader(dataset_dir);
        const PipelineConfig config = config_from_text(config_text);
        RunOptions options;
        options.output_dir = output_dir;
        options.keep_records = true;
        const RunReport rep = run_odometry(reader, config, options);
        std::vector<TrajectorySample> est;
        est.reserve(rep.records.size());
        for (const FrameRecord& rec : rep.records) {
          TrajectorySample s;
          s.t = rec.t;
          s.p = rec.p;
          s.q = rec.q;
          s.v = rec.v;
          est.push_back(s);
        }
        py::dict d = report_to_dict(rep);
        d["trajectory"] = trajectory_to_numpy(est);
        return d;
      },
      py::arg("dataset_dir"), py::arg("config_text") = std::string(),
      py::arg("output_dir") = std::filesystem::path(),
      "Plays a dataset through the filter. Returns the run report plus the "
      "estimated trajectory; writes CSV outputs when output_dir is given.");

  // --------------------------------------------------------------- simulation
  m.def(
      "simulate_dataset",
      [](const std::string& scenario_text, const std::filesystem::path& out_dir,
         uint64_t seed) {
        KeyValueFile kv = KeyValueFile::parse_string(scenario_text, "<scenario>");
        const SimReport rep = simulate_dataset(kv, out_dir, seed);
        py::dict d;
        d["frames"] = rep.frames;
        d["imu_samples"] = rep.imu_samples;
        d["dark_frames"] = rep.dark_frames;
        d["duration"] = rep.duration;
        d["dataset_dir"] = rep.dataset_dir;
        return d;
      },
      py::arg("scenario_text"), py::arg("out_dir"), py::arg("seed") = 1,
      "Renders a synthetic dataset from scenario text (scene.*, trajectory.*, "
      "sim.*, camera.* keys) into out_dir.");

  // ------------------------------------------------------------------ metrics
  m.def(
      "evaluate_ate",
      [](const DoubleArray& estimate,
         const DoubleArray& reference, double max_dt) {
        const AteResult res = evaluate_ate(trajectory_from_numpy(estimate),
                                           trajectory_from_numpy(reference), max_dt);
        py::dict d;
        d["rmse"] = res.rmse;
        d["mean"] = res.mean;
        d["max"] = res.max;
        d["final_error"] = res.final_error;
        d["pairs"] = res.pairs;
        return d;
      },
      py::arg("estimate"), py::arg("reference"), py::arg("max_dt") = 0.005,
      "Rigid-aligned absolute trajectory error between (n, 8+) trajectory "
      "arrays (t, px, py, pz, qw, qx, qy, qz, ...).");

  m.def("read_trajectory_csv",
        [](const std::filesystem::path& path) {
          return trajectory_to_numpy(read_trajectory_csv(path));
        },
        py::arg("path"));

  m.attr("__version__") = "0.1.0";
}
