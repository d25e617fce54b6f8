#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "vdio/dataset.hpp"
#include "vdio/descriptor.hpp"
#include "vdio/errors.hpp"
#include "vdio/feature_detection.hpp"
#include "vdio/metrics.hpp"
#include "vdio/pipeline.hpp"
#include "vdio/sim.hpp"

namespace fs = std::filesystem;
using namespace vdio;

namespace {

PipelineConfig load_config(const std::string& path, uint64_t seed_override,
                           bool has_seed) {
  PipelineConfig config;
  if (!path.empty()) config = PipelineConfig::load(path);
  if (has_seed) config.seed = seed_override;
  return config;
}

int cmd_run(const std::string& dataset_dir, const std::string& output_dir,
            const std::string& config_path, uint64_t seed, bool has_seed,
            bool no_tracks) {
  const PipelineConfig config = load_config(config_path, seed, has_seed);
  const DatasetReader dataset(dataset_dir);
  RunOptions options;
  options.output_dir = output_dir;
  options.write_tracks = !no_tracks;
  const RunReport report = run_odometry(dataset, config, options);
  std::printf("frames %d/%d  matches %lld/%lld  compute %.2fs  throughput %.1f Hz\n",
              report.frames_processed, report.frames_total,
              static_cast<long long>(report.matches_accepted),
              static_cast<long long>(report.match_attempts),
              report.compute_seconds, report.throughput_hz);
  if (!report.records.empty()) {
    const FrameRecord& last = report.records.back();
    std::printf("final pose  p [%.3f %.3f %.3f]  q [%.4f %.4f %.4f %.4f]\n",
                last.p.x(), last.p.y(), last.p.z(), last.q.w(), last.q.x(),
                last.q.y(), last.q.z());
  }
  return kExitOk;
}

int cmd_simulate(const std::string& scenario, const std::string& output_dir,
                 uint64_t seed) {
  KeyValueFile kv = KeyValueFile::parse_file(scenario);
  const SimReport report = simulate_dataset(kv, output_dir, seed);
  std::printf("wrote %d frames, %d IMU samples (%.1fs) to %s\n", report.frames,
              report.imu_samples, report.duration,
              report.dataset_dir.string().c_str());
  if (report.dark_frames > 0) {
    std::printf("plus %d dark calibration frames\n", report.dark_frames);
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& estimate_path, const std::string& reference,
                 double rpe_delta) {
  const std::vector<TrajectorySample> est = read_trajectory_csv(estimate_path);
  fs::path ref_path(reference);
  if (fs::is_directory(ref_path)) ref_path /= "groundtruth.csv";
  const std::vector<TrajectorySample> ref = read_trajectory_csv(ref_path);
  const AteResult ate = evaluate_ate(est, ref);
  std::printf("ate_rmse %.6f\nate_mean %.6f\nate_max %.6f\nate_final %.6f\n"
              "pairs %d\n",
              ate.rmse, ate.mean, ate.max, ate.final_error, ate.pairs);
  if (rpe_delta > 0.0) {
    const RpeResult rpe = evaluate_rpe(est, ref, rpe_delta);
    std::printf("rpe_trans_rmse %.6f\nrpe_rot_rmse %.6f\nrpe_delta %.3f\n"
                "rpe_pairs %d\n",
                rpe.trans_rmse, rpe.rot_rmse, rpe.delta, rpe.pairs);
  }
  return kExitOk;
}

int cmd_detect(const std::string& dataset_dir, int frame_index,
               const std::string& config_path, uint64_t seed, bool has_seed) {
  const PipelineConfig config = load_config(config_path, seed, has_seed);
  const DatasetReader dataset(dataset_dir);
  const RegisteredFrame frame = dataset.read_frame(frame_index);
  const ScoreMap visual = compute_visual_score_map(frame.gray, config.detector);
  const ScoreMap depth = compute_depth_score_map(frame.depth, config.detector);
  const ScoreMap combined = combine_score_maps(visual, depth, config.detector);
  const std::vector<Keypoint> kps =
      select_keypoints(combined, visual, depth, frame, config.detector);
  std::printf("# frame %d t %.6f keypoints %zu\n", frame_index, frame.timestamp,
              kps.size());
  std::printf("x,y,score,modality,depth\n");
  for (const Keypoint& kp : kps) {
    const char* mod = kp.modality == KeypointModality::kVisual ? "visual"
                      : kp.modality == KeypointModality::kDepth ? "depth"
                                                                : "multimodal";
    std::printf("%.1f,%.1f,%.6f,%s,%.3f\n", kp.pixel.x(), kp.pixel.y(), kp.score,
                mod, kp.depth);
  }
  return kExitOk;
}

int cmd_calibrate_dark_noise(const std::string& input_dir,
                             const std::string& calib_path,
                             const std::string& output_path) {
  std::vector<fs::path> files;
  if (!fs::is_directory(input_dir))
    throw DataError("not a directory: " + input_dir);
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .pgm frames in " + input_dir);
  std::vector<GrayImage> frames;
  frames.reserve(files.size());
  for (const fs::path& f : files) frames.push_back(read_pgm(f));
  const DarkNoiseModel dn = calibrate_dark_noise(frames);
  std::printf("i_dn %.6f  (from %zu frames)\n", dn.i_dn, frames.size());
  if (!calib_path.empty()) {
    Calibration calib = load_calibration(calib_path);
    calib.i_dn = dn.i_dn;
    const std::string out = output_path.empty() ? calib_path : output_path;
    save_calibration(calib, out);
    std::printf("updated %s\n", out.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual-depth-inertial odometry toolkit"};
  app.require_subcommand(1);

  std::string dataset_dir, output_dir, config_path, scenario, estimate_path,
      reference_path, input_dir, calib_path, calib_out;
  uint64_t seed = 1;
  bool no_tracks = false;
  int frame_index = 0;
  double rpe_delta = 1.0;

  CLI::App* run = app.add_subcommand("run", "replay a dataset through the filter");
  run->add_option("--dataset", dataset_dir, "dataset directory")->required();
  run->add_option("--output", output_dir, "output directory")->required();
  run->add_option("--config", config_path, "pipeline configuration file");
  CLI::Option* run_seed = run->add_option("--seed", seed, "override config seed");
  run->add_flag("--no-tracks", no_tracks, "skip writing tracks.csv");

  CLI::App* sim = app.add_subcommand("simulate", "render a synthetic dataset");
  sim->add_option("--scenario", scenario, "scenario configuration file")->required();
  sim->add_option("--output", output_dir, "dataset directory to create")->required();
  sim->add_option("--seed", seed, "noise seed");

  CLI::App* eval = app.add_subcommand("evaluate", "compare trajectories");
  eval->add_option("--estimate", estimate_path, "estimated trajectory CSV")
      ->required();
  eval->add_option("--reference", reference_path,
                   "reference CSV or dataset directory")
      ->required();
  eval->add_option("--rpe-delta", rpe_delta, "relative error offset, s (0 = skip)");

  CLI::App* detect = app.add_subcommand("detect", "detect keypoints in one frame");
  detect->add_option("--dataset", dataset_dir, "dataset directory")->required();
  detect->add_option("--frame", frame_index, "frame index")->required();
  detect->add_option("--config", config_path, "pipeline configuration file");
  CLI::Option* detect_seed = detect->add_option("--seed", seed, "override seed");

  CLI::App* dark = app.add_subcommand("calibrate-dark-noise",
                                      "estimate the dark-noise intensity offset");
  dark->add_option("--input", input_dir, "directory of lens-capped .pgm frames")
      ->required();
  dark->add_option("--calib", calib_path, "calibration file to update");
  dark->add_option("--output", calib_out, "where to write the updated calibration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(dataset_dir, output_dir, config_path, seed,
                     run_seed->count() > 0, no_tracks);
    }
    if (sim->parsed()) return cmd_simulate(scenario, output_dir, seed);
    if (eval->parsed()) return cmd_evaluate(estimate_path, reference_path, rpe_delta);
    if (detect->parsed()) {
      return cmd_detect(dataset_dir, frame_index, config_path, seed,
                        detect_seed->count() > 0);
    }
    if (dark->parsed()) {
      return cmd_calibrate_dark_noise(input_dir, calib_path, calib_out);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const NumericalFault& e) {
    std::fprintf(stderr, "numerical fault: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
