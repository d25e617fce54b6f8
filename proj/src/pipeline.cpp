#include "vdio/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "vdio/feature_detection.hpp"
#include "vdio/metrics.hpp"

namespace vdio {

FilterState initial_state_from_imu(const std::vector<ImuSample>& buffer) {
  if (buffer.empty()) throw DataError("cannot initialize from an empty IMU buffer");
  Eigen::Vector3d mean_f = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_w = Eigen::Vector3d::Zero();
  for (const ImuSample& s : buffer) {
    mean_f += s.accel;
    mean_w += s.gyro;
  }
  mean_f /= double(buffer.size());
  mean_w /= double(buffer.size());
  if (mean_f.norm() < 1e-6)
    throw DataError("static accelerometer mean is zero; cannot find gravity");

  FilterState x0;
  // At rest the specific force points opposite gravity, i.e. world +z. The
  // shortest-arc rotation taking the measured mean there fixes roll and
  // pitch; yaw is unobservable and stays zero.
  x0.q = Eigen::Quaterniond::FromTwoVectors(mean_f, Eigen::Vector3d::UnitZ());
  x0.b_w = mean_w;
  return x0;
}

OdometryPipeline::OdometryPipeline(const PipelineConfig& config,
                                   const Calibration& calib)
    : config_(config), calib_(calib),
      ekf_(config.noise, config.filter, calib.extrinsics.t_cam_imu, calib.d_min,
           calib.d_max, config.tracking.j_max, config.detector.depth_error_coeffs),
      pattern_(SamplingPattern::generate(config.descriptor.pattern_seed)),
      extractor_(pattern_, DarkNoiseModel{calib.i_dn}, config.descriptor),
      rays_(RayTable::build(calib.color)) {
  calib_.validate();
}

void OdometryPipeline::process_imu(const ImuSample& sample) {
  if (!ekf_.initialized()) {
    if (!init_buffer_.empty() &&
        !(sample.timestamp > init_buffer_.back().timestamp)) {
      throw DataError("IMU timestamps must strictly increase");
    }
    init_buffer_.push_back(sample);
    const double span = sample.timestamp - init_buffer_.front().timestamp;
    if (span + 1e-12 >= config_.filter.init_static_time) {
      ekf_.initialize(initial_state_from_imu(init_buffer_));
      last_imu_t_ = sample.timestamp;
      init_buffer_.clear();
    }
    return;
  }
  const double dt = sample.timestamp - last_imu_t_;
  ekf_.propagate(sample, dt);
  last_imu_t_ = sample.timestamp;
}

bool OdometryPipeline::process_frame(const RegisteredFrame& frame, int frame_index,
                                     FrameRecord* record,
                                     std::vector<TrackRecord>* tracks) {
  if (!ekf_.initialized()) return false;

  // Detection and description run on every frame.
  const ScoreMap visual = compute_visual_score_map(frame.gray, config_.detector);
  const ScoreMap depth_map = compute_depth_score_map(frame.depth, config_.detector);
  const ScoreMap combined = combine_score_maps(visual, depth_map, config_.detector);
  const std::vector<Keypoint> keypoints =
      select_keypoints(combined, visual, depth_map, frame, config_.detector);

  extractor_.set_frame(frame, &rays_);
  std::vector<std::optional<MultimodalDescriptor>> descriptors;
  descriptors.reserve(keypoints.size());
  for (const Keypoint& kp : keypoints) descriptors.push_back(extractor_.extract(kp));

  // Predict, window, match.
  const int n = ekf_.state().num_landmarks();
  auto landmark_pixels = std::vector<std::optional<Eigen::Vector2d>>(size_t(n));
  std::vector<bool> matched(size_t(n), false);
  std::vector<bool> keypoint_used(keypoints.size(), false);
  std::vector<PixelMeasurement> measurements;
  int in_view = 0;
  for (int j = 0; j < n; ++j) {
    const std::optional<PixelPrediction> pred =
        predict_landmark_pixel(ekf_, j, calib_.color);
    TrackRecord tr;
    tr.frame_index = frame_index;
    tr.landmark_id = landmarks_[size_t(j)].id;
    tr.slot = j;
    if (!pred) {
      if (tracks) tracks->push_back(tr);
      continue;
    }
    ++in_view;
    const SearchWindow window = make_search_window(*pred, config_.tracking);
    tr.in_view = true;
    tr.predicted = pred->pixel;
    tr.half_extent = window.half_extent;
    const std::optional<MatchResult> match = match_landmark(
        landmarks_[size_t(j)], window, keypoints, descriptors, config_.tracking);
    if (match) {
      matched[size_t(j)] = true;
      keypoint_used[size_t(match->keypoint)] = true;
      landmark_pixels[size_t(j)] = match->pixel;
      PixelMeasurement m;
      m.landmark = j;
      m.pixel = match->pixel;
      m.depth = keypoints[size_t(match->keypoint)].depth;
      measurements.push_back(m);
      tr.matched = true;
      tr.measured = match->pixel;
      tr.hamming = match->distance;
    } else {
      landmark_pixels[size_t(j)] = pred->pixel;
    }
    if (tracks) tracks->push_back(tr);
  }

  const UpdateStats stats = ekf_.update(measurements, calib_.color);

  // Miss counts include this frame's outcome before the lifecycle pass.
  for (int j = 0; j < n; ++j) {
    if (matched[size_t(j)]) {
      landmarks_[size_t(j)].miss_count = 0;
      landmarks_[size_t(j)].frames_tracked++;
    } else {
      landmarks_[size_t(j)].miss_count++;
    }
  }

  const LandmarkDirectives directives = manage_landmarks(
      landmarks_, landmark_pixels, matched, keypoints, descriptors, keypoint_used,
      config_.tracking, config_.detector.r_min);

  // Drops arrive ascending; applying them in descending order keeps the
  // remaining indices valid. landmarks_ mirrors the EKF slots throughout.
  for (auto it = directives.drop.rbegin(); it != directives.drop.rend(); ++it) {
    ekf_.remove_landmark(*it);
    landmarks_.erase(landmarks_.begin() + *it);
  }
  int added = 0;
  for (int k : directives.add_keypoints) {
    const Keypoint& kp = keypoints[size_t(k)];
    const int slot = ekf_.initialize_landmark(kp, calib_.color,
                                              config_.detector.depth_error_coeffs);
    if (slot < 0) continue;  // budget full or degenerate projection geometry
    TrackedLandmark lm;
    lm.id = next_id_++;
    lm.descriptor = *descriptors[size_t(k)];
    lm.modality = kp.modality;
    lm.miss_count = 0;
    lm.frames_tracked = 1;
    landmarks_.push_back(lm);
    if (size_t(slot) + 1 != landmarks_.size())
      throw NumericalFault("landmark table out of sync with filter slots");
    ++added;
  }

  if (record) {
    record->frame_index = frame_index;
    record->t = frame.timestamp;
    const auto [p, q] = ekf_.world_pose();
    record->p = p;
    record->q = q;
    record->v = ekf_.state().v;
    record->b_f = ekf_.state().b_f;
    record->b_w = ekf_.state().b_w;
    record->num_landmarks = ekf_.state().num_landmarks();
    record->attempted = in_view;
    record->matched = stats.used;
    record->gated = stats.gated;
    record->added = added;
    record->dropped = int(directives.drop.size());
    record->pose_cov = ekf_.covariance().topLeftCorner<6, 6>();
    record->cov_diag = ekf_.covariance().diagonal();
  }
  return true;
}

// ----------------------------------------------------------------- playback

namespace {

void write_trajectory_files(const std::vector<FrameRecord>& records,
                            const std::filesystem::path& dir) {
  // CSV: robot state plus the 15 robot-block covariance diagonal entries.
  std::ofstream csv(dir / "trajectory.csv");
  if (!csv) throw DataError("cannot write trajectory.csv");
  csv << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bfx,bfy,bfz,bwx,bwy,bwz,"
         "landmarks,matched";
  for (int i = 0; i < 15; ++i) csv << ",cov" << i;
  csv << "\n";
  char buf[128];
  for (const FrameRecord& r : records) {
    auto put = [&](double v, bool lead_comma = true) {
      std::snprintf(buf, sizeof(buf), lead_comma ? ",%.9g" : "%.9g", v);
      csv << buf;
    };
    put(r.t, false);
    put(r.p.x());
    put(r.p.y());
    put(r.p.z());
    put(r.q.w());
    put(r.q.x());
    put(r.q.y());
    put(r.q.z());
    put(r.v.x());
    put(r.v.y());
    put(r.v.z());
    put(r.b_f.x());
    put(r.b_f.y());
    put(r.b_f.z());
    put(r.b_w.x());
    put(r.b_w.y());
    put(r.b_w.z());
    csv << "," << r.num_landmarks << "," << r.matched;
    for (int i = 0; i < 15 && i < r.cov_diag.size(); ++i) put(r.cov_diag[i]);
    csv << "\n";
  }

  // Binary log: full covariance diagonal and the 6x6 pose block per frame.
  std::ofstream bin(dir / "trajectory.bin", std::ios::binary);
  if (!bin) throw DataError("cannot write trajectory.bin");
  const char magic[8] = {'V', 'D', 'I', 'O', 'L', 'O', 'G', '1'};
  bin.write(magic, 8);
  const uint32_t count = uint32_t(records.size());
  bin.write(reinterpret_cast<const char*>(&count), 4);
  auto put_d = [&](double v) { bin.write(reinterpret_cast<const char*>(&v), 8); };
  for (const FrameRecord& r : records) {
    put_d(r.t);
    for (int i = 0; i < 3; ++i) put_d(r.p[i]);
    put_d(r.q.w());
    put_d(r.q.x());
    put_d(r.q.y());
    put_d(r.q.z());
    for (int i = 0; i < 3; ++i) put_d(r.v[i]);
    for (int i = 0; i < 3; ++i) put_d(r.b_f[i]);
    for (int i = 0; i < 3; ++i) put_d(r.b_w[i]);
    const int32_t nl = r.num_landmarks;
    const int32_t dim = int32_t(r.cov_diag.size());
    bin.write(reinterpret_cast<const char*>(&nl), 4);
    bin.write(reinterpret_cast<const char*>(&dim), 4);
    for (int i = 0; i < dim; ++i) put_d(r.cov_diag[i]);
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) put_d(r.pose_cov(a, b));
  }
}

void write_tracks_csv(const std::vector<TrackRecord>& tracks,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write tracks.csv");
  out << "frame,landmark,slot,in_view,pred_x,pred_y,win_x,win_y,matched,"
         "meas_x,meas_y,hamming\n";
  char buf[256];
  for (const TrackRecord& t : tracks) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%lld,%d,%d,%.9g,%.9g,%.9g,%.9g,%d,%.9g,%.9g,%d\n",
                  t.frame_index, static_cast<long long>(t.landmark_id), t.slot,
                  t.in_view ? 1 : 0, t.predicted.x(), t.predicted.y(),
                  t.half_extent.x(), t.half_extent.y(), t.matched ? 1 : 0,
                  t.measured.x(), t.measured.y(), t.hamming);
    out << buf;
  }
}

}  // namespace

RunReport run_odometry(const DatasetReader& dataset, const PipelineConfig& config,
                       const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  OdometryPipeline pipeline(config, dataset.calib());

  RunReport report;
  report.frames_total = dataset.frame_count();
  report.imu_samples = int(dataset.imu().size());
  report.config_echo = config.describe();
  if (dataset.frame_count() > 0) {
    report.duration = dataset.frame_timestamp(dataset.frame_count() - 1) -
                      dataset.frame_timestamp(0);
  }

  std::vector<TrackRecord> all_tracks;
  double compute = 0.0;
  for (const DatasetReader::Event& ev : dataset.events()) {
    if (ev.kind == DatasetReader::Event::Kind::kImu) {
      const auto t0 = Clock::now();
      pipeline.process_imu(dataset.imu()[size_t(ev.index)]);
      compute += std::chrono::duration<double>(Clock::now() - t0).count();
    } else {
      const RegisteredFrame frame = dataset.read_frame(ev.index);  // IO untimed
      FrameRecord record;
      std::vector<TrackRecord> frame_tracks;
      const auto t0 = Clock::now();
      const bool processed = pipeline.process_frame(
          frame, ev.index, &record, options.write_tracks ? &frame_tracks : nullptr);
      compute += std::chrono::duration<double>(Clock::now() - t0).count();
      if (!processed) continue;
      ++report.frames_processed;
      report.match_attempts += record.attempted;
      report.matches_accepted += record.matched;
      if (options.keep_records) report.records.push_back(std::move(record));
      if (options.write_tracks) {
        all_tracks.insert(all_tracks.end(), frame_tracks.begin(),
                          frame_tracks.end());
      }
    }
  }
  report.landmarks_created = pipeline.landmarks_created();
  report.compute_seconds = compute;
  report.throughput_hz =
      compute > 0.0 ? double(report.frames_processed) / compute : 0.0;

  if (!options.output_dir.empty()) {
    std::filesystem::create_directories(options.output_dir);
    write_trajectory_files(report.records, options.output_dir);
    if (options.write_tracks) {
      write_tracks_csv(all_tracks, options.output_dir / "tracks.csv");
    }
    std::ofstream rep(options.output_dir / "report.txt");
    if (!rep) throw DataError("cannot write report.txt");
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "frames_total %d\nframes_processed %d\nimu_samples %d\n"
                  "match_attempts %lld\nmatches_accepted %lld\n"
                  "compute_seconds %.3f\nthroughput_hz %.2f\n",
                  report.frames_total, report.frames_processed, report.imu_samples,
                  static_cast<long long>(report.match_attempts),
                  static_cast<long long>(report.matches_accepted),
                  report.compute_seconds, report.throughput_hz);
    rep << buf << "\n# resolved configuration\n" << report.config_echo;
  }
  return report;
}

}  // namespace vdio
