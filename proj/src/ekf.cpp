#include "vdio/ekf.hpp"

#include <cmath>
#include <sstream>

#include "vdio/errors.hpp"

namespace vdio {

namespace {

bool finite(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.allFinite();
}

}  // namespace

void FilterState::retract(const Eigen::VectorXd& delta) {
  if (delta.size() != error_dim())
    throw NumericalFault("FilterState::retract: delta dimension mismatch");
  r += delta.segment<3>(0);
  q = (q * quat_exp(delta.segment<3>(3))).normalized();
  v += delta.segment<3>(6);
  b_f += delta.segment<3>(9);
  b_w += delta.segment<3>(12);
  for (int j = 0; j < num_landmarks(); ++j) {
    landmarks[j].bearing.azimuth += delta(15 + 3 * j);
    landmarks[j].bearing.elevation += delta(15 + 3 * j + 1);
    landmarks[j].rho += delta(15 + 3 * j + 2);
  }
}

Eigen::VectorXd FilterState::boxminus(const FilterState& a, const FilterState& b) {
  if (a.num_landmarks() != b.num_landmarks())
    throw NumericalFault("FilterState::boxminus: landmark count mismatch");
  Eigen::VectorXd d(a.error_dim());
  d.segment<3>(0) = a.r - b.r;
  d.segment<3>(3) = quat_log(b.q.conjugate() * a.q);
  d.segment<3>(6) = a.v - b.v;
  d.segment<3>(9) = a.b_f - b.b_f;
  d.segment<3>(12) = a.b_w - b.b_w;
  for (int j = 0; j < a.num_landmarks(); ++j) {
    d(15 + 3 * j) = a.landmarks[j].bearing.azimuth - b.landmarks[j].bearing.azimuth;
    d(15 + 3 * j + 1) =
        a.landmarks[j].bearing.elevation - b.landmarks[j].bearing.elevation;
    d(15 + 3 * j + 2) = a.landmarks[j].rho - b.landmarks[j].rho;
  }
  return d;
}

Ekf::Ekf(const NoiseParams& noise, const FilterParams& params,
         const RigidTransform& t_cam_imu, double d_min, double d_max,
         int max_landmarks, const std::array<double, 3>& depth_error_coeffs)
    : noise_(noise),
      params_(params),
      t_cam_imu_(t_cam_imu),
      d_min_(d_min),
      d_max_(d_max),
      max_landmarks_(max_landmarks),
      depth_coeffs_(depth_error_coeffs) {
  if (!(d_min_ > 0.0) || !(d_max_ > d_min_))
    throw ConfigError("Ekf: need 0 < d_min < d_max");
  if (max_landmarks_ < 1) throw ConfigError("Ekf: max_landmarks must be >= 1");
}

void Ekf::initialize(const FilterState& x0) {
  if (!x0.landmarks.empty())
    throw ConfigError("Ekf::initialize: initial state must carry no landmarks");
  state_ = x0;
  state_.q.normalize();
  cov_ = Eigen::MatrixXd::Zero(15, 15);
  auto sq = [](double s) { return s * s; };
  cov_.block<3, 3>(0, 0).diagonal().setConstant(sq(params_.sigma_r0));
  cov_.block<3, 3>(3, 3).diagonal().setConstant(sq(params_.sigma_theta0));
  cov_.block<3, 3>(6, 6).diagonal().setConstant(sq(params_.sigma_v0));
  cov_.block<3, 3>(9, 9).diagonal().setConstant(sq(params_.sigma_bf0));
  cov_.block<3, 3>(12, 12).diagonal().setConstant(sq(params_.sigma_bw0));
  initialized_ = true;
}

FilterState Ekf::propagate_state(const FilterState& x, const ImuSample& imu,
                                 double dt, const RigidTransform& t_cam_imu,
                                 double gravity) {
  const Eigen::Vector3d w = imu.gyro - x.b_w;
  const Eigen::Vector3d f = imu.accel - x.b_f;
  const Eigen::Vector3d g_w(0.0, 0.0, -gravity);
  const Eigen::Vector3d g_b = x.q.conjugate() * g_w;

  FilterState out = x;
  out.r = x.r + dt * (x.r.cross(w) + x.v);
  out.v = x.v + dt * (x.v.cross(w) + f + g_b);
  out.q = (x.q * quat_exp(dt * w)).normalized();

  if (!x.landmarks.empty()) {
    const Eigen::Matrix3d r_vb = t_cam_imu.q.toRotationMatrix();
    const Eigen::Vector3d c_b = -(r_vb.transpose() * t_cam_imu.t);
    const Eigen::Vector3d w_v = r_vb * w;
    const Eigen::Vector3d v_v = r_vb * (x.v + w.cross(c_b));
    for (int j = 0; j < x.num_landmarks(); ++j) {
      const LandmarkState& lm = x.landmarks[j];
      const Eigen::Vector3d m = lm.bearing.unit();
      const Eigen::Matrix<double, 3, 2> jm = lm.bearing.unit_jacobian();
      const double ce = std::cos(lm.bearing.elevation);
      const double ce2 = std::max(ce * ce, 1e-12);
      const Eigen::Vector3d mdot =
          m.cross(w_v) - lm.rho * (v_v - m * m.dot(v_v));
      out.landmarks[j].bearing.azimuth =
          lm.bearing.azimuth + dt * jm.col(0).dot(mdot) / ce2;
      out.landmarks[j].bearing.elevation =
          lm.bearing.elevation + dt * jm.col(1).dot(mdot);
      out.landmarks[j].rho = lm.rho + dt * lm.rho * lm.rho * m.dot(v_v);
    }
  }
  return out;
}

Eigen::MatrixXd Ekf::propagation_jacobian(const FilterState& x, const ImuSample& imu,
                                          double dt, const RigidTransform& t_cam_imu,
                                          double gravity) {
  const int l = x.error_dim();
  const Eigen::Vector3d w = imu.gyro - x.b_w;
  const Eigen::Vector3d g_w(0.0, 0.0, -gravity);
  const Eigen::Vector3d g_b = x.q.conjugate() * g_w;

  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(l, l);
  const Eigen::Matrix3d sw = skew(w);
  // r row: r+ = r + dt (r x w + v)
  f.block<3, 3>(0, 0) -= dt * sw;
  f.block<3, 3>(0, 6) = dt * Eigen::Matrix3d::Identity();
  f.block<3, 3>(0, 12) = -dt * skew(x.r);
  // attitude row: right-multiplicative error transports by Exp(dt w)^T
  f.block<3, 3>(3, 3) = quat_exp(dt * w).toRotationMatrix().transpose();
  f.block<3, 3>(3, 12) = -dt * so3_right_jacobian(dt * w);
  // velocity row: v+ = v + dt (v x w + f + g_b)
  f.block<3, 3>(6, 3) = dt * skew(g_b);
  f.block<3, 3>(6, 6) -= dt * sw;
  f.block<3, 3>(6, 9) = -dt * Eigen::Matrix3d::Identity();
  f.block<3, 3>(6, 12) = -dt * skew(x.v);

  if (!x.landmarks.empty()) {
    const Eigen::Matrix3d r_vb = t_cam_imu.q.toRotationMatrix();
    const Eigen::Vector3d c_b = -(r_vb.transpose() * t_cam_imu.t);
    const Eigen::Vector3d w_v = r_vb * w;
    const Eigen::Vector3d v_v = r_vb * (x.v + w.cross(c_b));
    // landmark velocity sensitivities to the body error states
    const Eigen::Matrix3d dwv_dbw = -r_vb;
    const Eigen::Matrix3d dvv_dv = r_vb;
    const Eigen::Matrix3d dvv_dbw = r_vb * skew(c_b);

    for (int j = 0; j < x.num_landmarks(); ++j) {
      const LandmarkState& lm = x.landmarks[j];
      const double az = lm.bearing.azimuth, el = lm.bearing.elevation;
      const double rho = lm.rho;
      const double ca = std::cos(az), sa = std::sin(az);
      const double ce = std::cos(el), se = std::sin(el);
      const double ce2 = std::max(ce * ce, 1e-12);
      const Eigen::Vector3d m = lm.bearing.unit();
      const Eigen::Vector3d m_a(ca * ce, 0.0, -sa * ce);
      const Eigen::Vector3d m_e(-sa * se, ce, -ca * se);
      const Eigen::Vector3d m_aa(-sa * ce, 0.0, -ca * ce);
      const Eigen::Vector3d m_ae(-ca * se, 0.0, sa * se);
      const Eigen::Vector3d m_ee = -m;

      const double mv = m.dot(v_v);
      const Eigen::Vector3d mdot = m.cross(w_v) - rho * (v_v - m * mv);
      const Eigen::Vector3d dmdot_da =
          m_a.cross(w_v) + rho * (m_a * mv + m * m_a.dot(v_v));
      const Eigen::Vector3d dmdot_de =
          m_e.cross(w_v) + rho * (m_e * mv + m * m_e.dot(v_v));
      const Eigen::Vector3d dmdot_drho = -(v_v - m * mv);
      const Eigen::Matrix3d dmdot_dwv = skew(m);
      const Eigen::Matrix3d dmdot_dvv =
          -rho * (Eigen::Matrix3d::Identity() - m * m.transpose());

      // azimuth rate phi_a = m_a . mdot / ce^2
      const double dphia_da = (m_aa.dot(mdot) + m_a.dot(dmdot_da)) / ce2;
      const double dphia_de = (m_ae.dot(mdot) + m_a.dot(dmdot_de)) / ce2 +
                              m_a.dot(mdot) * (2.0 * se / (ce2 * ce));
      const double dphia_drho = m_a.dot(dmdot_drho) / ce2;
      const Eigen::RowVector3d dphia_dv =
          (m_a.transpose() * dmdot_dvv * dvv_dv) / ce2;
      const Eigen::RowVector3d dphia_dbw =
          (m_a.transpose() * (dmdot_dwv * dwv_dbw + dmdot_dvv * dvv_dbw)) / ce2;

      // elevation rate phi_e = m_e . mdot
      const double dphie_da = m_ae.dot(mdot) + m_e.dot(dmdot_da);
      const double dphie_de = m_ee.dot(mdot) + m_e.dot(dmdot_de);
      const double dphie_drho = m_e.dot(dmdot_drho);
      const Eigen::RowVector3d dphie_dv = m_e.transpose() * dmdot_dvv * dvv_dv;
      const Eigen::RowVector3d dphie_dbw =
          m_e.transpose() * (dmdot_dwv * dwv_dbw + dmdot_dvv * dvv_dbw);

      // inverse-depth rate phi_r = rho^2 m . v_v
      const double dphir_da = rho * rho * m_a.dot(v_v);
      const double dphir_de = rho * rho * m_e.dot(v_v);
      const double dphir_drho = 2.0 * rho * mv;
      const Eigen::RowVector3d dphir_dv = rho * rho * m.transpose() * dvv_dv;
      const Eigen::RowVector3d dphir_dbw = rho * rho * m.transpose() * dvv_dbw;

      const int s = 15 + 3 * j;
      Eigen::Matrix3d lm_block;
      lm_block << dphia_da, dphia_de, dphia_drho, dphie_da, dphie_de, dphie_drho,
          dphir_da, dphir_de, dphir_drho;
      f.block<3, 3>(s, s) += dt * lm_block;
      f.block<1, 3>(s, 6) = dt * dphia_dv;
      f.block<1, 3>(s + 1, 6) = dt * dphie_dv;
      f.block<1, 3>(s + 2, 6) = dt * dphir_dv;
      f.block<1, 3>(s, 12) = dt * dphia_dbw;
      f.block<1, 3>(s + 1, 12) = dt * dphie_dbw;
      f.block<1, 3>(s + 2, 12) = dt * dphir_dbw;
    }
  }
  return f;
}

Eigen::MatrixXd Ekf::process_noise(const Eigen::MatrixXd& f, double dt) const {
  const int l = int(f.rows());
  Eigen::MatrixXd qd = Eigen::MatrixXd::Zero(l, l);

  // white accel noise enters exactly where -db_f does: the velocity row
  Eigen::MatrixXd gf = Eigen::MatrixXd::Zero(l, 3);
  gf.block<3, 3>(6, 0) = dt * Eigen::Matrix3d::Identity();
  // white gyro noise enters wherever -db_w does, except the bias row itself
  Eigen::MatrixXd gw = -f.middleCols<3>(12);
  gw.middleRows<3>(12).setZero();

  const double qf = noise_.accel_density * noise_.accel_density / dt;
  const double qw = noise_.gyro_density * noise_.gyro_density / dt;
  qd.noalias() += gf * qf * gf.transpose();
  qd.noalias() += gw * qw * gw.transpose();

  auto sq = [](double s) { return s * s; };
  for (int i = 0; i < 3; ++i) {
    qd(i, i) += dt * sq(noise_.pos_process);
    qd(9 + i, 9 + i) += dt * sq(noise_.accel_walk);
    qd(12 + i, 12 + i) += dt * sq(noise_.gyro_walk);
  }
  const int n_lm = (l - 15) / 3;
  for (int j = 0; j < n_lm; ++j) {
    const double ce = std::cos(state_.landmarks[j].bearing.elevation);
    const double ce2 = std::max(ce * ce, 1e-12);
    qd(15 + 3 * j, 15 + 3 * j) += dt * sq(noise_.bearing_process) / ce2;
    qd(15 + 3 * j + 1, 15 + 3 * j + 1) += dt * sq(noise_.bearing_process);
    qd(15 + 3 * j + 2, 15 + 3 * j + 2) += dt * sq(noise_.rho_process);
  }
  return qd;
}

void Ekf::propagate(const ImuSample& imu, double dt) {
  if (!initialized_) throw DataError("Ekf::propagate before initialize");
  if (!(dt > 0.0)) {
    throw DataError("Ekf::propagate: non-positive dt " + std::to_string(dt) +
                    " (IMU timestamps must strictly increase)");
  }
  const int n = std::max(1, int(std::ceil(dt / params_.dt_max - 1e-9)));
  const double h = dt / n;
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd f =
        propagation_jacobian(state_, imu, h, t_cam_imu_, params_.gravity);
    state_ = propagate_state(state_, imu, h, t_cam_imu_, params_.gravity);
    const Eigen::MatrixXd qd = process_noise(f, h);
    cov_ = f * cov_ * f.transpose() + qd;
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  }
  clamp_inverse_depths();
  check_health("propagate");
}

UpdateStats Ekf::update(const std::vector<PixelMeasurement>& measurements,
                        const PinholeCamera& cam) {
  if (!initialized_) throw DataError("Ekf::update before initialize");
  UpdateStats stats;
  if (measurements.empty()) return stats;

  struct Row {
    int j;
    Eigen::Vector2d y;
    Eigen::Matrix2d jac;
    double depth;  // sensor depth (optical-axis z) at the matched pixel
    double range;  // distance along the bearing ray: z / m_z
  };
  std::vector<Row> rows;
  const double r_px = noise_.sigma_px * noise_.sigma_px;
  for (const auto& meas : measurements) {
    if (meas.landmark < 0 || meas.landmark >= state_.num_landmarks()) {
      throw DataError("Ekf::update: landmark index " + std::to_string(meas.landmark) +
                      " out of range");
    }
    ++stats.attempted;
    Eigen::Matrix2d jac;
    const auto px = bearing_to_pixel(state_.landmarks[meas.landmark].bearing, cam, &jac);
    if (!px) {  // bearing slipped out of view since prediction
      ++stats.gated;
      continue;
    }
    const Eigen::Vector2d y = meas.pixel - *px;
    const int s = 15 + 3 * meas.landmark;
    const Eigen::Matrix2d sigma_mu = cov_.block<2, 2>(s, s);
    Eigen::Matrix2d innov_cov = jac * sigma_mu * jac.transpose();
    innov_cov(0, 0) += r_px;
    innov_cov(1, 1) += r_px;
    const double det = innov_cov.determinant();
    if (!(det > 0.0)) {
      ++stats.gated;
      continue;
    }
    // Mahalanobis gate at chi2(2, 0.99)
    const double md = y.dot(innov_cov.inverse() * y);
    if (!(md <= kChi2Gate2Dof99)) {
      ++stats.gated;
      continue;
    }
    double range = 0.0;
    if (meas.depth > 0.0) {
      // the sensor reports optical-axis z; the filter's 1/rho is distance
      // along the ray, longer by 1/m_z off the image center
      const double mz = pixel_to_bearing(meas.pixel, cam).unit().z();
      if (mz > 1e-6) range = meas.depth / mz;
    }
    rows.push_back({meas.landmark, y, jac, meas.depth, range});
  }
  if (rows.empty()) return stats;  // everything gated: state untouched

  const int l = state_.error_dim();
  const int k2 = 2 * int(rows.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k2, l);
  Eigen::VectorXd y(k2);
  for (size_t i = 0; i < rows.size(); ++i) {
    h.block<2, 2>(2 * i, 15 + 3 * rows[i].j) = rows[i].jac;
    y.segment<2>(2 * i) = rows[i].y;
  }

  const Eigen::MatrixXd pht = cov_ * h.transpose();
  Eigen::MatrixXd s = h * pht;
  s.diagonal().array() += r_px;
  s = 0.5 * (s + s.transpose()).eval();
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericalFault("Ekf::update: innovation covariance not positive definite");
  }
  const Eigen::MatrixXd gain = llt.solve(pht.transpose()).transpose();
  const Eigen::VectorXd delta = gain * y;
  state_.retract(delta);

  // Joseph form keeps the covariance symmetric PSD under roundoff
  Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(l, l);
  ikh.noalias() -= gain * h;
  cov_ = ikh * cov_ * ikh.transpose() + gain * (r_px * Eigen::MatrixXd::Identity(k2, k2)) * gain.transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();

  stats.used = int(rows.size());
  stats.innovation_rms = std::sqrt(y.squaredNorm() / double(k2));

  // optional scalar inverse-depth updates from the measured depth
  if (params_.depth_as_update) {
    for (const Row& row : rows) {
      if (!(row.depth >= d_min_ && row.depth <= d_max_) || !(row.range > 0.0)) {
        continue;
      }
      const int idx = 15 + 3 * row.j + 2;
      const double err = depth_error(row.depth, depth_coeffs_).value_or(0.0);
      const double err_range = err * row.range / row.depth;
      // sigma_rho = sigma_d / d^2 by the derivative of rho = 1/d
      const double r_rho =
          std::max(err_range / (row.range * row.range), 1e-6);
      const double yr = 1.0 / row.range - state_.landmarks[row.j].rho;
      const double s_rho = cov_(idx, idx) + r_rho * r_rho;
      if (!(yr * yr / s_rho <= kChi2Gate1Dof99)) continue;
      const Eigen::VectorXd k_col = cov_.col(idx) / s_rho;
      Eigen::VectorXd d_upd = k_col * yr;
      state_.retract(d_upd);
      Eigen::MatrixXd ikh1 = Eigen::MatrixXd::Identity(l, l);
      ikh1.col(idx) -= k_col;
      cov_ = ikh1 * cov_ * ikh1.transpose() +
             (r_rho * r_rho) * k_col * k_col.transpose();
      cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
    }
  }

  clamp_inverse_depths();
  check_health("update");
  return stats;
}

int Ekf::initialize_landmark(const Keypoint& kp, const PinholeCamera& cam,
                             const std::array<double, 3>& depth_error_coeffs) {
  if (!initialized_) throw DataError("Ekf::initialize_landmark before initialize");
  if (state_.num_landmarks() >= max_landmarks_) return -1;

  LandmarkState lm;
  lm.bearing = pixel_to_bearing(kp.pixel, cam);
  const double mz = lm.bearing.unit().z();
  double sigma_rho;
  if (kp.has_depth() && kp.depth >= d_min_ && kp.depth <= d_max_ && mz > 1e-6) {
    // sensor depth is optical-axis z; the ray range is z / m_z
    const double range = kp.depth / mz;
    lm.rho = 1.0 / range;
    const double err = depth_error(kp.depth, depth_error_coeffs).value_or(0.0) / mz;
    // first-order mapping of depth error through rho = 1/d
    sigma_rho = std::max(err / (range * range), 1e-6);
  } else {
    lm.rho = params_.rho_default;
    sigma_rho = params_.sigma_rho0;
  }

  Eigen::Matrix2d jac;
  const auto px = bearing_to_pixel(lm.bearing, cam, &jac);
  if (!px || std::abs(jac.determinant()) < 1e-12) return -1;
  const Eigen::Matrix2d jac_inv = jac.inverse();
  const double r_px = noise_.sigma_px * noise_.sigma_px;
  const Eigen::Matrix2d sigma_mu = jac_inv * (r_px * Eigen::Matrix2d::Identity()) *
                                   jac_inv.transpose();

  const int l_old = state_.error_dim();
  state_.landmarks.push_back(lm);
  const int l_new = l_old + 3;
  cov_.conservativeResize(l_new, l_new);
  cov_.block(0, l_old, l_old, 3).setZero();
  cov_.block(l_old, 0, 3, l_old).setZero();
  cov_.block(l_old, l_old, 3, 3).setZero();
  cov_.block<2, 2>(l_old, l_old) = sigma_mu;
  cov_(l_old + 2, l_old + 2) = sigma_rho * sigma_rho;
  return state_.num_landmarks() - 1;
}

void Ekf::remove_landmark(int index) {
  if (index < 0 || index >= state_.num_landmarks()) {
    throw DataError("Ekf::remove_landmark: index " + std::to_string(index) +
                    " out of range (have " + std::to_string(state_.num_landmarks()) +
                    ")");
  }
  const int l_old = state_.error_dim();
  const int l_new = l_old - 3;
  const int s = 15 + 3 * index;
  const int tail = l_old - s - 3;

  Eigen::MatrixXd nc(l_new, l_new);
  nc.topLeftCorner(s, s) = cov_.topLeftCorner(s, s);
  if (tail > 0) {
    nc.topRightCorner(s, tail) = cov_.topRightCorner(s, tail);
    nc.bottomLeftCorner(tail, s) = cov_.bottomLeftCorner(tail, s);
    nc.bottomRightCorner(tail, tail) = cov_.bottomRightCorner(tail, tail);
  }
  cov_ = std::move(nc);
  state_.landmarks.erase(state_.landmarks.begin() + index);
}

std::pair<Eigen::Vector3d, Eigen::Quaterniond> Ekf::world_pose() const {
  return {state_.q * state_.r, state_.q};
}

void Ekf::clamp_inverse_depths() {
  const double rho_min = 1.0 / params_.d_max_track;
  const double rho_max = 1.0 / d_min_;
  for (auto& lm : state_.landmarks) {
    lm.rho = std::min(std::max(lm.rho, rho_min), rho_max);
  }
}

void Ekf::check_health(const char* where) const {
  bool ok = finite(state_.r) && finite(state_.v) && finite(state_.b_f) &&
            finite(state_.b_w) && std::isfinite(state_.q.w()) &&
            state_.q.coeffs().allFinite();
  for (const auto& lm : state_.landmarks) {
    ok = ok && std::isfinite(lm.bearing.azimuth) &&
         std::isfinite(lm.bearing.elevation) && std::isfinite(lm.rho);
  }
  double min_diag = 0.0;
  if (ok) {
    if (!cov_.allFinite()) {
      ok = false;
    } else {
      min_diag = cov_.diagonal().minCoeff();
      if (min_diag < -1e-9) ok = false;
    }
  }
  if (!ok) {
    std::ostringstream oss;
    oss << "Ekf state invalid after " << where << ": dim=" << state_.error_dim()
        << " landmarks=" << state_.num_landmarks() << " min_cov_diag=" << min_diag
        << " r=[" << state_.r.transpose() << "] v=[" << state_.v.transpose() << "]";
    throw NumericalFault(oss.str());
  }
}

}  // namespace vdio
