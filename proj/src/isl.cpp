#include "artic/isl.hpp"

#include <chrono>
#include <cmath>

#include "artic/errors.hpp"
#include "artic/vehicle_ode.hpp"

namespace artic {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}
}  // namespace

LinearState state_transform(const VehicleState& s) {
  LinearState z;
  z.z << s.x_t, s.y_t, s.v * std::cos(s.psi_t), s.v * std::sin(s.psi_t), s.x_i,
      s.y_i, s.v * std::cos(s.psi_i), s.v * std::sin(s.psi_i);
  return z;
}

VehicleState inverse_state_transform(const LinearState& z) {
  const double v = std::hypot(z.z[2], z.z[3]);
  if (!(v > 0.0)) {
    throw ContractViolation("inverse_state_transform: v must be > 0");
  }
  VehicleState s;
  s.x_t = z.z[0];
  s.y_t = z.z[1];
  s.psi_t = std::atan2(z.z[3], z.z[2]);
  s.x_i = z.z[4];
  s.y_i = z.z[5];
  s.psi_i = std::atan2(z.z[7], z.z[6]);
  s.v = v;
  return s;
}

LinearState reference_to_z(const ReferenceState& r) {
  LinearState z;
  z.z << r.x_t_r, r.y_t_r, r.v_r * std::cos(r.psi_t_r),
      r.v_r * std::sin(r.psi_t_r), r.x_i_r, r.y_i_r,
      r.v_r * std::cos(r.psi_i_r), r.v_r * std::sin(r.psi_i_r);
  return z;
}

LinearSystem LinearSystem::damped(double tau) {
  LinearSystem s;
  s.A(0, 2) = 1.0;
  s.A(1, 3) = 1.0;
  s.A(2, 2) = -1.0 / tau;
  s.A(3, 3) = -1.0 / tau;
  s.A(4, 6) = 1.0;
  s.A(5, 7) = 1.0;
  s.A(6, 6) = -1.0 / tau;
  s.A(7, 7) = -1.0 / tau;
  s.B(2, 0) = 1.0;
  s.B(3, 1) = 1.0;
  s.B(6, 2) = 1.0;
  s.B(7, 3) = 1.0;
  s.C(0, 0) = 1.0;
  s.C(1, 1) = 1.0;
  s.C(2, 4) = 1.0;
  s.C(3, 5) = 1.0;
  return s;
}

void LinearSystem::discretize_rk4(double dt, int substeps, Mat88* Ad,
                                  Mat84* Bd) const {
  const double h = dt / substeps;
  const Mat88 M = h * A;
  Mat88 Ah = Mat88::Identity() + M + 0.5 * M * M + M * M * M / 6.0 +
             M * M * M * M / 24.0;
  Mat84 Bh = (h * Mat88::Identity() + 0.5 * h * M + h * M * M / 6.0 +
              h * M * M * M / 24.0) *
             B;
  Mat88 At = Mat88::Identity();
  Mat84 Bt = Mat84::Zero();
  for (int i = 0; i < substeps; ++i) {
    Bt = Ah * Bt + Bh;
    At = Ah * At;
  }
  *Ad = At;
  *Bd = Bt;
}

int LinearSystem::controllability_rank() const {
  Eigen::Matrix<double, 8, 32> ctrb;
  Mat84 blk = B;
  for (int i = 0; i < 8; ++i) {
    ctrb.block<8, 4>(0, 4 * i) = blk;
    blk = A * blk;
  }
  return static_cast<int>(
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(ctrb).rank());
}

ControlInput input_transform(const VehicleState& s, double beta,
                             const VirtualInput& uz_in, const ModelConstants& c,
                             const InputBounds& bounds, IslEvents* events) {
  IslEvents ev;
  if (s.v < kIslVMin) throw LowSpeedError(s.v);

  Eigen::Vector4d uz = uz_in.u;
  for (int i = 0; i < 4; ++i) {
    const double capped = std::clamp(uz[i], -kUzCap, kUzCap);
    if (capped != uz[i]) ev.uz_capped = true;
    uz[i] = capped;
  }

  const double st = std::sin(s.psi_t), ct = std::cos(s.psi_t);
  const double si = std::sin(s.psi_i), ci = std::cos(s.psi_i);
  const double v2 = s.v * s.v;

  const double lat_t = -uz[0] * st + uz[1] * ct;
  const double delta_t = std::atan(c.L_t * lat_t / v2);

  const double lat_i = -uz[2] * si + uz[3] * ci;
  double arg = c.L_i * lat_i / v2 - c.L_d / c.L_t * std::tan(delta_t);
  if (arg > 1.0 || arg < -1.0) {
    ev.arcsin_clamped = true;
    arg = std::clamp(arg, -1.0, 1.0);
  }
  const double delta_i = std::asin(arg) - beta;

  const double hp = c.tau / c.K * (uz[0] * ct + uz[1] * st + s.v / c.tau);

  const ControlInput raw{delta_t, delta_i, hp};
  const ControlInput out = bounds.clamp(raw);
  if (out.delta_t != raw.delta_t || out.delta_i != raw.delta_i ||
      out.hp != raw.hp) {
    ev.input_clamped = true;
  }
  if (events != nullptr) *events = ev;
  return out;
}

LinearizationCheck verify_linearization(const VehicleState& s, double beta,
                                        const VirtualInput& uz, double dt,
                                        const ModelConstants& c, int substeps) {
  LinearizationCheck out;
  const ControlInput u = input_transform(s, beta, uz, c, InputBounds{}, nullptr);
  const VehicleState nl =
      integrate(s, u, VaryingParams{1.0, 1.0, 1.0, beta}, c, dt, substeps);
  out.z_nonlinear = state_transform(nl).z;

  // What the transform realizes when exact: undamped double integrators.
  const Vec8 z0 = state_transform(s).z;
  const int pos_idx[4] = {0, 1, 4, 5};
  const int vel_idx[4] = {2, 3, 6, 7};
  for (int i = 0; i < 4; ++i) {
    out.z_virtual[pos_idx[i]] =
        z0[pos_idx[i]] + dt * z0[vel_idx[i]] + 0.5 * dt * dt * uz.u[i];
    out.z_virtual[vel_idx[i]] = z0[vel_idx[i]] + dt * uz.u[i];
  }
  const Vec8 err = (out.z_nonlinear - out.z_virtual).cwiseAbs();
  out.tractor_err = err.head<4>().maxCoeff();
  out.trailer_err = err.tail<4>().maxCoeff();
  return out;
}

EkfOptions EkfOptions::defaults() {
  EkfOptions o;
  // Forgetting rates of the estimator weights, reused as process noise rates
  // in the state ordering (x_t, y_t, psi_t, x_i, y_i, psi_i, v).
  o.process_rates << 10.0, 10.0, 0.1, 10.0, 10.0, 0.1, 1.0;
  return o;
}

Ekf::Ekf(const ModelConstants& c, EkfOptions opt) : c_(c), opt_(opt) {}

void Ekf::init(const VehicleState& mean, double cov_diag) {
  mean_ = mean;
  cov_ = cov_diag * Mat77::Identity();
  initialized_ = true;
}

void Ekf::step(const Measurement& m, const ControlInput& u, double dt,
               int substeps) {
  if (!initialized_) throw ContractViolation("Ekf: step before init");
  last_reset_ = false;

  // Predict on the traction-free model with the measured drawbar angle.
  const VehicleOde ode(c_);
  const Eigen::Vector4d p(1.0, 1.0, 1.0, m.beta);
  Eigen::MatrixXd F;
  const Eigen::VectorXd xp =
      rti::rk4_step(ode, mean_.vec(), u.vec(), p, dt, substeps, &F);
  mean_ = VehicleState::from_vec(xp);
  cov_ = F * cov_ * F.transpose();
  cov_ += dt * Eigen::Matrix<double, 7, 1>(opt_.process_rates).asDiagonal().toDenseMatrix();
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();

  // Update with positions and wheel speed.
  Eigen::Matrix<double, 5, 7> Hm = Eigen::Matrix<double, 5, 7>::Zero();
  Hm(0, 0) = 1.0;
  Hm(1, 1) = 1.0;
  Hm(2, 3) = 1.0;
  Hm(3, 4) = 1.0;
  Hm(4, 6) = 1.0;
  Eigen::Matrix<double, 5, 1> r2;
  r2 << opt_.noise.sigma_pos * opt_.noise.sigma_pos,
      opt_.noise.sigma_pos * opt_.noise.sigma_pos,
      opt_.noise.sigma_pos * opt_.noise.sigma_pos,
      opt_.noise.sigma_pos * opt_.noise.sigma_pos,
      opt_.noise.sigma_v * opt_.noise.sigma_v;
  Eigen::Matrix<double, 5, 1> innov;
  innov << m.x_t - mean_.x_t, m.y_t - mean_.y_t, m.x_i - mean_.x_i,
      m.y_i - mean_.y_i, m.v - mean_.v;

  const Eigen::Matrix<double, 5, 5> S =
      Hm * cov_ * Hm.transpose() + Eigen::Matrix<double, 5, 5>(r2.asDiagonal());
  const Eigen::Matrix<double, 7, 5> K = cov_ * Hm.transpose() * S.inverse();
  mean_ = VehicleState::from_vec(mean_.vec() + K * innov);
  cov_ = (Mat77::Identity() - K * Hm) * cov_;
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Mat77> es(cov_);
  if (es.eigenvalues().minCoeff() < -1e-10 || !cov_.allFinite()) {
    cov_ = opt_.init_cov * Mat77::Identity();
    last_reset_ = true;
  }
}

LmpcWeights LmpcWeights::defaults() {
  LmpcWeights w;
  w.q_diag << 1.0, 1.0, 0.0, 0.0, 0.01, 0.0, 0.0, 0.0;
  w.r_diag << 1.0, 1.0, 0.01, 0.01;
  return w;
}

Vec8 LmpcWeights::effective_q() const {
  Vec8 q = q_diag;
  if (symmetric_trailer_q) q[5] = q[4];
  return q;
}

LmpcController::LmpcController(const ModelConstants& c, const LmpcWeights& w,
                               LmpcOptions opt)
    : weights_(w), opt_(opt), qp_solver_(opt.qp) {
  sys_ = LinearSystem::damped(c.tau);
  sys_.discretize_rk4(opt_.dt, opt_.substeps, &Ad_, &Bd_);

  const int N = opt_.N;
  const int nu = 4;
  nz_ = nu * N + 1;  // inputs plus one shared slack

  // Prediction maps z_k = E_k z0 + G_k U.
  std::vector<Mat88> E(N + 1);
  std::vector<Eigen::MatrixXd> G(N + 1);
  E[0] = Mat88::Identity();
  G[0] = Eigen::MatrixXd::Zero(8, nu * N);
  for (int k = 0; k < N; ++k) {
    E[k + 1] = Ad_ * E[k];
    G[k + 1] = Ad_ * G[k];
    G[k + 1].middleCols(nu * k, nu) += Bd_;
  }

  H_ = Eigen::MatrixXd::Zero(nz_, nz_);
  g_ref_ = Eigen::MatrixXd::Zero(nz_, 8 * (N + 1));
  g_z0_ = Eigen::MatrixXd::Zero(nz_, 8);
  g_prev_ = Eigen::MatrixXd::Zero(nz_, 4);

  const Vec8 q = weights_.effective_q();
  for (int k = 1; k <= N; ++k) {
    const Vec8 wk = (k == N ? weights_.terminal_factor : 1.0) * q;
    const Eigen::MatrixXd GtW = G[k].transpose() * wk.asDiagonal();
    H_.topLeftCorner(nu * N, nu * N).noalias() += GtW * G[k];
    g_z0_.topRows(nu * N).noalias() += GtW * E[k];
    g_ref_.block(0, 8 * k, nu * N, 8).noalias() -= GtW;
  }

  // Move penalty (u_k - u_{k-1}) with the first move anchored at prev_uz.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(nu * N, nu * N);
  for (int k = 0; k < N; ++k) {
    D.block(nu * k, nu * k, nu, nu).setIdentity();
    if (k > 0) {
      D.block(nu * k, nu * (k - 1), nu, nu) = -Eigen::Matrix4d::Identity();
    }
  }
  Eigen::MatrixXd Rbar = Eigen::MatrixXd::Zero(nu * N, nu * N);
  for (int k = 0; k < N; ++k) {
    Rbar.block(nu * k, nu * k, nu, nu) = weights_.r_diag.asDiagonal();
  }
  H_.topLeftCorner(nu * N, nu * N).noalias() += D.transpose() * Rbar * D;
  g_prev_.topRows(nu * N).noalias() -=
      D.transpose() * Rbar.leftCols(nu);  // c = -[prev; 0; ...]

  H_(nz_ - 1, nz_ - 1) = opt_.slack_weight;

  // Softened velocity bounds: two one-sided rows per (node, component); the
  // terminal rows are duplicated, matching the printed formulation.
  const int vel_idx[4] = {2, 3, 6, 7};
  std::vector<int> nodes;
  for (int k = 1; k <= N; ++k) nodes.push_back(k);
  nodes.push_back(N);
  const int mrows = static_cast<int>(nodes.size()) * 4 * 2;
  Arows_ = Eigen::MatrixXd::Zero(mrows, nz_);
  bound_z0_ = Eigen::MatrixXd::Zero(mrows, 8);
  bound_base_lo_ = Eigen::VectorXd::Constant(mrows, -kInf);
  bound_base_hi_ = Eigen::VectorXd::Constant(mrows, kInf);
  int row = 0;
  for (int k : nodes) {
    for (int c4 = 0; c4 < 4; ++c4) {
      const int zi = vel_idx[c4];
      // upper: g_k u - s <= bound - E_k z0
      Arows_.block(row, 0, 1, nu * N) = G[k].row(zi);
      Arows_(row, nz_ - 1) = -1.0;
      bound_z0_.row(row) = E[k].row(zi);
      bound_base_hi_[row] = opt_.vel_bound;
      ++row;
      // lower: g_k u + s >= -bound - E_k z0
      Arows_.block(row, 0, 1, nu * N) = G[k].row(zi);
      Arows_(row, nz_ - 1) = 1.0;
      bound_z0_.row(row) = E[k].row(zi);
      bound_base_lo_[row] = -opt_.vel_bound;
      ++row;
    }
  }
}

void LmpcController::reset(const Eigen::Vector4d& prev_uz) {
  prev_uz_ = prev_uz;
  prepared_ = false;
  have_warm_ = false;
}

void LmpcController::prepare(const std::vector<ReferenceState>& refs) {
  const auto t0 = std::chrono::steady_clock::now();
  if (static_cast<int>(refs.size()) != opt_.N + 1) {
    throw ContractViolation("LmpcController: refs must hold N+1 nodes");
  }
  Eigen::VectorXd refstack(8 * (opt_.N + 1));
  for (int k = 0; k <= opt_.N; ++k) {
    refstack.segment(8 * k, 8) = reference_to_z(refs[k]).z;
  }
  g_partial_ = g_ref_ * refstack;
  prepared_ = true;
  prepare_ms_ = ms_since(t0);
}

std::pair<VirtualInput, LmpcDiagnostics> LmpcController::step(
    const LinearState& z_hat) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!prepared_) {
    throw ContractViolation("LmpcController: step before prepare");
  }
  if (!z_hat.z.allFinite()) {
    throw ContractViolation("LmpcController: non-finite state");
  }

  DenseQp qp;
  qp.H = H_;
  qp.g = g_partial_ + g_z0_ * z_hat.z + g_prev_ * prev_uz_;
  qp.lb = Eigen::VectorXd::Constant(nz_, -kInf);
  qp.ub = Eigen::VectorXd::Constant(nz_, kInf);
  qp.lb[nz_ - 1] = 0.0;  // slack
  qp.A = Arows_;
  const Eigen::VectorXd shift = bound_z0_ * z_hat.z;
  qp.lbA = bound_base_lo_ - shift;
  qp.ubA = bound_base_hi_ - shift;
  for (int r = 0; r < qp.lbA.size(); ++r) {
    if (!std::isfinite(bound_base_lo_[r])) qp.lbA[r] = -kInf;
    if (!std::isfinite(bound_base_hi_[r])) qp.ubA[r] = kInf;
  }

  QpSolution sol = qp_solver_.solve(qp, have_warm_ ? &warm_ : nullptr);
  if (sol.status == QpStatus::kInfeasible) {
    throw QpInfeasibleError("LMPC QP infeasible",
                            std::make_shared<const DenseQp>(qp));
  }
  warm_ = sol;
  have_warm_ = true;

  VirtualInput uz;
  uz.u = sol.primal.head(4);
  prev_uz_ = uz.u;
  prepared_ = false;

  LmpcDiagnostics d;
  d.kkt = sol.kkt_residual;
  d.qp_status = sol.status;
  d.prepare_ms = prepare_ms_;
  d.feedback_ms = ms_since(t0);
  d.slack_active = sol.primal[nz_ - 1] > 1e-7;
  return {uz, d};
}

}  // namespace artic
