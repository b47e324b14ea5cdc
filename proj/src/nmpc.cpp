#include "artic/nmpc.hpp"

#include <cmath>

#include "artic/errors.hpp"
#include "artic/vehicle_ode.hpp"

namespace artic {

ControllerWeights ControllerWeights::defaults() {
  ControllerWeights w;
  w.q_diag << 2.0, 2.0, 0.0, 4.0, 4.0, 0.0, 0.0;
  w.r_diag << 7.0, 7.0, 7.0;
  w.terminal_factor = 10.0;
  return w;
}

std::array<MoveFormulation::Range, 3> MoveFormulation::first_move_bounds(
    const InputBounds& b) const {
  const Eigen::Vector3d lo = b.lower() - prev.vec();
  const Eigen::Vector3d hi = b.upper() - prev.vec();
  return {Range{lo[0], hi[0]}, Range{lo[1], hi[1]}, Range{lo[2], hi[2]}};
}

Eigen::MatrixXd MoveFormulation::move_to_abs() const {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(3 * N, 3 * N);
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j <= k; ++j) {
      T.block(3 * k, 3 * j, 3, 3).setIdentity();
    }
  }
  return T;
}

Eigen::VectorXd MoveFormulation::abs_offset() const {
  return prev.vec().replicate(N, 1);
}

Eigen::MatrixXd MoveFormulation::abs_to_move() const {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3 * N, 3 * N);
  for (int k = 0; k < N; ++k) {
    D.block(3 * k, 3 * k, 3, 3).setIdentity();
    if (k > 0) D.block(3 * k, 3 * (k - 1), 3, 3) = -Eigen::Matrix3d::Identity();
  }
  return D;
}

Eigen::VectorXd MoveFormulation::move_offset() const {
  Eigen::VectorXd off = Eigen::VectorXd::Zero(3 * N);
  off.head(3) = -prev.vec();
  return off;
}

MoveFormulation delta_u_formulation(const ControlInput& prev_u, int N) {
  if (!prev_u.all_finite()) {
    throw ContractViolation("delta_u_formulation: non-finite previous input");
  }
  return MoveFormulation{prev_u, N};
}

NmpcController::NmpcController(const ModelConstants& c,
                               const ControllerWeights& w, NmpcOptions opt)
    : constants_(c), weights_(w), opt_(opt) {
  rti::RtiConfig cfg;
  cfg.substeps = opt_.substeps;
  cfg.qp = opt_.qp;
  cfg.layout.x0_is_variable = false;
  cfg.layout.x0_anchor_offset = 0;
  cfg.layout.p_is_variable = false;
  cfg.layout.anchor_dim = 7 + 7 * (opt_.N + 1);
  cfg.layout.u_lb = opt_.bounds.lower();
  cfg.layout.u_ub = opt_.bounds.upper();
  rti_ = std::make_unique<rti::RtiSolver>(
      std::make_shared<VehicleOde>(c), cfg,
      [this](const rti::ShootingGrid& g) { return build_terms(g); });
}

void NmpcController::reset(const VehicleState& x0,
                           const std::vector<ReferenceState>& refs,
                           const VaryingParams& p) {
  if (static_cast<int>(refs.size()) != opt_.N + 1) {
    throw ContractViolation("NmpcController::reset: refs must hold N+1 nodes");
  }
  rti::ShootingGrid& g = rti_->grid();
  g.dt = opt_.dt;
  g.N = opt_.N;
  g.x.resize(opt_.N + 1);
  g.x[0] = x0.vec();
  for (int k = 1; k <= opt_.N; ++k) g.x[k] = refs[k].state_vec();
  const ControlInput steady{
      0.0, 0.0,
      std::clamp(refs[0].v_r / constants_.K, opt_.bounds.hp_min,
                 opt_.bounds.hp_max)};
  g.u.assign(opt_.N, steady.vec());
  g.p = p.vec();
  prev_u_ = steady;
  pending_params_.reset();
}

std::vector<rti::LsqTerm> NmpcController::build_terms(
    const rti::ShootingGrid& g) const {
  std::vector<rti::LsqTerm> terms;
  terms.reserve(2 * g.N + 1);
  const Eigen::MatrixXd I7 = Eigen::MatrixXd::Identity(7, 7);
  const Eigen::MatrixXd I3 = Eigen::MatrixXd::Identity(3, 3);

  // Tracking terms; node 0 is pinned by the embedded estimate, so its error
  // is a constant and is skipped.
  for (int k = 1; k <= g.N; ++k) {
    rti::LsqTerm t;
    t.w = k == g.N ? Eigen::VectorXd(weights_.s_diag())
                   : Eigen::VectorXd(weights_.q_diag);
    t.r0 = g.x[k];
    t.jx.emplace_back(k, I7);
    t.anchor_offset = 7 + 7 * k;
    terms.push_back(std::move(t));
  }

  // Input move penalty, first move anchored at the last applied input.
  for (int k = 0; k < g.N; ++k) {
    rti::LsqTerm t;
    t.w = weights_.r_diag;
    t.ju.emplace_back(k, I3);
    if (k == 0) {
      t.r0 = g.u[0] - prev_u_.vec();
    } else {
      t.r0 = g.u[k] - g.u[k - 1];
      t.ju.emplace_back(k - 1, Eigen::MatrixXd(-I3));
    }
    terms.push_back(std::move(t));
  }
  return terms;
}

void NmpcController::prepare() {
  if (rti_->grid().x.empty()) {
    throw ContractViolation("NmpcController: prepare before reset");
  }
  if (pending_params_) {
    rti_->grid().p = pending_params_->vec();
    pending_params_.reset();
  }
  rti_->prepare();
}

std::pair<ControlInput, ControlDiagnostics> NmpcController::control_step(
    const Estimate& x_hat, const std::vector<ReferenceState>& refs) {
  if (static_cast<int>(refs.size()) != opt_.N + 1) {
    throw ContractViolation("NmpcController: refs must hold N+1 nodes");
  }
  if (!x_hat.state.all_finite()) {
    throw ContractViolation("NmpcController: non-finite estimate");
  }

  Eigen::VectorXd anchor(7 + 7 * (opt_.N + 1));
  anchor.head(7) = x_hat.state.vec();
  for (int k = 0; k <= opt_.N; ++k) {
    anchor.segment(7 + 7 * k, 7) = refs[k].state_vec();
  }

  const rti::FeedbackResult res = rti_->feedback(anchor);

  ControlDiagnostics diag;
  diag.kkt = res.kkt;
  diag.qp_status = res.qp_status;
  diag.feedback_ms = res.feedback_ms;
  diag.prepare_ms = rti_->last_prepare_ms();
  diag.predicted.reserve(res.x.size());
  for (const auto& xk : res.x) diag.predicted.push_back(VehicleState::from_vec(xk));

  const ControlInput u = ControlInput::from_vec(res.u[0]);
  if (!opt_.bounds.contains(u)) {
    throw ContractViolation("NmpcController: QP returned out-of-bounds input");
  }
  prev_u_ = u;
  return {u, diag};
}

}  // namespace artic
