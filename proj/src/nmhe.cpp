#include "artic/nmhe.hpp"

#include <cmath>

#include "artic/errors.hpp"
#include "artic/vehicle_ode.hpp"

namespace artic {

namespace {

// Selection Jacobians of the output map; constant for this model.
Eigen::MatrixXd full_meas_jx() {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(9, 7);
  j(0, 0) = 1.0;  // x_t
  j(1, 1) = 1.0;  // y_t
  j(2, 3) = 1.0;  // x_i
  j(3, 4) = 1.0;  // y_i
  j(4, 6) = 1.0;  // v
  return j;
}

Eigen::MatrixXd full_meas_ju() {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(9, 3);
  j.block(5, 0, 3, 3).setIdentity();
  return j;
}

Eigen::MatrixXd full_meas_jp() {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(9, 4);
  j(8, 3) = 1.0;  // beta
  return j;
}

// Terminal node: no input attached, so only the state- and beta-dependent
// channels remain (x_t, y_t, x_i, y_i, v, beta).
Eigen::MatrixXd term_meas_jx() {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(6, 7);
  j(0, 0) = 1.0;
  j(1, 1) = 1.0;
  j(2, 3) = 1.0;
  j(3, 4) = 1.0;
  j(4, 6) = 1.0;
  return j;
}

Eigen::MatrixXd term_meas_jp() {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(6, 4);
  j(5, 3) = 1.0;
  return j;
}

}  // namespace

EstimatorWeights EstimatorWeights::defaults(const NoiseSpec& noise) {
  EstimatorWeights w;
  const Vec9 sig = noise.stddev_vec();
  for (int i = 0; i < 9; ++i) w.h_diag[i] = 1.0 / (sig[i] * sig[i]);
  // Forgetting rates in the extended ordering (x; p): measured channels decay
  // fast, headings and traction keep their prior influence weakest.
  w.d_update << 10.0, 10.0, 0.1, 10.0, 10.0, 0.1, 1.0, 0.25, 0.25, 0.25, 1.0;
  w.p0_diag = w.d_update;
  return w;
}

EstimationWindow::EstimationWindow(int capacity, double dt)
    : capacity_(capacity), dt_(dt) {
  if (capacity < 2 || !(dt > 0.0)) {
    throw ContractViolation("EstimationWindow: bad capacity or dt");
  }
}

void EstimationWindow::push(const Measurement& m, const ControlInput& u,
                            double t) {
  if (!m.all_finite() || !u.all_finite()) {
    throw ContractViolation("EstimationWindow: non-finite sample rejected");
  }
  if (!buf_.empty() && std::abs(t - (buf_.back().t + dt_)) > 1e-9) {
    throw ContractViolation("EstimationWindow: timestamp gap, expected last + dt");
  }
  buf_.push_back({m, u, t});
  if (static_cast<int>(buf_.size()) > capacity_) buf_.pop_front();
}

double EstimationWindow::latest_time() const {
  if (buf_.empty()) throw ContractViolation("EstimationWindow: empty");
  return buf_.back().t;
}

ArrivalCost update_arrival_cost(const ArrivalCost& ac, const Vec11& new_prior,
                                const Vec11& d_update, double alpha,
                                double cap) {
  ArrivalCost next;
  next.prior = new_prior;
  next.P = (1.0 - alpha) * ac.P;
  next.P += alpha * Eigen::Matrix<double, 11, 11>(d_update.asDiagonal());
  next.P = 0.5 * (next.P + next.P.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 11, 11>> es(next.P);
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmax > cap) next.P *= cap / lmax;
  return next;
}

NmheEstimator::NmheEstimator(const ModelConstants& c, const EstimatorWeights& w,
                             NmheOptions opt)
    : constants_(c), weights_(w), opt_(opt), window_(opt.N + 1, opt.dt) {
  rti::RtiConfig cfg;
  cfg.substeps = opt_.substeps;
  cfg.qp = opt_.qp;
  cfg.layout.x0_is_variable = true;
  cfg.layout.p_is_variable = true;
  cfg.layout.anchor_dim = 9 * opt_.N + 6;
  cfg.layout.p_lb = Eigen::Vector4d(0.0, 0.0, 0.0, -kBetaMax);
  cfg.layout.p_ub = Eigen::Vector4d(1.0, 1.0, 1.0, kBetaMax);
  rti_ = std::make_unique<rti::RtiSolver>(
      std::make_shared<VehicleOde>(c), cfg,
      [this](const rti::ShootingGrid& g) { return build_terms(g); });
  rti_->set_post_shift([this](rti::ShootingGrid& g) {
    // The newest interval's applied input became known since the last
    // feedback; use it instead of the duplicated guess.
    g.u[g.N - 1] = window_.input(window_.size() - 1).vec();
  });
}

void NmheEstimator::push_measurement(const Measurement& m, const ControlInput& u,
                                     double t) {
  if (!initialized_) {
    initialize_from_first(m, u, t);
    return;
  }
  window_.push(m, u, t);
}

void NmheEstimator::initialize_from_first(const Measurement& m,
                                          const ControlInput& u, double t) {
  if (!m.all_finite() || !u.all_finite()) {
    throw ContractViolation("NmheEstimator: non-finite first sample");
  }
  // Heading from the trailer-to-tractor baseline; usable even at standstill.
  const double psi_t = std::atan2(m.y_t - m.y_i, m.x_t - m.x_i);
  const double beta0 = std::clamp(m.beta, -kBetaMax, kBetaMax);
  const double psi_i = psi_t + beta0 + m.delta_i;
  VehicleState s0{m.x_t, m.y_t, psi_t, m.x_i, m.y_i, psi_i, m.v};
  VaryingParams p0{1.0, 1.0, 1.0, beta0};

  arrival_.prior << s0.vec(), p0.vec();
  arrival_.P = weights_.p0_diag.asDiagonal();

  rti::ShootingGrid& g = rti_->grid();
  g.dt = opt_.dt;
  g.N = opt_.N;
  g.x.assign(opt_.N + 1, s0.vec());
  g.u.assign(opt_.N, Eigen::Vector3d::Zero().eval());
  g.p = p0.vec();

  // Backfill: a window's worth of pairs consistent with a vehicle that has
  // been sitting still before the run (zero input), the newest pair carrying
  // the actually applied first input.
  for (int j = 0; j + 1 < window_.capacity(); ++j) {
    window_.push(m, ControlInput{0.0, 0.0, 0.0},
                 t - (window_.capacity() - 1 - j) * opt_.dt);
  }
  window_.push(m, u, t);
  initialized_ = true;
}

std::vector<rti::LsqTerm> NmheEstimator::build_terms(
    const rti::ShootingGrid& g) const {
  std::vector<rti::LsqTerm> terms;
  terms.reserve(g.N + 2);

  const Eigen::MatrixXd jx = full_meas_jx();
  const Eigen::MatrixXd ju = full_meas_ju();
  const Eigen::MatrixXd jp = full_meas_jp();
  const VaryingParams p = VaryingParams::from_vec(g.p);

  for (int k = 0; k < g.N; ++k) {
    rti::LsqTerm t;
    t.w = weights_.h_diag;
    t.r0 = output_map(VehicleState::from_vec(g.x[k]),
                      ControlInput::from_vec(g.u[k]), p)
               .vec();
    t.jx.emplace_back(k, jx);
    t.ju.emplace_back(k, ju);
    t.jp = jp;
    t.anchor_offset = 9 * k;
    terms.push_back(std::move(t));
  }

  {
    rti::LsqTerm t;
    t.w.resize(6);
    t.w << weights_.h_diag[0], weights_.h_diag[1], weights_.h_diag[2],
        weights_.h_diag[3], weights_.h_diag[4], weights_.h_diag[8];
    const Eigen::VectorXd xN = g.x[g.N];
    t.r0.resize(6);
    t.r0 << xN[0], xN[1], xN[3], xN[4], xN[6], p.beta;
    t.jx.emplace_back(g.N, term_meas_jx());
    t.jp = term_meas_jp();
    t.anchor_offset = 9 * g.N;
    terms.push_back(std::move(t));
  }

  {
    // Arrival cost, whitened so the weight is the identity.
    rti::LsqTerm t;
    Eigen::Matrix<double, 11, 11> L =
        Eigen::LLT<Eigen::Matrix<double, 11, 11>>(arrival_.P).matrixL();
    Vec11 e0;
    e0 << g.x[0], g.p;
    e0 -= arrival_.prior;
    t.w = Eigen::VectorXd::Ones(11);
    t.r0 = L.transpose() * e0;
    t.jx.emplace_back(0, Eigen::MatrixXd(L.transpose().leftCols(7)));
    t.jp = L.transpose().rightCols(4);
    terms.push_back(std::move(t));
  }
  return terms;
}

Eigen::VectorXd NmheEstimator::anchor_from_window() const {
  Eigen::VectorXd a(9 * opt_.N + 6);
  for (int j = 0; j < opt_.N; ++j) {
    a.segment(9 * j, 9) = window_.measurement(j).vec();
  }
  const Measurement& m = window_.measurement(opt_.N);
  a.segment(9 * opt_.N, 6) << m.x_t, m.y_t, m.x_i, m.y_i, m.v, m.beta;
  return a;
}

void NmheEstimator::prepare() {
  if (!initialized_) {
    throw ContractViolation("NmheEstimator: prepare before first measurement");
  }
  rti_->prepare();
}

Estimate NmheEstimator::estimate_step() {
  if (!window_.full()) {
    throw ContractViolation("NmheEstimator: window not full");
  }
  const rti::FeedbackResult res = rti_->feedback(anchor_from_window());
  last_feedback_ms_ = res.feedback_ms;

  Estimate est;
  est.state = VehicleState::from_vec(res.x[opt_.N]);
  est.params = VaryingParams::from_vec(res.p);
  est.kkt = res.kkt;
  est.timestamp = window_.latest_time();

  // The next window starts one node later; move the prior there.
  Vec11 new_prior;
  new_prior << res.x[1], res.p;
  arrival_ =
      update_arrival_cost(arrival_, new_prior, weights_.d_update, opt_.alpha,
                          opt_.p_cap);
  return est;
}

}  // namespace artic
