#include "artic/rti.hpp"

#include <chrono>
#include <cmath>

#include "artic/errors.hpp"

namespace artic::rti {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}
}  // namespace

Eigen::VectorXd rk4_step(const OdeModel& m, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                         double dt, int substeps, Eigen::MatrixXd* A,
                         Eigen::MatrixXd* B, Eigen::MatrixXd* C) {
  const int nx = m.nx(), nu = m.nu(), np = m.np();
  const bool sens = A != nullptr || B != nullptr || C != nullptr;
  const double h = dt / substeps;

  Eigen::VectorXd cur = x;
  // Combined tangent d(cur)/d(x, u, p), seeded with [I 0 0].
  Eigen::MatrixXd T;
  Eigen::MatrixXd fx, fu, fp, J;
  if (sens) {
    T = Eigen::MatrixXd::Zero(nx, nx + nu + np);
    T.leftCols(nx).setIdentity();
    fx.resize(nx, nx);
    fu.resize(nx, nu);
    fp.resize(nx, np);
    J.resize(nx, nx + nu + np);
  }

  Eigen::VectorXd k1(nx), k2(nx), k3(nx), k4(nx);
  Eigen::MatrixXd G1, G2, G3, G4;
  for (int s = 0; s < substeps; ++s) {
    auto stage = [&](const Eigen::VectorXd& xs, Eigen::VectorXd& k,
                     Eigen::MatrixXd* G, const Eigen::MatrixXd* Tin) {
      if (sens) {
        m.eval(xs, u, p, k, &fx, &fu, &fp);
        J.setZero();
        J.middleCols(nx, nu) = fu;
        if (np > 0) J.rightCols(np) = fp;
        *G = fx * (*Tin) + J;
      } else {
        m.eval(xs, u, p, k, nullptr, nullptr, nullptr);
      }
    };
    Eigen::MatrixXd T1, T2, T3;
    stage(cur, k1, sens ? &G1 : nullptr, &T);
    if (sens) T1 = T + 0.5 * h * G1;
    stage(cur + 0.5 * h * k1, k2, sens ? &G2 : nullptr, &T1);
    if (sens) T2 = T + 0.5 * h * G2;
    stage(cur + 0.5 * h * k2, k3, sens ? &G3 : nullptr, &T2);
    if (sens) T3 = T + h * G3;
    stage(cur + h * k3, k4, sens ? &G4 : nullptr, &T3);

    cur += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (sens) T += h / 6.0 * (G1 + 2.0 * G2 + 2.0 * G3 + G4);
  }

  if (A != nullptr) *A = T.leftCols(nx);
  if (B != nullptr) *B = T.middleCols(nx, nu);
  if (C != nullptr) *C = T.rightCols(np);
  return cur;
}

void ShootingGrid::shift_duplicate_last() {
  for (int k = 0; k < N; ++k) x[k] = x[k + 1];
  for (int k = 0; k + 1 < N; ++k) u[k] = u[k + 1];
}

bool ShootingGrid::all_finite() const {
  for (const auto& xi : x) {
    if (!xi.allFinite()) return false;
  }
  for (const auto& ui : u) {
    if (!ui.allFinite()) return false;
  }
  return p.size() == 0 || p.allFinite();
}

LinearizedOcp shoot_and_linearize(const ShootingGrid& grid, const OdeModel& m,
                                  int substeps, bool with_params) {
  if (static_cast<int>(grid.x.size()) != grid.N + 1 ||
      static_cast<int>(grid.u.size()) != grid.N) {
    throw ContractViolation("shoot_and_linearize: grid size mismatch");
  }
  if (!grid.all_finite()) {
    throw ContractViolation("shoot_and_linearize: non-finite grid guess");
  }

  LinearizedOcp lin;
  lin.N = grid.N;
  lin.nx = m.nx();
  lin.nu = m.nu();
  lin.np = with_params ? m.np() : 0;
  lin.A.resize(grid.N);
  lin.B.resize(grid.N);
  if (with_params) lin.C.resize(grid.N);
  lin.defect.resize(grid.N);
  lin.x_end.resize(grid.N);

  Eigen::MatrixXd Ck;
  for (int k = 0; k < grid.N; ++k) {
    Eigen::VectorXd xe =
        rk4_step(m, grid.x[k], grid.u[k], grid.p, grid.dt, substeps, &lin.A[k],
                 &lin.B[k], with_params ? &Ck : nullptr);
    if (!xe.allFinite() || !lin.A[k].allFinite() || !lin.B[k].allFinite()) {
      throw LinearizationError(k, "shooting interval diverged");
    }
    if (with_params) {
      if (!Ck.allFinite()) throw LinearizationError(k, "shooting interval diverged");
      lin.C[k] = Ck;
    }
    lin.x_end[k] = xe;
    lin.defect[k] = grid.x[k + 1] - xe;
  }
  return lin;
}

CondensedQp condense(const ShootingGrid& grid, const LinearizedOcp& lin,
                     const std::vector<LsqTerm>& terms,
                     const ProblemLayout& layout) {
  const int N = lin.N, nx = lin.nx, nu = lin.nu;
  const int np = layout.p_is_variable ? lin.np : 0;
  if (layout.p_is_variable && lin.C.empty()) {
    throw ContractViolation("condense: parameter sensitivities missing");
  }

  CondensedQp c;
  c.N = N;
  c.nx = nx;
  c.nu = nu;
  c.np = np;
  c.off_x0 = layout.x0_is_variable ? 0 : -1;
  c.off_p = layout.p_is_variable ? (layout.x0_is_variable ? nx : 0) : -1;
  c.off_u = (layout.x0_is_variable ? nx : 0) + np;
  c.nz = c.off_u + N * nu;
  const int nz = c.nz;
  const int na = layout.anchor_dim;

  // Affine substitution dx_k = exp_const + exp_z z + exp_anchor anchor built
  // from the sensitivity recursion.
  c.exp_const.assign(N + 1, Eigen::VectorXd::Zero(nx));
  c.exp_z.assign(N + 1, Eigen::MatrixXd::Zero(nx, nz));
  c.exp_anchor.assign(N + 1, Eigen::MatrixXd::Zero(nx, na));
  if (layout.x0_is_variable) {
    c.exp_z[0].middleCols(c.off_x0, nx).setIdentity();
  } else {
    // dx0 = anchor slice - linearization point.
    c.exp_anchor[0].middleCols(layout.x0_anchor_offset, nx).setIdentity();
    c.exp_const[0] = -grid.x[0];
  }
  for (int k = 0; k < N; ++k) {
    c.exp_const[k + 1] = lin.A[k] * c.exp_const[k] - lin.defect[k];
    c.exp_z[k + 1] = lin.A[k] * c.exp_z[k];
    c.exp_z[k + 1].middleCols(c.off_u + k * nu, nu) += lin.B[k];
    if (np > 0) c.exp_z[k + 1].middleCols(c.off_p, np) += lin.C[k];
    if (na > 0) c.exp_anchor[k + 1] = lin.A[k] * c.exp_anchor[k];
  }

  c.qp.H = Eigen::MatrixXd::Zero(nz, nz);
  c.qp.g = Eigen::VectorXd::Zero(nz);
  c.g_anchor = Eigen::MatrixXd::Zero(nz, na);

  for (const auto& term : terms) {
    const int nr = static_cast<int>(term.w.size());
    if (term.r0.size() != nr) {
      throw ContractViolation("condense: term weight/residual size mismatch");
    }
    Eigen::MatrixXd Jz = Eigen::MatrixXd::Zero(nr, nz);
    Eigen::MatrixXd Ja = Eigen::MatrixXd::Zero(nr, na);
    Eigen::VectorXd rbar = term.r0;
    for (const auto& [node, Jx] : term.jx) {
      if (node < 0 || node > N || Jx.rows() != nr || Jx.cols() != nx) {
        throw ContractViolation("condense: bad state Jacobian block");
      }
      Jz += Jx * c.exp_z[node];
      if (na > 0) Ja += Jx * c.exp_anchor[node];
      rbar += Jx * c.exp_const[node];
    }
    for (const auto& [interval, Ju] : term.ju) {
      if (interval < 0 || interval >= N || Ju.rows() != nr || Ju.cols() != nu) {
        throw ContractViolation("condense: bad input Jacobian block");
      }
      Jz.middleCols(c.off_u + interval * nu, nu) += Ju;
    }
    if (term.jp.size() > 0) {
      if (np == 0 || term.jp.rows() != nr || term.jp.cols() != np) {
        throw ContractViolation("condense: bad parameter Jacobian block");
      }
      Jz.middleCols(c.off_p, np) += term.jp;
    }
    if (term.anchor_offset >= 0) {
      if (term.anchor_offset + nr > na) {
        throw ContractViolation("condense: anchor slice out of range");
      }
      Ja.middleCols(term.anchor_offset, nr) -=
          Eigen::MatrixXd::Identity(nr, nr);
    }
    const Eigen::MatrixXd JtW = Jz.transpose() * term.w.asDiagonal();
    c.qp.H.noalias() += JtW * Jz;
    c.qp.g.noalias() += JtW * rbar;
    if (na > 0) c.g_anchor.noalias() += JtW * Ja;
  }

  c.qp.lb = Eigen::VectorXd::Constant(nz, -kInf);
  c.qp.ub = Eigen::VectorXd::Constant(nz, kInf);
  if (np > 0) {
    c.qp.lb.segment(c.off_p, np) = layout.p_lb - grid.p;
    c.qp.ub.segment(c.off_p, np) = layout.p_ub - grid.p;
  }
  if (layout.u_lb.size() == nu) {
    for (int k = 0; k < N; ++k) {
      c.qp.lb.segment(c.off_u + k * nu, nu) = layout.u_lb - grid.u[k];
      c.qp.ub.segment(c.off_u + k * nu, nu) = layout.u_ub - grid.u[k];
    }
  }
  c.qp.A.resize(0, nz);
  c.qp.lbA.resize(0);
  c.qp.ubA.resize(0);
  return c;
}

RtiSolver::RtiSolver(std::shared_ptr<const OdeModel> model, RtiConfig cfg,
                     TermsBuilder terms_builder)
    : model_(std::move(model)),
      cfg_(std::move(cfg)),
      terms_builder_(std::move(terms_builder)),
      qp_solver_(cfg_.qp) {}

const CondensedQp& RtiSolver::prepared_qp() const {
  if (phase_ != Phase::kPrepared) {
    throw ContractViolation("RtiSolver: no prepared QP");
  }
  return cqp_;
}

void RtiSolver::prepare() {
  const auto t0 = std::chrono::steady_clock::now();
  if (shift_pending_ && cfg_.auto_shift) {
    grid_.shift_duplicate_last();
    if (post_shift_) post_shift_(grid_);
  }
  shift_pending_ = false;
  const std::vector<LsqTerm> terms = terms_builder_(grid_);
  const LinearizedOcp lin = shoot_and_linearize(
      grid_, *model_, cfg_.substeps, cfg_.layout.p_is_variable);
  cqp_ = condense(grid_, lin, terms, cfg_.layout);
  phase_ = Phase::kPrepared;
  prepare_ms_ = ms_since(t0);
}

FeedbackResult RtiSolver::feedback(const Eigen::VectorXd& anchor) {
  const auto t0 = std::chrono::steady_clock::now();
  if (phase_ != Phase::kPrepared) {
    throw ContractViolation("RtiSolver: feedback before preparation");
  }
  if (anchor.size() != cfg_.layout.anchor_dim) {
    throw ContractViolation("RtiSolver: anchor dimension mismatch");
  }

  DenseQp qp = cqp_.qp;
  if (anchor.size() > 0) qp.g += cqp_.g_anchor * anchor;

  QpSolution qsol = qp_solver_.solve(qp, have_warm_ ? &last_qp_solution_ : nullptr);
  if (qsol.status == QpStatus::kInfeasible) {
    throw QpInfeasibleError("RTI feedback QP infeasible",
                            std::make_shared<const DenseQp>(qp));
  }
  last_qp_solution_ = qsol;
  have_warm_ = true;

  FeedbackResult res;
  res.z = qsol.primal;
  res.qp_status = qsol.status;
  res.kkt = qsol.kkt_residual;
  res.x.resize(grid_.N + 1);
  for (int k = 0; k <= grid_.N; ++k) {
    Eigen::VectorXd dx = cqp_.exp_const[k] + cqp_.exp_z[k] * qsol.primal;
    if (anchor.size() > 0) dx += cqp_.exp_anchor[k] * anchor;
    res.x[k] = grid_.x[k] + dx;
  }
  res.u.resize(grid_.N);
  for (int k = 0; k < grid_.N; ++k) {
    res.u[k] = grid_.u[k] + qsol.primal.segment(cqp_.off_u + k * cqp_.nu, cqp_.nu);
  }
  res.p = grid_.p;
  if (cqp_.off_p >= 0) {
    res.p += qsol.primal.segment(cqp_.off_p, cqp_.np);
  }

  // Adopt the Gauss-Newton step as the next linearization point.
  grid_.x = res.x;
  grid_.u = res.u;
  grid_.p = res.p;
  phase_ = Phase::kAwaitingPreparation;
  shift_pending_ = true;
  res.feedback_ms = ms_since(t0);
  return res;
}

}  // namespace artic::rti
