#pragma once

// Independent reference computations used by the self-test command and the
// test suites. Nothing here calls the production solve paths it is used to
// check: the QP oracle enumerates KKT systems directly, and the Jacobian
// oracle uses central finite differences of the nominal step map.

#include <Eigen/Dense>
#include <optional>
#include <random>

#include "artic/qp.hpp"
#include "artic/rti.hpp"

namespace artic::testing {

/// Globally optimal primal point of a convex QP by enumeration of active
/// sets, solving the equality-constrained KKT system for each candidate.
/// Returns nullopt when no candidate satisfies feasibility and multiplier
/// signs (infeasible problem or numerical failure).
inline std::optional<Eigen::VectorXd> brute_force_qp(const DenseQp& qp,
                                                     double tol = 1e-7) {
  const int n = qp.num_vars();
  const int m = qp.num_constraints();
  const int total = n + m;

  std::vector<int> state(total, 0);  // 0 inactive, -1 lower, +1 upper
  std::optional<Eigen::VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();

  auto evaluate = [&]() {
    int k = 0;
    for (int i = 0; i < total; ++i) {
      if (state[i] != 0) ++k;
    }
    if (k > n) return;
    Eigen::MatrixXd C(k, n);
    Eigen::VectorXd b(k);
    std::vector<int> sides(k);
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) continue;
      const double v = state[i] == -1 ? qp.lb[i] : qp.ub[i];
      if (!std::isfinite(v)) return;
      C.row(r).setZero();
      C(r, i) = 1.0;
      b[r] = v;
      sides[r] = state[i];
      ++r;
    }
    for (int j = 0; j < m; ++j) {
      if (state[n + j] == 0) continue;
      const double v = state[n + j] == -1 ? qp.lbA[j] : qp.ubA[j];
      if (!std::isfinite(v)) return;
      C.row(r) = qp.A.row(j);
      b[r] = v;
      sides[r] = state[n + j];
      ++r;
    }

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = qp.H;
    if (k > 0) {
      kkt.topRightCorner(n, k) = -C.transpose();
      kkt.bottomLeftCorner(k, n) = C;
    }
    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -qp.g;
    rhs.tail(k) = b;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd z = sol.head(n);
    const Eigen::VectorXd lam = sol.tail(k);

    for (int i = 0; i < n; ++i) {
      if (std::isfinite(qp.lb[i]) && z[i] < qp.lb[i] - tol) return;
      if (std::isfinite(qp.ub[i]) && z[i] > qp.ub[i] + tol) return;
    }
    if (m > 0) {
      const Eigen::VectorXd az = qp.A * z;
      for (int j = 0; j < m; ++j) {
        if (std::isfinite(qp.lbA[j]) && az[j] < qp.lbA[j] - tol) return;
        if (std::isfinite(qp.ubA[j]) && az[j] > qp.ubA[j] + tol) return;
      }
    }
    for (int i = 0; i < k; ++i) {
      if (sides[i] == -1 && lam[i] < -tol) return;
      if (sides[i] == +1 && lam[i] > tol) return;
    }
    const double obj = 0.5 * z.dot(qp.H * z) + qp.g.dot(z);
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      best = z;
    }
  };

  // Odometer over {0, -1, +1}^(n+m).
  while (true) {
    evaluate();
    int i = 0;
    for (; i < total; ++i) {
      if (state[i] == 0) {
        state[i] = -1;
        break;
      }
      if (state[i] == -1) {
        state[i] = 1;
        break;
      }
      state[i] = 0;
    }
    if (i == total) break;
  }
  return best;
}

/// Random convex QP with a feasible point by construction (n in [2, max_n],
/// m in [0, max_m]).
inline DenseQp random_feasible_qp(std::mt19937_64& rng, int max_n = 6,
                                  int max_m = 4) {
  auto u01 = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto uni = [&](double a, double b) { return a + (b - a) * u01(); };
  const int n = 2 + static_cast<int>(rng() % (max_n - 1));
  const int m = static_cast<int>(rng() % (max_m + 1));
  const double inf = std::numeric_limits<double>::infinity();

  DenseQp qp;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) M(i, j) = uni(-1.0, 1.0);
  }
  qp.H = M.transpose() * M + 0.3 * Eigen::MatrixXd::Identity(n, n);
  qp.g.resize(n);
  for (int i = 0; i < n; ++i) qp.g[i] = uni(-2.0, 2.0);

  Eigen::VectorXd z0(n);
  for (int i = 0; i < n; ++i) z0[i] = uni(-1.0, 1.0);
  qp.lb.resize(n);
  qp.ub.resize(n);
  for (int i = 0; i < n; ++i) {
    qp.lb[i] = u01() < 0.25 ? -inf : z0[i] - uni(0.05, 1.5);
    qp.ub[i] = u01() < 0.25 ? inf : z0[i] + uni(0.05, 1.5);
  }
  qp.A.resize(m, n);
  qp.lbA.resize(m);
  qp.ubA.resize(m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) qp.A(j, i) = uni(-1.0, 1.0);
    const double az = qp.A.row(j).dot(z0);
    qp.lbA[j] = u01() < 0.25 ? -inf : az - uni(0.05, 1.5);
    qp.ubA[j] = u01() < 0.25 ? inf : az + uni(0.05, 1.5);
  }
  return qp;
}

struct FdJacobians {
  Eigen::MatrixXd A, B, C;
};

/// Central finite differences of the RK4 step map (value path only).
inline FdJacobians fd_step_jacobians(const rti::OdeModel& m,
                                     const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& p, double dt,
                                     int substeps, double h = 1e-5) {
  FdJacobians out;
  const int nx = m.nx(), nu = m.nu(), np = m.np();
  out.A.resize(nx, nx);
  out.B.resize(nx, nu);
  out.C.resize(nx, np);
  for (int i = 0; i < nx; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    out.A.col(i) = (rti::rk4_step(m, xp, u, p, dt, substeps) -
                    rti::rk4_step(m, xm, u, p, dt, substeps)) /
                   (2.0 * h);
  }
  for (int i = 0; i < nu; ++i) {
    Eigen::VectorXd up = u, um = u;
    up[i] += h;
    um[i] -= h;
    out.B.col(i) = (rti::rk4_step(m, x, up, p, dt, substeps) -
                    rti::rk4_step(m, x, um, p, dt, substeps)) /
                   (2.0 * h);
  }
  for (int i = 0; i < np; ++i) {
    Eigen::VectorXd pp = p, pm = p;
    pp[i] += h;
    pm[i] -= h;
    out.C.col(i) = (rti::rk4_step(m, x, u, pp, dt, substeps) -
                    rti::rk4_step(m, x, u, pm, dt, substeps)) /
                   (2.0 * h);
  }
  return out;
}

/// Largest relative deviation between two matrices, floored at unit scale.
inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.rows(); ++i) {
    for (Eigen::Index j = 0; j < got.cols(); ++j) {
      const double denom = std::max(1.0, std::abs(want(i, j)));
      worst = std::max(worst, std::abs(got(i, j) - want(i, j)) / denom);
    }
  }
  return worst;
}

/// RK4 amplification polynomial for the scalar system xdot = a x.
inline double rk4_scalar_poly(double a, double h) {
  const double ah = a * h;
  return 1.0 + ah + ah * ah / 2.0 + ah * ah * ah / 6.0 +
         ah * ah * ah * ah / 24.0;
}

}  // namespace artic::testing
