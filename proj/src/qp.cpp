#include "artic/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "artic/errors.hpp"

namespace artic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_free(double lo, double hi) { return !std::isfinite(lo) && !std::isfinite(hi); }

// One working-set entry. type 0 = simple bound, 1 = general row.
struct WsRow {
  int type;
  int index;
  int side;  // -1 lower, +1 upper
};

struct Workspace {
  std::vector<WsRow> ws;
  Eigen::VectorXd z;

  bool contains(int type, int index) const {
    for (const auto& r : ws) {
      if (r.type == type && r.index == index) return true;
    }
    return false;
  }
};

Eigen::MatrixXd normals(const DenseQp& qp, const std::vector<WsRow>& ws) {
  const int n = qp.num_vars();
  Eigen::MatrixXd C(static_cast<int>(ws.size()), n);
  C.setZero();
  for (int r = 0; r < static_cast<int>(ws.size()); ++r) {
    if (ws[r].type == 0) {
      C(r, ws[r].index) = 1.0;
    } else {
      C.row(r) = qp.A.row(ws[r].index);
    }
  }
  return C;
}

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kMaxIter: return "max_iter";
    case QpStatus::kInfeasible: return "infeasible";
  }
  return "?";
}

void DenseQp::validate() const {
  const int n = num_vars();
  const int m = num_constraints();
  if (H.rows() != n || H.cols() != n || lb.size() != n || ub.size() != n) {
    throw ContractViolation("DenseQp: inconsistent dimensions");
  }
  if (A.size() > 0 && (A.cols() != n || lbA.size() != m || ubA.size() != m)) {
    throw ContractViolation("DenseQp: inconsistent constraint dimensions");
  }
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + H.cwiseAbs().maxCoeff())) {
    throw ContractViolation("DenseQp: H not symmetric");
  }
  for (int i = 0; i < n; ++i) {
    if (lb[i] > ub[i]) throw ContractViolation("DenseQp: lb > ub");
  }
  for (int j = 0; j < m; ++j) {
    if (lbA[j] > ubA[j]) throw ContractViolation("DenseQp: lbA > ubA");
  }
}

QpSolution QpSolver::solve(const DenseQp& qp, const QpSolution* warm_start) {
  qp.validate();
  return run(qp, warm_start, false);
}

QpSolution QpSolver::run(const DenseQp& qp, const QpSolution* warm_start,
                         bool phase1) {
  const int n = qp.num_vars();
  const int m = qp.num_constraints();
  const double tol = opts_.tol;
  const int max_iter = opts_.max_iter > 0 ? opts_.max_iter : 10 * n;

  // Symmetrize once; all later algebra assumes it.
  Eigen::MatrixXd H = 0.5 * (qp.H + qp.H.transpose());

  Workspace w;
  w.z.resize(n);

  // Starting point: warm primal if usable, else zero, clamped into the box.
  if (warm_start != nullptr && warm_start->primal.size() == n) {
    w.z = warm_start->primal;
  } else {
    w.z.setZero();
  }
  for (int i = 0; i < n; ++i) {
    double lo = qp.lb[i], hi = qp.ub[i];
    if (std::isfinite(lo)) w.z[i] = std::max(w.z[i], lo);
    if (std::isfinite(hi)) w.z[i] = std::min(w.z[i], hi);
  }

  // General rows violated at the start point require a phase-1 elastic solve.
  if (m > 0 && !phase1) {
    Eigen::VectorXd az = qp.A * w.z;
    double viol = 0.0;
    for (int j = 0; j < m; ++j) {
      viol = std::max(viol, qp.lbA[j] - az[j]);
      viol = std::max(viol, az[j] - qp.ubA[j]);
    }
    if (viol > tol) {
      // Elastic problem in (z, t): relax every general row by t >= 0 and
      // drive t to zero with a linear penalty.
      const double scale = 1.0 + qp.g.cwiseAbs().maxCoeff();
      DenseQp el;
      el.H = Eigen::MatrixXd::Zero(n + 1, n + 1);
      el.H.topLeftCorner(n, n) =
          1e-8 * (1.0 + H.cwiseAbs().maxCoeff()) * Eigen::MatrixXd::Identity(n, n);
      el.H(n, n) = 1.0;
      el.g = Eigen::VectorXd::Zero(n + 1);
      el.g[n] = scale;
      el.lb = Eigen::VectorXd::Constant(n + 1, -kInf);
      el.ub = Eigen::VectorXd::Constant(n + 1, kInf);
      el.lb.head(n) = qp.lb;
      el.ub.head(n) = qp.ub;
      el.lb[n] = 0.0;
      el.A = Eigen::MatrixXd::Zero(2 * m, n + 1);
      el.A.topLeftCorner(m, n) = qp.A;
      el.A.bottomLeftCorner(m, n) = qp.A;
      el.A.col(n).head(m).setConstant(1.0);
      el.A.col(n).tail(m).setConstant(-1.0);
      el.lbA = Eigen::VectorXd::Constant(2 * m, -kInf);
      el.ubA = Eigen::VectorXd::Constant(2 * m, kInf);
      el.lbA.head(m) = qp.lbA;
      el.ubA.tail(m) = qp.ubA;

      QpSolution start;
      start.primal = Eigen::VectorXd::Zero(n + 1);
      start.primal.head(n) = w.z;
      start.primal[n] = viol + 1.0;
      QpOptions saved = opts_;
      opts_.trace = nullptr;
      QpSolution ph1 = run(el, &start, true);
      opts_ = saved;

      if (ph1.primal[n] > 1e2 * tol) {
        QpSolution out;
        out.status = QpStatus::kInfeasible;
        out.primal = ph1.primal.head(n);
        out.dual_bounds = Eigen::VectorXd::Zero(n);
        out.dual_constraints = Eigen::VectorXd::Zero(m);
        Eigen::VectorXd az2 = qp.A * out.primal;
        out.infeasibility = Eigen::VectorXd::Zero(m);
        for (int j = 0; j < m; ++j) {
          out.infeasibility[j] =
              az2[j] - std::clamp(az2[j], qp.lbA[j], qp.ubA[j]);
        }
        out.kkt_residual = kkt_residual(qp, out);
        return out;
      }
      w.z = ph1.primal.head(n);
      // Snap residual elastic slack into the feasible region.
      Eigen::VectorXd az2 = qp.A * w.z;
      (void)az2;
    }
  }

  // Initial working set: bounds first (exactly satisfiable), then any warm
  // general rows that are active and independent at the start point.
  if (warm_start != nullptr &&
      static_cast<int>(warm_start->bound_state.size()) == n) {
    for (int i = 0; i < n; ++i) {
      const int s = warm_start->bound_state[i];
      if (s == -1 && std::isfinite(qp.lb[i])) {
        w.z[i] = qp.lb[i];
        w.ws.push_back({0, i, -1});
      } else if (s == +1 && std::isfinite(qp.ub[i])) {
        w.z[i] = qp.ub[i];
        w.ws.push_back({0, i, +1});
      }
    }
    if (static_cast<int>(warm_start->constraint_state.size()) == m) {
      for (int j = 0; j < m; ++j) {
        const int s = warm_start->constraint_state[j];
        if (s == 0) continue;
        const double target = s == -1 ? qp.lbA[j] : qp.ubA[j];
        if (!std::isfinite(target)) continue;
        if (std::abs(qp.A.row(j).dot(w.z) - target) > 1e-7 * (1.0 + std::abs(target))) {
          continue;
        }
        if (static_cast<int>(w.ws.size()) >= n) break;
        // Keep the working set linearly independent.
        w.ws.push_back({1, j, s});
        Eigen::MatrixXd C = normals(qp, w.ws);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C.transpose());
        if (qr.rank() < static_cast<int>(w.ws.size())) w.ws.pop_back();
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(qp.lb[i]) && w.z[i] <= qp.lb[i]) {
        w.z[i] = qp.lb[i];
        w.ws.push_back({0, i, -1});
      } else if (std::isfinite(qp.ub[i]) && w.z[i] >= qp.ub[i]) {
        w.z[i] = qp.ub[i];
        w.ws.push_back({0, i, +1});
      }
    }
  }

  QpSolution sol;
  sol.primal = w.z;
  sol.dual_bounds = Eigen::VectorXd::Zero(n);
  sol.dual_constraints = Eigen::VectorXd::Zero(m);
  bool regularized = false;

  Eigen::VectorXd p(n), lambda;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (opts_.trace) {
      opts_.trace(iter, 0.5 * w.z.dot(H * w.z) + qp.g.dot(w.z));
    }
    const Eigen::VectorXd grad = H * w.z + qp.g;
    const int k = static_cast<int>(w.ws.size());

    Eigen::MatrixXd Q1, Z, R1;
    if (k > 0) {
      Eigen::MatrixXd C = normals(qp, w.ws);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(C.transpose());
      Eigen::MatrixXd Qfull = qr.householderQ();
      Q1 = Qfull.leftCols(k);
      Z = Qfull.rightCols(n - k);
      R1 = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    } else {
      Z = Eigen::MatrixXd::Identity(n, n);
    }

    // Step on the working-set equality subspace.
    p.setZero();
    if (n - k > 0) {
      Eigen::MatrixXd Hr = Z.transpose() * H * Z;
      Eigen::VectorXd gr = Z.transpose() * grad;
      Eigen::LLT<Eigen::MatrixXd> llt(Hr);
      double reg = opts_.regularization;
      while (llt.info() != Eigen::Success && reg <= 1e-2) {
        regularized = true;
        llt.compute(Hr + reg * Eigen::MatrixXd::Identity(n - k, n - k));
        reg *= 100.0;
      }
      if (llt.info() == Eigen::Success) {
        p = -Z * llt.solve(gr);
      }
    }

    if (p.lpNorm<Eigen::Infinity>() <= 1e-11 * (1.0 + w.z.lpNorm<Eigen::Infinity>())) {
      // Stationary on the working set: check multiplier signs.
      double worst = -kInf;
      int worst_r = -1;
      if (k > 0) {
        lambda = R1.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(
            Q1.transpose() * grad);
        for (int r = 0; r < k; ++r) {
          // Lower-side rows need lambda >= 0, upper-side rows lambda <= 0.
          const double viol = w.ws[r].side == -1 ? -lambda[r] : lambda[r];
          if (viol > worst) {
            worst = viol;
            worst_r = r;
          }
        }
      }
      if (k == 0 || worst <= tol) {
        sol.primal = w.z;
        sol.status = QpStatus::kOptimal;
        break;
      }
      // Equality rows (lb == ub) never leave the working set.
      const WsRow& row = w.ws[worst_r];
      const bool fixed =
          row.type == 0
              ? qp.lb[row.index] == qp.ub[row.index]
              : qp.lbA[row.index] == qp.ubA[row.index];
      if (fixed) {
        // Treat as optimal w.r.t. the remaining rows.
        bool any_free_viol = false;
        for (int r = 0; r < k; ++r) {
          if (r == worst_r) continue;
          const double viol = w.ws[r].side == -1 ? -lambda[r] : lambda[r];
          const bool fr =
              w.ws[r].type == 0
                  ? qp.lb[w.ws[r].index] == qp.ub[w.ws[r].index]
                  : qp.lbA[w.ws[r].index] == qp.ubA[w.ws[r].index];
          if (!fr && viol > tol) {
            any_free_viol = true;
            w.ws.erase(w.ws.begin() + r);
            break;
          }
        }
        if (!any_free_viol) {
          sol.primal = w.z;
          sol.status = QpStatus::kOptimal;
          break;
        }
      } else {
        w.ws.erase(w.ws.begin() + worst_r);
      }
      continue;
    }

    // Ratio test against all rows not in the working set.
    double alpha = 1.0;
    int blk_type = -1, blk_index = -1, blk_side = 0;
    auto consider = [&](int type, int index, double val, double dir, double lo,
                        double hi) {
      if (std::abs(dir) <= 1e-13) return;
      double a;
      int side;
      if (dir < 0.0 && std::isfinite(lo)) {
        a = (lo - val) / dir;
        side = -1;
      } else if (dir > 0.0 && std::isfinite(hi)) {
        a = (hi - val) / dir;
        side = +1;
      } else {
        return;
      }
      a = std::max(a, 0.0);
      // Strictly smaller wins; on ties prefer bounds, then the lowest index.
      if (a < alpha - 1e-12 ||
          (a < alpha + 1e-12 && blk_index >= 0 &&
           (type < blk_type || (type == blk_type && index < blk_index)))) {
        alpha = std::min(a, alpha);
        blk_type = type;
        blk_index = index;
        blk_side = side;
      }
    };
    for (int i = 0; i < n; ++i) {
      if (w.contains(0, i) || is_free(qp.lb[i], qp.ub[i])) continue;
      consider(0, i, w.z[i], p[i], qp.lb[i], qp.ub[i]);
    }
    for (int j = 0; j < m; ++j) {
      if (w.contains(1, j)) continue;
      consider(1, j, qp.A.row(j).dot(w.z), qp.A.row(j).dot(p), qp.lbA[j],
               qp.ubA[j]);
    }

    w.z += alpha * p;
    if (blk_index >= 0) {
      w.ws.push_back({blk_type, blk_index, blk_side});
      if (blk_type == 0) {
        w.z[blk_index] = blk_side == -1 ? qp.lb[blk_index] : qp.ub[blk_index];
      }
    }
    // Keep active bounds exact against roundoff drift.
    for (const auto& r : w.ws) {
      if (r.type == 0) {
        w.z[r.index] = r.side == -1 ? qp.lb[r.index] : qp.ub[r.index];
      }
    }
  }

  if (iter >= max_iter) {
    sol.primal = w.z;
    sol.status = QpStatus::kMaxIter;
  }
  sol.iterations = iter;
  sol.regularized = regularized;

  // Recover signed multipliers for the final working set.
  sol.dual_bounds.setZero();
  sol.dual_constraints.setZero();
  if (!w.ws.empty()) {
    Eigen::MatrixXd C = normals(qp, w.ws);
    const Eigen::VectorXd grad = H * w.z + qp.g;
    Eigen::VectorXd lam =
        C.transpose().colPivHouseholderQr().solve(grad);
    for (int r = 0; r < static_cast<int>(w.ws.size()); ++r) {
      if (w.ws[r].type == 0) {
        sol.dual_bounds[w.ws[r].index] = lam[r];
      } else {
        sol.dual_constraints[w.ws[r].index] = lam[r];
      }
    }
  }
  sol.bound_state.assign(n, 0);
  sol.constraint_state.assign(m, 0);
  for (const auto& r : w.ws) {
    if (r.type == 0) {
      sol.bound_state[r.index] = static_cast<std::int8_t>(r.side);
    } else {
      sol.constraint_state[r.index] = static_cast<std::int8_t>(r.side);
    }
  }
  sol.kkt_residual = kkt_residual(qp, sol);
  return sol;
}

double kkt_residual(const DenseQp& qp, const QpSolution& sol) {
  const int n = qp.num_vars();
  const int m = qp.num_constraints();
  const Eigen::VectorXd& z = sol.primal;

  Eigen::VectorXd stat = qp.H * z + qp.g;
  stat -= sol.dual_bounds;
  if (m > 0) stat -= qp.A.transpose() * sol.dual_constraints;
  double r = stat.lpNorm<Eigen::Infinity>();

  auto feas = [&](double val, double lo, double hi) {
    double f = 0.0;
    if (std::isfinite(lo)) f = std::max(f, lo - val);
    if (std::isfinite(hi)) f = std::max(f, val - hi);
    return f;
  };
  // A multiplier attached to an absent bound counts as its own violation.
  auto comp = [&](double dual, double val, double lo, double hi) {
    if (std::abs(dual) < 1e-300) return 0.0;
    if (dual > 0.0) {
      return std::isfinite(lo) ? dual * std::abs(val - lo) : dual;
    }
    return std::isfinite(hi) ? -dual * std::abs(hi - val) : -dual;
  };
  for (int i = 0; i < n; ++i) {
    r = std::max(r, feas(z[i], qp.lb[i], qp.ub[i]));
    r = std::max(r, comp(sol.dual_bounds[i], z[i], qp.lb[i], qp.ub[i]));
  }
  if (m > 0) {
    Eigen::VectorXd az = qp.A * z;
    for (int j = 0; j < m; ++j) {
      r = std::max(r, feas(az[j], qp.lbA[j], qp.ubA[j]));
      r = std::max(r, comp(sol.dual_constraints[j], az[j], qp.lbA[j], qp.ubA[j]));
    }
  }
  return r;
}

void dump(const DenseQp& qp, std::ostream& os) {
  const auto write_mat = [&os](const char* name, const Eigen::MatrixXd& mat) {
    os << name << " " << mat.rows() << " " << mat.cols() << "\n";
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
      for (Eigen::Index j = 0; j < mat.cols(); ++j) {
        os << mat(i, j) << (j + 1 < mat.cols() ? " " : "\n");
      }
    }
  };
  write_mat("H", qp.H);
  write_mat("g", qp.g);
  write_mat("lb", qp.lb);
  write_mat("ub", qp.ub);
  write_mat("A", qp.A);
  write_mat("lbA", qp.lbA);
  write_mat("ubA", qp.ubA);
}

}  // namespace artic
