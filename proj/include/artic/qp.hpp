#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace artic {

/// Convex quadratic program
///   min 0.5 z'Hz + g'z   s.t.  lb <= z <= ub,  lbA <= A z <= ubA
/// H must be symmetric positive semidefinite. Infinities encode absent bounds.
struct DenseQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::VectorXd lb, ub;
  Eigen::MatrixXd A;
  Eigen::VectorXd lbA, ubA;

  int num_vars() const { return static_cast<int>(g.size()); }
  int num_constraints() const { return static_cast<int>(A.rows()); }
  void validate() const;  // throws on shape/invariant violations
};

enum class QpStatus { kOptimal, kMaxIter, kInfeasible };

const char* to_string(QpStatus s);

/// Result of a solve. Multipliers are signed qpOASES-style: positive when the
/// lower side is active, negative when the upper side is active, so that
/// stationarity reads  Hz + g = dual_bounds + A' dual_constraints.
struct QpSolution {
  Eigen::VectorXd primal;
  Eigen::VectorXd dual_bounds;       // size n
  Eigen::VectorXd dual_constraints;  // size m
  double kkt_residual = 0.0;
  QpStatus status = QpStatus::kOptimal;
  int iterations = 0;
  bool regularized = false;
  // Active-set snapshot used for warm starts: -1 lower, 0 inactive, +1 upper.
  std::vector<std::int8_t> bound_state;
  std::vector<std::int8_t> constraint_state;
  // For infeasible problems: per-row violation that could not be removed.
  Eigen::VectorXd infeasibility;
};

struct QpOptions {
  double tol = 1e-8;
  int max_iter = 0;  // 0 means 10 * num_vars
  double regularization = 1e-8;
  /// Called once per active-set iteration with the current objective value.
  std::function<void(int iter, double objective)> trace;
};

/// Primal active-set solver with a null-space step computation. An instance
/// owns mutable workspace; use one instance per thread.
class QpSolver {
 public:
  explicit QpSolver(QpOptions opts = {}) : opts_(std::move(opts)) {}

  QpSolution solve(const DenseQp& qp, const QpSolution* warm_start = nullptr);

  const QpOptions& options() const { return opts_; }
  QpOptions& options() { return opts_; }

 private:
  QpSolution run(const DenseQp& qp, const QpSolution* warm_start, bool phase1);

  QpOptions opts_;
};

/// Max over stationarity, primal feasibility, and complementarity violation.
double kkt_residual(const DenseQp& qp, const QpSolution& sol);

/// Plain-text dump for offline debugging.
void dump(const DenseQp& qp, std::ostream& os);

/// Thrown when a QP that must be feasible by construction is not; carries the
/// offending problem.
struct QpInfeasibleError : std::runtime_error {
  QpInfeasibleError(const std::string& msg, std::shared_ptr<const DenseQp> qp_)
      : std::runtime_error(msg), qp(std::move(qp_)) {}
  std::shared_ptr<const DenseQp> qp;
};

}  // namespace artic
