#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "artic/qp.hpp"

namespace artic::rti {

/// Continuous-time ODE with analytic Jacobians, runtime-sized so the same
/// machinery serves the vehicle model and test systems.
class OdeModel {
 public:
  virtual ~OdeModel() = default;
  virtual int nx() const = 0;
  virtual int nu() const = 0;
  virtual int np() const = 0;
  /// Writes dx = f(x, u, p); fills any non-null Jacobian (nx*nx, nx*nu, nx*np).
  virtual void eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& p, Eigen::VectorXd& dx,
                    Eigen::MatrixXd* fx, Eigen::MatrixXd* fu,
                    Eigen::MatrixXd* fp) const = 0;
};

/// RK4 step map over [0, dt] with zero-order-hold u and p. When A/B/C are
/// non-null they receive the exact forward sensitivities of the discrete map,
/// obtained by differentiating the RK4 stages (not by finite differences).
Eigen::VectorXd rk4_step(const OdeModel& m, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                         double dt, int substeps, Eigen::MatrixXd* A = nullptr,
                         Eigen::MatrixXd* B = nullptr,
                         Eigen::MatrixXd* C = nullptr);

/// Multiple-shooting iterate: node states, interval inputs, global parameters.
struct ShootingGrid {
  double dt = 0.2;
  int N = 15;
  std::vector<Eigen::VectorXd> x;  // N+1 node states
  std::vector<Eigen::VectorXd> u;  // N interval inputs
  Eigen::VectorXd p;

  /// Advance one sample: drop node 0, duplicate the last node and input.
  void shift_duplicate_last();
  bool all_finite() const;
};

/// Per-interval linearization of the shooting constraints around the grid.
struct LinearizedOcp {
  int N = 0, nx = 0, nu = 0, np = 0;
  std::vector<Eigen::MatrixXd> A;       // d x_end / d x_k
  std::vector<Eigen::MatrixXd> B;       // d x_end / d u_k
  std::vector<Eigen::MatrixXd> C;       // d x_end / d p (empty without params)
  std::vector<Eigen::VectorXd> defect;  // x[k+1] - Phi(x_k, u_k, p)
  std::vector<Eigen::VectorXd> x_end;   // Phi(x_k, u_k, p)
};

/// Integrates every interval from its node guess and differentiates the step
/// maps. Throws LinearizationError if integration blows up.
LinearizedOcp shoot_and_linearize(const ShootingGrid& grid, const OdeModel& m,
                                  int substeps, bool with_params);

/// One weighted least-squares block 0.5*||r||^2_diag(w) with
///   r = r0 + sum_i jx[i] dx_node + sum_j ju[j] du_interval + jp dp
///       - anchor[anchor_offset : anchor_offset + nr]
/// Anchor entries are feedback-time data (measurements, references, the
/// embedded initial state); everything else is fixed during preparation.
struct LsqTerm {
  Eigen::VectorXd w;
  Eigen::VectorXd r0;
  std::vector<std::pair<int, Eigen::MatrixXd>> jx;
  std::vector<std::pair<int, Eigen::MatrixXd>> ju;
  Eigen::MatrixXd jp;
  int anchor_offset = -1;
};

/// Static shape of a condensed problem.
struct ProblemLayout {
  bool x0_is_variable = false;  // NMHE: yes, NMPC: embedded from the anchor
  bool p_is_variable = false;
  int anchor_dim = 0;
  int x0_anchor_offset = 0;  // where the initial state sits in the anchor
  Eigen::VectorXd u_lb, u_ub;  // absolute input box, size nu
  Eigen::VectorXd p_lb, p_ub;  // absolute parameter box (when p_is_variable)
};

/// Dense QP in the non-eliminated variables z = [dx0?; dp?; du_0..du_{N-1}]
/// plus the affine maps needed to re-expand states and to inject the anchor.
struct CondensedQp {
  DenseQp qp;                   // qp.g is the zero-anchor gradient
  Eigen::MatrixXd g_anchor;     // gradient = qp.g + g_anchor * anchor
  std::vector<Eigen::VectorXd> exp_const;   // per node
  std::vector<Eigen::MatrixXd> exp_z;
  std::vector<Eigen::MatrixXd> exp_anchor;
  int nz = 0, off_x0 = -1, off_p = -1, off_u = 0;
  int N = 0, nx = 0, nu = 0, np = 0;
};

/// Eliminates state deviations through the linearized dynamics, leaving the
/// inputs (and, when configured, the initial state and parameters) as QP
/// variables. Expanding the optimum reproduces the linearized dynamics
/// exactly.
CondensedQp condense(const ShootingGrid& grid, const LinearizedOcp& lin,
                     const std::vector<LsqTerm>& terms,
                     const ProblemLayout& layout);

enum class Phase { kAwaitingPreparation, kPrepared };

struct FeedbackResult {
  std::vector<Eigen::VectorXd> x;  // updated absolute trajectory
  std::vector<Eigen::VectorXd> u;
  Eigen::VectorXd p;
  Eigen::VectorXd z;
  double kkt = 0.0;
  QpStatus qp_status = QpStatus::kOptimal;
  double feedback_ms = 0.0;
};

struct RtiConfig {
  int substeps = 1;
  ProblemLayout layout;
  QpOptions qp;
  bool auto_shift = true;
};

/// Real-time iteration driver: one Gauss-Newton iteration per sample, split
/// into a preparation phase (integrate, linearize, condense) and a feedback
/// phase (inject the anchor, solve a single QP, expand).
class RtiSolver {
 public:
  using TermsBuilder = std::function<std::vector<LsqTerm>(const ShootingGrid&)>;

  RtiSolver(std::shared_ptr<const OdeModel> model, RtiConfig cfg,
            TermsBuilder terms_builder);

  ShootingGrid& grid() { return grid_; }
  const ShootingGrid& grid() const { return grid_; }
  Phase phase() const { return phase_; }
  void set_auto_shift(bool v) { cfg_.auto_shift = v; }

  /// Invoked on the grid right after the shift, before linearization. Lets
  /// clients refresh guesses with data that became known since the last
  /// feedback (e.g. the most recent applied input).
  void set_post_shift(std::function<void(ShootingGrid&)> f) {
    post_shift_ = std::move(f);
  }

  /// Shift (if a feedback happened since the last preparation), linearize and
  /// condense. Re-preparation without an intervening feedback overwrites the
  /// cached QP without shifting again.
  void prepare();

  /// Requires phase == kPrepared. Solves one QP with the anchor injected into
  /// the cached gradient, expands, and adopts the result as the next iterate.
  FeedbackResult feedback(const Eigen::VectorXd& anchor);

  double last_prepare_ms() const { return prepare_ms_; }
  const CondensedQp& prepared_qp() const;

 private:
  std::shared_ptr<const OdeModel> model_;
  RtiConfig cfg_;
  TermsBuilder terms_builder_;
  std::function<void(ShootingGrid&)> post_shift_;
  ShootingGrid grid_;
  CondensedQp cqp_;
  QpSolver qp_solver_;
  QpSolution last_qp_solution_;
  bool have_warm_ = false;
  Phase phase_ = Phase::kAwaitingPreparation;
  bool shift_pending_ = false;
  double prepare_ms_ = 0.0;
};

}  // namespace artic::rti
