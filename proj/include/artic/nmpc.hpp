#pragma once

#include <array>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "artic/model.hpp"
#include "artic/nmhe.hpp"
#include "artic/rti.hpp"
#include "artic/trajectory.hpp"

namespace artic {

/// Stage weights on the state error, input moves, and the terminal error.
struct ControllerWeights {
  Vec7 q_diag;
  Eigen::Vector3d r_diag;
  double terminal_factor = 10.0;

  Vec7 s_diag() const { return terminal_factor * q_diag; }
  static ControllerWeights defaults();
};

/// Decision structure of the rate-of-input penalty: moves m_k with
/// u_k = u_{k-1} + m_k, the first move anchored to the last applied input.
struct MoveFormulation {
  ControlInput prev;
  int N = 0;

  struct Range {
    double lo, hi;
  };
  /// Feasible interval of the first move per channel under the input box.
  std::array<Range, 3> first_move_bounds(const InputBounds& b) const;

  /// u_stack = move_to_abs() * m_stack + abs_offset()
  Eigen::MatrixXd move_to_abs() const;
  Eigen::VectorXd abs_offset() const;
  /// m_stack = abs_to_move() * u_stack + move_offset()
  Eigen::MatrixXd abs_to_move() const;
  Eigen::VectorXd move_offset() const;
};

MoveFormulation delta_u_formulation(const ControlInput& prev_u, int N);

struct NmpcOptions {
  double dt = 0.2;
  int N = 15;  // prediction horizon = N * dt
  int substeps = 1;
  InputBounds bounds;
  QpOptions qp;
};

struct ControlDiagnostics {
  double kkt = 0.0;
  QpStatus qp_status = QpStatus::kOptimal;
  double prepare_ms = 0.0;
  double feedback_ms = 0.0;
  std::vector<VehicleState> predicted;  // N+1 nodes
};

/// Nonlinear MPC over the 3 s horizon: stage cost on the state error, move
/// penalty on the inputs, terminal penalty S = 10 Q, input box bounds kept
/// inside the QP. One RTI feedback per sample with the estimate embedded as
/// the initial state.
class NmpcController {
 public:
  NmpcController(const ModelConstants& c, const ControllerWeights& w,
                 NmpcOptions opt = {});

  /// Cold start: seed the shooting grid from a reference window.
  void reset(const VehicleState& x0, const std::vector<ReferenceState>& refs,
             const VaryingParams& p);

  /// Parameters from the estimator; adopted at the next preparation.
  void set_params(const VaryingParams& p) { pending_params_ = p; }

  void prepare();
  bool prepared() const { return rti_->phase() == rti::Phase::kPrepared; }

  /// Feedback phase. refs must hold N+1 nodes aligned with the sample time.
  std::pair<ControlInput, ControlDiagnostics> control_step(
      const Estimate& x_hat, const std::vector<ReferenceState>& refs);

  const ControlInput& previous_input() const { return prev_u_; }
  double last_prepare_ms() const { return rti_->last_prepare_ms(); }
  const rti::RtiSolver& rti() const { return *rti_; }
  rti::RtiSolver& rti() { return *rti_; }

 private:
  std::vector<rti::LsqTerm> build_terms(const rti::ShootingGrid& g) const;

  ModelConstants constants_;
  ControllerWeights weights_;
  NmpcOptions opt_;
  std::unique_ptr<rti::RtiSolver> rti_;
  ControlInput prev_u_{};
  std::optional<VaryingParams> pending_params_;
};

}  // namespace artic
