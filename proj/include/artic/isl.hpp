#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "artic/model.hpp"
#include "artic/qp.hpp"
#include "artic/trajectory.hpp"

namespace artic {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat88 = Eigen::Matrix<double, 8, 8>;
using Mat84 = Eigen::Matrix<double, 8, 4>;

inline constexpr double kIslVMin = 0.05;  ///< speed guard for the 1/v^2 terms
inline constexpr double kUzCap = 5.0;     ///< virtual acceleration cap [m/s^2]

/// Transformed coordinates: positions and velocity components of both bodies.
struct LinearState {
  Vec8 z = Vec8::Zero();
};

/// Virtual accelerations of the linear system.
struct VirtualInput {
  Eigen::Vector4d u = Eigen::Vector4d::Zero();
};

/// z = (x_t, y_t, v cos psi_t, v sin psi_t, x_i, y_i, v cos psi_i, v sin psi_i)
LinearState state_transform(const VehicleState& s);

/// Inverse of state_transform; valid for v > 0.
VehicleState inverse_state_transform(const LinearState& z);

/// z-reference derived from a trajectory node.
LinearState reference_to_z(const ReferenceState& r);

/// The virtual linear model: double-integrator chains with -1/tau damping on
/// the velocity states, outputs the four positions.
struct LinearSystem {
  Mat88 A = Mat88::Zero();
  Mat84 B = Mat84::Zero();
  Eigen::Matrix<double, 4, 8> C = Eigen::Matrix<double, 4, 8>::Zero();

  static LinearSystem damped(double tau);
  /// RK4-equivalent zero-order-hold discretization.
  void discretize_rk4(double dt, int substeps, Mat88* Ad, Mat84* Bd) const;
  int controllability_rank() const;
};

/// Raised when the input transform is evaluated below the speed guard; the
/// caller is expected to hold the last input.
struct LowSpeedError : std::runtime_error {
  explicit LowSpeedError(double v)
      : std::runtime_error("input transform below speed guard"), speed(v) {}
  double speed;
};

/// Flags recording saturations during one transform evaluation.
struct IslEvents {
  bool uz_capped = false;
  bool arcsin_clamped = false;
  bool input_clamped = false;
};

/// Closed-form map from virtual accelerations to real inputs. Virtual inputs
/// are capped to +-kUzCap first; the arcsin argument is clamped into [-1, 1];
/// the result is clamped into the input box. All saturations are reported.
ControlInput input_transform(const VehicleState& s, double beta,
                             const VirtualInput& uz, const ModelConstants& c,
                             const InputBounds& bounds = {},
                             IslEvents* events = nullptr);

struct LinearizationCheck {
  Vec8 z_nonlinear = Vec8::Zero();
  Vec8 z_virtual = Vec8::Zero();
  double tractor_err = 0.0;  // inf-norm over z1..z4
  double trailer_err = 0.0;  // inf-norm over z5..z8
};

/// Integrates the traction-free nonlinear model under the (zero-order-hold)
/// transformed input and the ideal virtual chains under uz for one step, and
/// returns the discrepancy in z coordinates. The tractor block is exact up to
/// integration error when the inputs stay constant-consistent; the trailer
/// block carries the small-angle and shared-throttle approximations.
LinearizationCheck verify_linearization(const VehicleState& s, double beta,
                                        const VirtualInput& uz, double dt,
                                        const ModelConstants& c,
                                        int substeps = 8);

struct EkfOptions {
  Vec7 process_rates;  // covariance growth rates per second
  NoiseSpec noise;
  double init_cov = 1.0;

  static EkfOptions defaults();
};

/// Extended Kalman filter on the traction-free model (mu = kappa = eta = 1,
/// beta taken from the measurement). Positions and wheel speed update the
/// state; covariance is symmetrized every step and reset if it loses
/// positive semidefiniteness.
class Ekf {
 public:
  Ekf(const ModelConstants& c, EkfOptions opt = EkfOptions::defaults());

  void init(const VehicleState& mean, double cov_diag);
  bool initialized() const { return initialized_; }

  /// One predict (with the applied input and measured beta) + update cycle.
  void step(const Measurement& m, const ControlInput& u, double dt,
            int substeps = 1);

  const VehicleState& mean() const { return mean_; }
  const Mat77& covariance() const { return cov_; }
  bool last_reset() const { return last_reset_; }

 private:
  ModelConstants c_;
  EkfOptions opt_;
  VehicleState mean_{};
  Mat77 cov_ = Mat77::Identity();
  bool initialized_ = false;
  bool last_reset_ = false;
};

struct LmpcWeights {
  Vec8 q_diag;
  Eigen::Vector4d r_diag;
  double terminal_factor = 10.0;
  /// The printed weights leave the trailer y position at 0.0; this switch
  /// mirrors the 0.01 of the trailer x position onto it.
  bool symmetric_trailer_q = false;

  static LmpcWeights defaults();
  Vec8 effective_q() const;
};

struct LmpcOptions {
  double dt = 0.2;
  int N = 15;
  int substeps = 1;
  double vel_bound = 2.0;     // |z3|, |z4|, |z7|, |z8| <= 2 m/s
  double slack_weight = 1e4;  // quadratic penalty softening the bounds
  QpOptions qp;
};

struct LmpcDiagnostics {
  double kkt = 0.0;
  QpStatus qp_status = QpStatus::kOptimal;
  double prepare_ms = 0.0;
  double feedback_ms = 0.0;
  bool slack_active = false;
};

/// Condensed linear MPC on the virtual model: the Hessian, constraint rows
/// and anchor maps are assembled once; per sample only the gradient and the
/// bound vectors move. Velocity bounds are softened by one shared slack.
class LmpcController {
 public:
  LmpcController(const ModelConstants& c, const LmpcWeights& w,
                 LmpcOptions opt = {});

  void reset(const Eigen::Vector4d& prev_uz);

  /// Preparation phase: fold the reference window into the gradient.
  void prepare(const std::vector<ReferenceState>& refs);
  bool prepared() const { return prepared_; }

  /// Feedback phase: inject the state, solve one QP, return the first input.
  std::pair<VirtualInput, LmpcDiagnostics> step(const LinearState& z_hat);

  const Eigen::Vector4d& prev_uz() const { return prev_uz_; }
  double last_prepare_ms() const { return prepare_ms_; }
  const LinearSystem& system() const { return sys_; }

 private:
  LmpcWeights weights_;
  LmpcOptions opt_;
  LinearSystem sys_;
  Mat88 Ad_;
  Mat84 Bd_;

  // Constant condensed data.
  int nz_ = 0;                  // 4N inputs + 1 slack
  Eigen::MatrixXd H_;
  Eigen::MatrixXd g_ref_;       // gradient = g_ref * refstack + g_z0 * z0 + g_prev * prev
  Eigen::MatrixXd g_z0_;
  Eigen::MatrixXd g_prev_;
  Eigen::MatrixXd Arows_;       // velocity rows over (inputs, slack)
  Eigen::MatrixXd bound_z0_;    // row value offset E_k z0 per constraint row
  Eigen::VectorXd bound_base_lo_, bound_base_hi_;

  Eigen::VectorXd g_partial_;   // after prepare(): reference part folded in
  Eigen::Vector4d prev_uz_ = Eigen::Vector4d::Zero();
  bool prepared_ = false;
  double prepare_ms_ = 0.0;
  QpSolver qp_solver_;
  QpSolution warm_;
  bool have_warm_ = false;
};

}  // namespace artic
