#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "artic/model.hpp"
#include "artic/rti.hpp"

namespace artic {

/// Extended (state; parameter) vector ordering used by the arrival cost:
/// (x_t, y_t, psi_t, x_i, y_i, psi_i, v, mu, kappa, eta, beta).
using Vec11 = Eigen::Matrix<double, 11, 1>;

/// Measurement weights H (inverse variances) and the per-channel forgetting
/// rates D_update of the arrival cost.
struct EstimatorWeights {
  Vec9 h_diag;
  Vec11 d_update;
  Vec11 p0_diag;  ///< initial arrival-cost weight

  static EstimatorWeights defaults(const NoiseSpec& noise = {});
};

/// Ring buffer of (measurement, applied input) pairs at fixed dt spacing.
class EstimationWindow {
 public:
  EstimationWindow(int capacity, double dt);

  /// Appends a pair; once full the oldest pair is evicted. Timestamps must
  /// advance by exactly dt.
  void push(const Measurement& m, const ControlInput& u, double t);

  bool full() const { return static_cast<int>(buf_.size()) == capacity_; }
  int size() const { return static_cast<int>(buf_.size()); }
  int capacity() const { return capacity_; }
  double dt() const { return dt_; }
  double latest_time() const;
  const Measurement& measurement(int j) const { return buf_.at(j).m; }  // 0 = oldest
  const ControlInput& input(int j) const { return buf_.at(j).u; }
  double time(int j) const { return buf_.at(j).t; }

 private:
  struct Entry {
    Measurement m;
    ControlInput u;
    double t;
  };
  std::deque<Entry> buf_;
  int capacity_;
  double dt_;
};

/// Quadratic prior anchoring the window start.
struct ArrivalCost {
  Vec11 prior = Vec11::Zero();
  Eigen::Matrix<double, 11, 11> P = Eigen::Matrix<double, 11, 11>::Identity();
};

/// Information-domain smoothing toward d_update: P <- (1-alpha) P + alpha
/// diag(d_update), followed by a spectral cap. The prior moves to new_prior.
ArrivalCost update_arrival_cost(const ArrivalCost& ac, const Vec11& new_prior,
                                const Vec11& d_update, double alpha = 0.5,
                                double cap = 1e6);

struct Estimate {
  VehicleState state;
  VaryingParams params;
  double kkt = 0.0;
  double timestamp = 0.0;
};

struct NmheOptions {
  double dt = 0.2;
  int N = 15;  // estimation horizon = N * dt
  int substeps = 1;
  double alpha = 0.5;
  double p_cap = 1e6;
  QpOptions qp;
};

/// Moving-horizon estimator for the full state plus (mu, kappa, eta, beta),
/// run as one Gauss-Newton iteration per sample through the RTI machinery.
/// Bounds 0 <= mu,kappa,eta <= 1 and |beta| <= 20 deg are enforced by the QP.
class NmheEstimator {
 public:
  NmheEstimator(const ModelConstants& c, const EstimatorWeights& w,
                NmheOptions opt = {});

  /// Feeds one (measurement, applied input) pair. The first push backfills
  /// the whole window (consistent with starting at rest) and initializes the
  /// prior: headings from the tractor-trailer baseline, traction at 1.
  void push_measurement(const Measurement& m, const ControlInput& u, double t);

  bool ready() const { return initialized_; }
  bool prepared() const { return rti_->phase() == rti::Phase::kPrepared; }

  /// Preparation phase for the upcoming sample; may run before the next
  /// measurement arrives.
  void prepare();

  /// Feedback phase: one QP with the current measurement stack, then the
  /// arrival-cost update. Requires prepare() first.
  Estimate estimate_step();

  const ArrivalCost& arrival_cost() const { return arrival_; }
  const EstimationWindow& window() const { return window_; }
  double last_prepare_ms() const { return rti_->last_prepare_ms(); }
  double last_feedback_ms() const { return last_feedback_ms_; }
  const EstimatorWeights& weights() const { return weights_; }

 private:
  void initialize_from_first(const Measurement& m, const ControlInput& u, double t);
  std::vector<rti::LsqTerm> build_terms(const rti::ShootingGrid& g) const;
  Eigen::VectorXd anchor_from_window() const;

  ModelConstants constants_;
  EstimatorWeights weights_;
  NmheOptions opt_;
  EstimationWindow window_;
  ArrivalCost arrival_;
  std::unique_ptr<rti::RtiSolver> rti_;
  bool initialized_ = false;
  double last_feedback_ms_ = 0.0;
};

}  // namespace artic
