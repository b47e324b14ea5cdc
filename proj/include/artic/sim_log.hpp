#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "artic/model.hpp"
#include "artic/trajectory.hpp"

namespace artic {

/// One closed-loop sample. u_applied drove the plant over [t, t+dt); u_cmd is
/// the input computed this sample (applied one sample later).
struct SimRow {
  int k = 0;
  double t = 0.0;
  VehicleState truth;
  double mu_true = 1.0, kappa_true = 1.0, eta_true = 1.0, beta_true = 0.0;
  Measurement meas;
  VehicleState est;
  double mu_est = 1.0, kappa_est = 1.0, eta_est = 1.0, beta_est = 0.0;
  ControlInput u_cmd;
  ControlInput u_applied;
  ReferenceState ref;
  double est_prep_ms = 0.0, est_fb_ms = 0.0;
  double ctl_prep_ms = 0.0, ctl_fb_ms = 0.0;
  double critical_ms = 0.0;
  double est_kkt = 0.0, ctl_kkt = 0.0;
  std::string events;
};

/// Fixed-schema closed-loop record.
struct SimLog {
  std::string framework;
  double dt = 0.2;
  std::vector<SimRow> rows;

  static const char* header();
  void write_csv(std::ostream& os) const;
  static SimLog read_csv(std::istream& is);

  /// Equality over everything except wall-clock timing columns.
  bool same_dynamics(const SimLog& other) const;
};

}  // namespace artic
