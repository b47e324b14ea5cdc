#pragma once

#include <string>

#include "artic/sim_log.hpp"

namespace artic {

struct ErrorStats {
  double mean = 0.0;
  double max = 0.0;
  long count = 0;
};

struct TimingStats {
  double mean = 0.0;
  double max = 0.0;
};

/// Aggregates of one run: time-based Euclidean errors per body and segment
/// class, execution-time statistics, and mean KKT residuals.
struct Metrics {
  std::string framework;
  ErrorStats tractor_straight, tractor_curve;
  ErrorStats trailer_straight, trailer_curve;
  TimingStats est_prep, est_fb, est_overall;
  TimingStats ctl_prep, ctl_fb, ctl_overall;
  TimingStats critical;
  double est_kkt_mean = 0.0;
  double ctl_kkt_mean = 0.0;
  long samples = 0;
  double duration_s = 0.0;
  double windup_s = 0.0;

  std::string format_table() const;
};

/// Errors are distances to the time-indexed reference point (not the closest
/// path point). The first windup_s seconds are excluded.
Metrics compute_metrics(const SimLog& log, double windup_s = 5.0);

/// Side-by-side execution-time and error tables for two runs.
std::string format_comparison(const Metrics& a, const Metrics& b);

}  // namespace artic
