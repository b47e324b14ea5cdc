#pragma once

#include <random>

#include "artic/run_config.hpp"
#include "artic/sim_log.hpp"

namespace artic {

/// Time-varying ground-truth traction; phases are drawn once from the run RNG
/// so the schedule is deterministic per seed.
class TractionSchedule {
 public:
  TractionSchedule(const TractionScheduleConfig& cfg, std::mt19937_64& rng);

  void sample(double t, double* mu, double* kappa, double* eta) const;

 private:
  TractionScheduleConfig cfg_;
  struct Channel {
    double phase;
    double noise_phase[3];
    double noise_freq[3];
  };
  Channel ch_[3];
  double value(int channel, double t) const;
};

/// Runs the closed loop: synthetic plant with the true traction schedule and
/// sensor noise, the selected estimator/controller pipeline with its
/// preparation/feedback split, and a one-sample actuation delay.
SimLog run_closed_loop(const RunConfig& cfg);

}  // namespace artic
