#pragma once

#include <cstdint>
#include <string>

#include "artic/model.hpp"
#include "artic/trajectory.hpp"

namespace artic {

enum class Framework { kNmheNmpc, kIslLmpc };

const char* to_string(Framework f);
Framework framework_from_string(const std::string& s);

/// Synthetic traction schedule: independent slow sinusoids per channel plus a
/// small seeded smooth perturbation, clamped into [lo, hi].
struct TractionScheduleConfig {
  double base = 0.9;
  double amplitude = 0.1;
  double period_s = 60.0;
  double noise_amp = 0.02;
  double lo = 0.8;
  double hi = 1.0;
  bool constant = false;  // override with fixed values (tests, identifiability)
  double const_mu = 1.0;
  double const_kappa = 1.0;
  double const_eta = 1.0;
};

/// Full description of one closed-loop run.
struct RunConfig {
  Framework framework = Framework::kNmheNmpc;
  EightTrajectoryConfig trajectory;
  ModelConstants model;
  NoiseSpec noise;
  bool noise_enabled = true;
  TractionScheduleConfig traction;
  std::uint64_t seed = 1;
  int laps = 2;
  double dt = 0.2;
  double duration_s = 0.0;  ///< overrides laps when > 0 (short test runs)
  double horizon_s = 3.0;
  int plant_substeps = 8;
  int controller_substeps = 1;
  double windup_s = 5.0;
  bool lmpc_symmetric_trailer_q = false;
  int threads = 1;  ///< 1 = logical pipeline, 2 = concurrent NMHE/NMPC phases

  void validate() const;

  /// Flat key-value file: one `key = value` per line, '#' comments.
  static RunConfig from_file(const std::string& path);

  /// Applies one key (the file grammar); throws ConfigError on unknown keys.
  void apply_key(const std::string& key, const std::string& value);
};

/// Reads ARTIC_MPC_THREADS (1 or 2) into cfg.threads when the variable is set.
void apply_thread_env(RunConfig& cfg);

}  // namespace artic
