#include "artic/run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "artic/errors.hpp"

namespace artic {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_num(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for '" + key + "': " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config: bad boolean value for '" + key + "': " + v);
}

}  // namespace

const char* to_string(Framework f) {
  return f == Framework::kNmheNmpc ? "nmhe-nmpc" : "isl-lmpc";
}

Framework framework_from_string(const std::string& s) {
  if (s == "nmhe-nmpc") return Framework::kNmheNmpc;
  if (s == "isl-lmpc") return Framework::kIslLmpc;
  throw ConfigError("config: unknown framework '" + s +
                    "' (expected nmhe-nmpc or isl-lmpc)");
}

void RunConfig::validate() const {
  model.validate();
  trajectory.validate(model);
  if (!(dt > 0.0)) throw ConfigError("config: dt must be > 0");
  const double ratio = horizon_s / dt;
  if (std::abs(ratio - std::lround(ratio)) > 1e-9 || ratio < 1.0) {
    throw ConfigError("config: horizon_s must be a positive multiple of dt");
  }
  if (laps < 1 && duration_s <= 0.0) {
    throw ConfigError("config: need laps >= 1 or duration_s > 0");
  }
  if (plant_substeps < 1 || controller_substeps < 1) {
    throw ConfigError("config: substeps must be >= 1");
  }
  if (threads != 1 && threads != 2) {
    throw ConfigError("config: threads must be 1 or 2");
  }
  if (!(traction.lo >= 0.0 && traction.hi <= 1.0 && traction.lo <= traction.hi)) {
    throw ConfigError("config: traction range must lie within [0, 1]");
  }
  if (windup_s < 0.0) throw ConfigError("config: windup_s must be >= 0");
}

void RunConfig::apply_key(const std::string& key, const std::string& value) {
  if (key == "framework") {
    framework = framework_from_string(value);
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(to_num(key, value));
  } else if (key == "laps") {
    laps = static_cast<int>(to_num(key, value));
  } else if (key == "dt") {
    dt = to_num(key, value);
  } else if (key == "duration_s") {
    duration_s = to_num(key, value);
  } else if (key == "horizon_s") {
    horizon_s = to_num(key, value);
  } else if (key == "windup_s") {
    windup_s = to_num(key, value);
  } else if (key == "plant_substeps") {
    plant_substeps = static_cast<int>(to_num(key, value));
  } else if (key == "controller_substeps") {
    controller_substeps = static_cast<int>(to_num(key, value));
  } else if (key == "threads") {
    threads = static_cast<int>(to_num(key, value));
  } else if (key == "trajectory.straight_len") {
    trajectory.straight_len = to_num(key, value);
  } else if (key == "trajectory.arc_radius") {
    trajectory.arc_radius = to_num(key, value);
  } else if (key == "trajectory.ref_speed") {
    trajectory.ref_speed = to_num(key, value);
  } else if (key == "trajectory.start_x" || key == "trajectory.start_y" ||
             key == "trajectory.start_psi") {
    std::array<double, 3> sp =
        trajectory.start_pose.value_or(std::array<double, 3>{0.0, 0.0, 0.0});
    if (key == "trajectory.start_x") sp[0] = to_num(key, value);
    if (key == "trajectory.start_y") sp[1] = to_num(key, value);
    if (key == "trajectory.start_psi") sp[2] = to_num(key, value);
    trajectory.start_pose = sp;
  } else if (key == "noise.enabled") {
    noise_enabled = to_bool(key, value);
  } else if (key == "noise.sigma_pos") {
    noise.sigma_pos = to_num(key, value);
  } else if (key == "noise.sigma_v") {
    noise.sigma_v = to_num(key, value);
  } else if (key == "noise.sigma_delta_t") {
    noise.sigma_delta_t = to_num(key, value);
  } else if (key == "noise.sigma_delta_i") {
    noise.sigma_delta_i = to_num(key, value);
  } else if (key == "noise.sigma_hp") {
    noise.sigma_hp = to_num(key, value);
  } else if (key == "noise.sigma_beta") {
    noise.sigma_beta = to_num(key, value);
  } else if (key == "traction.base") {
    traction.base = to_num(key, value);
  } else if (key == "traction.amplitude") {
    traction.amplitude = to_num(key, value);
  } else if (key == "traction.period_s") {
    traction.period_s = to_num(key, value);
  } else if (key == "traction.noise_amp") {
    traction.noise_amp = to_num(key, value);
  } else if (key == "traction.lo") {
    traction.lo = to_num(key, value);
  } else if (key == "traction.hi") {
    traction.hi = to_num(key, value);
  } else if (key == "traction.constant") {
    traction.constant = to_bool(key, value);
  } else if (key == "traction.mu") {
    traction.const_mu = to_num(key, value);
  } else if (key == "traction.kappa") {
    traction.const_kappa = to_num(key, value);
  } else if (key == "traction.eta") {
    traction.const_eta = to_num(key, value);
  } else if (key == "model.L_t") {
    model.L_t = to_num(key, value);
  } else if (key == "model.L_i") {
    model.L_i = to_num(key, value);
  } else if (key == "model.L_d") {
    model.L_d = to_num(key, value);
  } else if (key == "model.tau") {
    model.tau = to_num(key, value);
  } else if (key == "model.K") {
    model.K = to_num(key, value);
  } else if (key == "lmpc.symmetric_trailer_q") {
    lmpc_symmetric_trailer_q = to_bool(key, value);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not 'key = value'");
    }
    cfg.apply_key(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  apply_thread_env(cfg);
  return cfg;
}

void apply_thread_env(RunConfig& cfg) {
  if (const char* env = std::getenv("ARTIC_MPC_THREADS")) {
    const std::string v(env);
    if (v == "1") {
      cfg.threads = 1;
    } else if (v == "2") {
      cfg.threads = 2;
    } else {
      throw ConfigError("ARTIC_MPC_THREADS must be 1 or 2");
    }
  }
}

}  // namespace artic
