#include "artic/harness.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

#include "artic/errors.hpp"
#include "artic/isl.hpp"
#include "artic/nmhe.hpp"
#include "artic/nmpc.hpp"
#include "artic/random.hpp"

namespace artic {

TractionSchedule::TractionSchedule(const TractionScheduleConfig& cfg,
                                   std::mt19937_64& rng)
    : cfg_(cfg) {
  auto u01 = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  for (auto& ch : ch_) {
    ch.phase = 2.0 * kPi * u01();
    for (int j = 0; j < 3; ++j) {
      ch.noise_phase[j] = 2.0 * kPi * u01();
      // Slow perturbations, 2-5 cycles per traction period.
      ch.noise_freq[j] = (2.0 + 3.0 * u01()) / cfg_.period_s;
    }
  }
}

double TractionSchedule::value(int channel, double t) const {
  const Channel& ch = ch_[channel];
  double v = cfg_.base +
             cfg_.amplitude * std::sin(2.0 * kPi * t / cfg_.period_s + ch.phase);
  for (int j = 0; j < 3; ++j) {
    v += cfg_.noise_amp / 3.0 *
         std::sin(2.0 * kPi * ch.noise_freq[j] * t + ch.noise_phase[j]);
  }
  return std::clamp(v, cfg_.lo, cfg_.hi);
}

void TractionSchedule::sample(double t, double* mu, double* kappa,
                              double* eta) const {
  if (cfg_.constant) {
    *mu = cfg_.const_mu;
    *kappa = cfg_.const_kappa;
    *eta = cfg_.const_eta;
    return;
  }
  *mu = value(0, t);
  *kappa = value(1, t);
  *eta = value(2, t);
}

namespace {

/// Plant step: RK4 with the drawbar angle re-derived from the state at every
/// stage (beta = psi_i - psi_t - delta_i is a geometric quantity, not a
/// state).
VehicleState plant_step(const VehicleState& s, const ControlInput& u, double mu,
                        double kappa, double eta, const ModelConstants& c,
                        double dt, int substeps) {
  auto f = [&](const VehicleState& x) {
    const VaryingParams p{mu, kappa, eta, x.psi_i - x.psi_t - u.delta_i};
    return dynamics(x, u, p, c);
  };
  const double h = dt / substeps;
  VehicleState cur = s;
  for (int i = 0; i < substeps; ++i) {
    const Vec7 x0 = cur.vec();
    const Vec7 k1 = f(cur);
    const Vec7 k2 = f(VehicleState::from_vec(x0 + 0.5 * h * k1));
    const Vec7 k3 = f(VehicleState::from_vec(x0 + 0.5 * h * k2));
    const Vec7 k4 = f(VehicleState::from_vec(x0 + h * k3));
    cur = VehicleState::from_vec(x0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
  return cur;
}

Measurement add_noise(const Measurement& m, const NoiseSpec& spec,
                      GaussianSampler& rng) {
  Vec9 y = m.vec();
  const Vec9 sig = spec.stddev_vec();
  for (int i = 0; i < 9; ++i) y[i] += sig[i] * rng.next();
  return Measurement::from_vec(y);
}

void append_event(std::string& events, const char* tag) {
  if (!events.empty()) events += ';';
  events += tag;
}

}  // namespace

SimLog run_closed_loop(const RunConfig& cfg) {
  cfg.validate();
  const ModelConstants& mc = cfg.model;
  const TimedReference traj = build_eight(cfg.trajectory, cfg.dt, mc);
  const int n_samples =
      cfg.duration_s > 0.0
          ? static_cast<int>(std::ceil(cfg.duration_s / cfg.dt))
          : static_cast<int>(std::ceil(cfg.laps * traj.lap_time() / cfg.dt));
  const int N = static_cast<int>(std::lround(cfg.horizon_s / cfg.dt));

  GaussianSampler rng(cfg.seed);
  const TractionSchedule traction(cfg.traction, rng.engine());

  SimLog log;
  log.framework = to_string(cfg.framework);
  log.dt = cfg.dt;
  log.rows.reserve(n_samples);

  // Plant truth starts at rest on the reference start pose.
  const ReferenceState r0 = traj.sample(0.0);
  VehicleState truth{r0.x_t_r, r0.y_t_r, r0.psi_t_r,
                     r0.x_i_r, r0.y_i_r, r0.psi_i_r, 0.0};

  const InputBounds bounds;
  // Engaging the throttle at the steady value for the reference speed; this
  // also carries the ISL framework through its low-speed spin-up.
  const ControlInput startup{
      0.0, 0.0, std::clamp(cfg.trajectory.ref_speed / mc.K, 0.0, 100.0)};
  ControlInput u_next = startup;         // drives [t_k, t_k+dt)
  ControlInput u_prev_interval{0, 0, 0}; // drove [t_k-dt, t_k)

  // Framework components.
  NmheEstimator nmhe(mc, EstimatorWeights::defaults(cfg.noise),
                     NmheOptions{cfg.dt, N, cfg.controller_substeps, 0.5, 1e6,
                                 QpOptions{}});
  NmpcController nmpc(mc, ControllerWeights::defaults(),
                      NmpcOptions{cfg.dt, N, cfg.controller_substeps, bounds,
                                  QpOptions{}});
  EkfOptions ekf_opt = EkfOptions::defaults();
  ekf_opt.noise = cfg.noise;
  Ekf ekf(mc, ekf_opt);
  LmpcWeights lw = LmpcWeights::defaults();
  lw.symmetric_trailer_q = cfg.lmpc_symmetric_trailer_q;
  LmpcController lmpc(mc, lw,
                      LmpcOptions{cfg.dt, N, cfg.controller_substeps, 2.0, 1e4,
                                  QpOptions{}});
  lmpc.reset(Eigen::Vector4d::Zero());

  for (int k = 0; k < n_samples; ++k) {
    const double t = k * cfg.dt;
    SimRow row;
    row.k = k;
    row.t = t;
    row.truth = truth;
    traction.sample(t, &row.mu_true, &row.kappa_true, &row.eta_true);
    row.beta_true = truth.psi_i - truth.psi_t - u_next.delta_i;
    if (std::abs(row.beta_true) > kBetaMax + 1e-9) {
      throw SimAbort(k, "drawbar angle left its bound: beta = " +
                            std::to_string(row.beta_true));
    }
    row.ref = traj.sample(t);

    const Measurement clean = output_map(
        truth, u_next, VaryingParams{row.mu_true, row.kappa_true, row.eta_true,
                                     row.beta_true});
    row.meas = cfg.noise_enabled ? add_noise(clean, cfg.noise, rng) : clean;

    // The command computed now is applied one sample later; the controllers
    // therefore run against the one-step-ahead prediction and the reference
    // window starting at t + dt.
    const std::vector<ReferenceState> refs =
        sample_window(traj, t + cfg.dt, cfg.horizon_s, cfg.dt);

    ControlInput u_cmd{};
    if (cfg.framework == Framework::kNmheNmpc) {
      nmhe.push_measurement(row.meas, u_next, t);
      if (!nmhe.prepared()) nmhe.prepare();  // cold start only
      const Estimate est = nmhe.estimate_step();
      row.est = est.state;
      row.mu_est = est.params.mu;
      row.kappa_est = est.params.kappa;
      row.eta_est = est.params.eta;
      row.beta_est = est.params.beta;
      row.est_kkt = est.kkt;
      row.est_fb_ms = nmhe.last_feedback_ms();

      Estimate ahead = est;
      ahead.state = integrate(est.state, u_next, est.params, mc, cfg.dt,
                              cfg.controller_substeps);
      ahead.timestamp = t + cfg.dt;

      if (k == 0) {
        nmpc.reset(ahead.state, refs, est.params);
        nmpc.prepare();
      }

      ControlDiagnostics diag;
      if (cfg.threads == 2) {
        // The NMHE preparation for the next sample overlaps the NMPC
        // feedback, mirroring the two-core pipeline.
        auto prep = std::async(std::launch::async, [&nmhe] { nmhe.prepare(); });
        std::tie(u_cmd, diag) = nmpc.control_step(ahead, refs);
        prep.get();
      } else {
        std::tie(u_cmd, diag) = nmpc.control_step(ahead, refs);
        nmhe.prepare();
      }
      nmpc.set_params(est.params);
      nmpc.prepare();

      row.ctl_kkt = diag.kkt;
      row.ctl_fb_ms = diag.feedback_ms;
      row.ctl_prep_ms = nmpc.last_prepare_ms();
      row.est_prep_ms = nmhe.last_prepare_ms();
      row.critical_ms = std::max(row.est_prep_ms, row.ctl_prep_ms) +
                        row.est_fb_ms + row.ctl_fb_ms;
    } else {
      const auto ekf_t0 = std::chrono::steady_clock::now();
      if (!ekf.initialized()) {
        const Measurement& m = row.meas;
        const double psi_t0 = std::atan2(m.y_t - m.y_i, m.x_t - m.x_i);
        const double psi_i0 = psi_t0 + m.beta + m.delta_i;
        ekf.init(VehicleState{m.x_t, m.y_t, psi_t0, m.x_i, m.y_i, psi_i0, m.v},
                 1.0);
      } else {
        ekf.step(row.meas, u_prev_interval, cfg.dt, cfg.controller_substeps);
        if (ekf.last_reset()) append_event(row.events, "ekf_cov_reset");
      }
      row.est_fb_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - ekf_t0)
                          .count();
      const VehicleState est = ekf.mean();
      row.est = est;
      row.mu_est = 1.0;
      row.kappa_est = 1.0;
      row.eta_est = 1.0;
      row.beta_est = row.meas.beta;

      // One-step-ahead prediction on the traction-free model (same delay
      // compensation as the other framework).
      const VehicleState ahead =
          integrate(est, u_next, VaryingParams{1.0, 1.0, 1.0, row.meas.beta},
                    mc, cfg.dt, cfg.controller_substeps);

      lmpc.prepare(refs);
      auto [uz, diag] = lmpc.step(state_transform(ahead));
      if (diag.slack_active) append_event(row.events, "slack_active");
      row.ctl_kkt = diag.kkt;
      row.ctl_prep_ms = diag.prepare_ms;
      row.ctl_fb_ms = diag.feedback_ms;
      row.critical_ms = row.est_fb_ms + row.ctl_prep_ms + row.ctl_fb_ms;

      try {
        IslEvents ev;
        u_cmd = input_transform(ahead, row.meas.beta, uz, mc, bounds, &ev);
        if (ev.uz_capped) append_event(row.events, "uz_cap");
        if (ev.arcsin_clamped) append_event(row.events, "arcsin_clamp");
        if (ev.input_clamped) append_event(row.events, "input_clamp");
      } catch (const LowSpeedError&) {
        u_cmd = u_next;  // hold the last applied input through spin-up
        append_event(row.events, "low_speed_hold");
      }
    }

    if (!u_cmd.all_finite() || !row.est.all_finite()) {
      throw SimAbort(k, "non-finite controller output or estimate");
    }

    row.u_cmd = u_cmd;
    row.u_applied = u_next;

    truth = plant_step(truth, u_next, row.mu_true, row.kappa_true,
                       row.eta_true, mc, cfg.dt, cfg.plant_substeps);
    if (!truth.all_finite()) {
      throw SimAbort(k, "plant state diverged");
    }

    log.rows.push_back(std::move(row));
    u_prev_interval = u_next;
    u_next = u_cmd;
  }
  return log;
}

}  // namespace artic
