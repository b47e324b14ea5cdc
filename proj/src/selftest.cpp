#include "artic/selftest.hpp"

#include <cmath>
#include <random>

#include "artic/harness.hpp"
#include "artic/isl.hpp"
#include "artic/testing/oracles.hpp"
#include "artic/vehicle_ode.hpp"

namespace artic {

namespace {

struct Reporter {
  std::ostream& os;
  int failures = 0;
  void check(const char* name, bool ok) {
    os << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  }
};

bool check_model_values() {
  const ModelConstants c;
  {
    const VehicleState s{0, 0, 0, 0, 0, 0, 1.0};
    const Vec7 dx = dynamics(s, ControlInput{0, 0, 0},
                             VaryingParams{1, 1, 1, 0}, c);
    Vec7 want;
    want << 1, 0, 0, 1, 0, 0, -1.0 / 2.05;
    if ((dx - want).cwiseAbs().maxCoeff() > 1e-12) return false;
  }
  {
    const VehicleState s{0, 0, 0, 0, 0, 0, 1.0};
    const Vec7 dx = dynamics(s, ControlInput{0.1, 0, 0},
                             VaryingParams{1, 1, 1, 0}, c);
    if (std::abs(dx[2] - std::tan(0.1) / 1.4) > 1e-12) return false;
  }
  {
    VehicleState s{};
    s = integrate(s, ControlInput{0, 0, 50.0}, VaryingParams{1, 1, 1, 0}, c,
                  60.0, 300);
    if (std::abs(s.v - 0.016 * 50.0) > 1e-6) return false;
  }
  return true;
}

bool check_qp_oracle(int instances) {
  std::mt19937_64 rng(424242);
  QpSolver solver;
  for (int i = 0; i < instances; ++i) {
    const DenseQp qp = testing::random_feasible_qp(rng);
    const auto want = testing::brute_force_qp(qp);
    if (!want) return false;
    const QpSolution got = solver.solve(qp);
    if (got.status != QpStatus::kOptimal) return false;
    if ((got.primal - *want).cwiseAbs().maxCoeff() > 1e-6) return false;
  }
  return true;
}

bool check_sensitivities(int points) {
  const ModelConstants c;
  const auto model = std::make_shared<VehicleOde>(c);
  std::mt19937_64 rng(7);
  auto u01 = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int i = 0; i < points; ++i) {
    Eigen::VectorXd x(7), u(3), p(4);
    x << 4.0 * u01() - 2.0, 4.0 * u01() - 2.0, 2.0 * u01() - 1.0,
        4.0 * u01() - 2.0, 4.0 * u01() - 2.0, 2.0 * u01() - 1.0,
        2.0 * u01();
    u << deg2rad(70.0) * u01() - deg2rad(35.0),
        deg2rad(50.0) * u01() - deg2rad(25.0), 100.0 * u01();
    p << u01(), u01(), u01(), 2.0 * kBetaMax * u01() - kBetaMax;
    Eigen::MatrixXd A, B, C;
    rti::rk4_step(*model, x, u, p, 0.2, 1, &A, &B, &C);
    const auto fd = testing::fd_step_jacobians(*model, x, u, p, 0.2, 1);
    if (testing::rel_err(A, fd.A) > 1e-4 || testing::rel_err(B, fd.B) > 1e-4 ||
        testing::rel_err(C, fd.C) > 1e-4) {
      return false;
    }
  }
  return true;
}

bool check_isl() {
  const ModelConstants c;
  if (LinearSystem::damped(c.tau).controllability_rank() != 8) return false;
  // Trailer-only virtual input with the arcsin argument at zero: the tractor
  // block must follow the virtual chains to integration accuracy.
  VehicleState s{1.0, -2.0, 0.4, 0.0, -2.5, 0.45, 0.9};
  const double beta = s.psi_i - s.psi_t;  // delta_i = -beta => delta_i + beta = 0
  VirtualInput uz;
  uz.u << 0.0, 0.0, 0.5 * std::cos(s.psi_i), 0.5 * std::sin(s.psi_i);
  const auto chk = verify_linearization(s, beta, uz, 0.2, c, 8);
  return chk.tractor_err <= 1e-6;
}

bool check_determinism() {
  RunConfig cfg;
  cfg.duration_s = 8.0;
  cfg.seed = 99;
  const SimLog a = run_closed_loop(cfg);
  const SimLog b = run_closed_loop(cfg);
  if (!a.same_dynamics(b)) return false;
  RunConfig isl = cfg;
  isl.framework = Framework::kIslLmpc;
  const SimLog c2 = run_closed_loop(isl);
  return c2.rows.size() == a.rows.size();
}

}  // namespace

int selftest(std::ostream& os) {
  Reporter r{os};
  r.check("model: frozen dynamics values", check_model_values());
  r.check("qp: active set matches enumeration (50 instances)",
          check_qp_oracle(50));
  r.check("rti: RK4 sensitivities match finite differences (25 points)",
          check_sensitivities(25));
  r.check("isl: controllability and tractor-block exactness", check_isl());
  r.check("harness: bit-identical rerun with fixed seed", check_determinism());
  os << (r.failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return r.failures;
}

}  // namespace artic
