#include "artic/model.hpp"

#include <cmath>

#include "artic/errors.hpp"

namespace artic {

void ModelConstants::validate() const {
  if (!(L_t > 0.0 && L_i > 0.0 && L_d > 0.0 && tau > 0.0 && K > 0.0)) {
    throw ConfigError("model constants must be strictly positive");
  }
}

Vec7 VehicleState::vec() const {
  Vec7 x;
  x << x_t, y_t, psi_t, x_i, y_i, psi_i, v;
  return x;
}

VehicleState VehicleState::from_vec(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return {x[0], x[1], x[2], x[3], x[4], x[5], x[6]};
}

bool VehicleState::all_finite() const {
  return vec().allFinite();
}

ControlInput ControlInput::from_vec(const Eigen::Ref<const Eigen::VectorXd>& u) {
  return {u[0], u[1], u[2]};
}

bool ControlInput::all_finite() const {
  return std::isfinite(delta_t) && std::isfinite(delta_i) && std::isfinite(hp);
}

ControlInput InputBounds::clamp(const ControlInput& u) const {
  return {std::clamp(u.delta_t, -delta_t_max, delta_t_max),
          std::clamp(u.delta_i, -delta_i_max, delta_i_max),
          std::clamp(u.hp, hp_min, hp_max)};
}

bool InputBounds::contains(const ControlInput& u, double tol) const {
  return std::abs(u.delta_t) <= delta_t_max + tol &&
         std::abs(u.delta_i) <= delta_i_max + tol && u.hp >= hp_min - tol &&
         u.hp <= hp_max + tol;
}

VaryingParams VaryingParams::from_vec(const Eigen::Ref<const Eigen::VectorXd>& p) {
  return {p[0], p[1], p[2], p[3]};
}

Vec9 Measurement::vec() const {
  Vec9 y;
  y << x_t, y_t, x_i, y_i, v, delta_t, delta_i, hp, beta;
  return y;
}

Measurement Measurement::from_vec(const Eigen::Ref<const Eigen::VectorXd>& y) {
  return {y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7], y[8]};
}

bool Measurement::all_finite() const {
  return vec().allFinite();
}

Vec9 NoiseSpec::stddev_vec() const {
  Vec9 s;
  s << sigma_pos, sigma_pos, sigma_pos, sigma_pos, sigma_v, sigma_delta_t,
      sigma_delta_i, sigma_hp, sigma_beta;
  return s;
}

Vec7 dynamics(const VehicleState& s, const ControlInput& u,
              const VaryingParams& p, const ModelConstants& c) {
  const double ct = std::cos(s.psi_t);
  const double st = std::sin(s.psi_t);
  const double ci = std::cos(s.psi_i);
  const double si = std::sin(s.psi_i);
  const double tkd = std::tan(p.kappa * u.delta_t);
  const double w = p.eta * u.delta_i + p.beta;
  const double gv = p.mu * s.v;  // ground speed

  Vec7 dx;
  dx[0] = gv * ct;
  dx[1] = gv * st;
  dx[2] = gv * tkd / c.L_t;
  dx[3] = gv * ci;
  dx[4] = gv * si;
  dx[5] = gv / c.L_i * (std::sin(w) + c.L_d / c.L_t * tkd * std::cos(w));
  dx[6] = -s.v / c.tau + c.K / c.tau * u.hp;
  return dx;
}

void dynamics_jacobians(const VehicleState& s, const ControlInput& u,
                        const VaryingParams& p, const ModelConstants& c,
                        Mat77* fx, Mat73* fu, Mat74* fp) {
  const double ct = std::cos(s.psi_t);
  const double st = std::sin(s.psi_t);
  const double ci = std::cos(s.psi_i);
  const double si = std::sin(s.psi_i);
  const double kd = p.kappa * u.delta_t;
  const double tkd = std::tan(kd);
  const double sec2 = 1.0 + tkd * tkd;  // sec^2(kappa*delta_t)
  const double w = p.eta * u.delta_i + p.beta;
  const double sw = std::sin(w);
  const double cw = std::cos(w);
  const double gv = p.mu * s.v;
  const double r = c.L_d / c.L_t;
  // d(psi_i-dot)/dw and the bracket of the psi_i equation
  const double bracket = sw + r * tkd * cw;
  const double dbracket_dw = cw - r * tkd * sw;

  if (fx != nullptr) {
    fx->setZero();
    (*fx)(0, 2) = -gv * st;
    (*fx)(0, 6) = p.mu * ct;
    (*fx)(1, 2) = gv * ct;
    (*fx)(1, 6) = p.mu * st;
    (*fx)(2, 6) = p.mu * tkd / c.L_t;
    (*fx)(3, 5) = -gv * si;
    (*fx)(3, 6) = p.mu * ci;
    (*fx)(4, 5) = gv * ci;
    (*fx)(4, 6) = p.mu * si;
    (*fx)(5, 6) = p.mu / c.L_i * bracket;
    (*fx)(6, 6) = -1.0 / c.tau;
  }
  if (fu != nullptr) {
    fu->setZero();
    (*fu)(2, 0) = gv * p.kappa * sec2 / c.L_t;
    (*fu)(5, 0) = gv / c.L_i * r * p.kappa * sec2 * cw;
    (*fu)(5, 1) = gv / c.L_i * p.eta * dbracket_dw;
    (*fu)(6, 2) = c.K / c.tau;
  }
  if (fp != nullptr) {
    fp->setZero();
    (*fp)(0, 0) = s.v * ct;
    (*fp)(1, 0) = s.v * st;
    (*fp)(2, 0) = s.v * tkd / c.L_t;
    (*fp)(2, 1) = gv * u.delta_t * sec2 / c.L_t;
    (*fp)(3, 0) = s.v * ci;
    (*fp)(4, 0) = s.v * si;
    (*fp)(5, 0) = s.v / c.L_i * bracket;
    (*fp)(5, 1) = gv / c.L_i * r * u.delta_t * sec2 * cw;
    (*fp)(5, 2) = gv / c.L_i * u.delta_i * dbracket_dw;
    (*fp)(5, 3) = gv / c.L_i * dbracket_dw;
  }
}

Measurement output_map(const VehicleState& s, const ControlInput& u,
                       const VaryingParams& p) {
  return {s.x_t, s.y_t, s.x_i, s.y_i, s.v, u.delta_t, u.delta_i, u.hp, p.beta};
}

VehicleState integrate(const VehicleState& s, const ControlInput& u,
                       const VaryingParams& p, const ModelConstants& c,
                       double dt, int substeps) {
  if (!(dt > 0.0) || substeps < 1) {
    throw ContractViolation("integrate: dt must be > 0 and substeps >= 1");
  }
  const double h = dt / substeps;
  VehicleState cur = s;
  for (int i = 0; i < substeps; ++i) {
    const Vec7 x0 = cur.vec();
    const Vec7 k1 = dynamics(cur, u, p, c);
    const Vec7 k2 = dynamics(VehicleState::from_vec(x0 + 0.5 * h * k1), u, p, c);
    const Vec7 k3 = dynamics(VehicleState::from_vec(x0 + 0.5 * h * k2), u, p, c);
    const Vec7 k4 = dynamics(VehicleState::from_vec(x0 + h * k3), u, p, c);
    cur = VehicleState::from_vec(x0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
  return cur;
}

}  // namespace artic
