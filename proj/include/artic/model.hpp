#pragma once

#include <Eigen/Dense>

namespace artic {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat77 = Eigen::Matrix<double, 7, 7>;
using Mat73 = Eigen::Matrix<double, 7, 3>;
using Mat74 = Eigen::Matrix<double, 7, 4>;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }

/// Fixed physical parameters of the tractor-trailer rig.
struct ModelConstants {
  double L_t = 1.4;   ///< tractor wheelbase [m]
  double L_i = 1.3;   ///< RJ2-to-trailer-axle distance [m]
  double L_d = 1.1;   ///< tractor rear axle to RJ2 [m]
  double tau = 2.05;  ///< wheel-speed time constant [s]
  double K = 0.016;   ///< wheel-speed gain [m/s per % hydrostat]

  void validate() const;  // throws ConfigError unless all strictly positive
};

/// Poses of both bodies plus circumferential wheel speed. Headings are kept
/// unwrapped (continuous), never reduced modulo 2*pi.
struct VehicleState {
  double x_t = 0.0;
  double y_t = 0.0;
  double psi_t = 0.0;
  double x_i = 0.0;
  double y_i = 0.0;
  double psi_i = 0.0;
  double v = 0.0;

  Vec7 vec() const;
  static VehicleState from_vec(const Eigen::Ref<const Eigen::VectorXd>& x);
  bool all_finite() const;
};

/// Steering angles [rad] and hydrostat position [%].
struct ControlInput {
  double delta_t = 0.0;
  double delta_i = 0.0;
  double hp = 0.0;

  Eigen::Vector3d vec() const { return {delta_t, delta_i, hp}; }
  static ControlInput from_vec(const Eigen::Ref<const Eigen::VectorXd>& u);
  bool all_finite() const;
};

/// Box bounds on the real inputs (tractor steer, trailer steer, hydrostat).
struct InputBounds {
  double delta_t_max = deg2rad(35.0);
  double delta_i_max = deg2rad(25.0);
  double hp_min = 0.0;
  double hp_max = 100.0;

  Eigen::Vector3d lower() const { return {-delta_t_max, -delta_i_max, hp_min}; }
  Eigen::Vector3d upper() const { return {delta_t_max, delta_i_max, hp_max}; }
  ControlInput clamp(const ControlInput& u) const;
  bool contains(const ControlInput& u, double tol = 1e-9) const;
};

/// Slowly varying traction coefficients and the drawbar angle at RJ1.
struct VaryingParams {
  double mu = 1.0;
  double kappa = 1.0;
  double eta = 1.0;
  double beta = 0.0;

  Eigen::Vector4d vec() const { return {mu, kappa, eta, beta}; }
  static VaryingParams from_vec(const Eigen::Ref<const Eigen::VectorXd>& p);
};

inline constexpr double kBetaMax = deg2rad(20.0);

/// Sensor vector: positions of both bodies, wheel speed, the three actuator
/// readings and the drawbar angle, in that fixed order.
struct Measurement {
  double x_t = 0.0;
  double y_t = 0.0;
  double x_i = 0.0;
  double y_i = 0.0;
  double v = 0.0;
  double delta_t = 0.0;
  double delta_i = 0.0;
  double hp = 0.0;
  double beta = 0.0;

  Vec9 vec() const;
  static Measurement from_vec(const Eigen::Ref<const Eigen::VectorXd>& y);
  bool all_finite() const;
};

/// Standard deviations of the sensor channels.
struct NoiseSpec {
  double sigma_pos = 0.03;       ///< x_t, y_t, x_i, y_i [m]
  double sigma_v = 0.1;          ///< wheel speed [m/s]
  double sigma_delta_t = 0.0175;  ///< [rad]
  double sigma_delta_i = 0.0175;  ///< [rad]
  double sigma_hp = 3.0;         ///< [%]
  double sigma_beta = 0.0175;    ///< [rad]

  Vec9 stddev_vec() const;  // in Measurement order
};

/// Time derivative of the state under the adaptive kinematic model.
Vec7 dynamics(const VehicleState& s, const ControlInput& u,
              const VaryingParams& p, const ModelConstants& c);

/// Analytic partial derivatives of dynamics() at (s, u, p).
void dynamics_jacobians(const VehicleState& s, const ControlInput& u,
                        const VaryingParams& p, const ModelConstants& c,
                        Mat77* fx, Mat73* fu, Mat74* fp);

/// Sensor map: assembles the 9-vector from state, input and drawbar angle.
/// No noise is added here.
Measurement output_map(const VehicleState& s, const ControlInput& u,
                       const VaryingParams& p);

/// Classical RK4 over [0, dt] with zero-order-hold input and parameters.
VehicleState integrate(const VehicleState& s, const ControlInput& u,
                       const VaryingParams& p, const ModelConstants& c,
                       double dt, int substeps);

}  // namespace artic
