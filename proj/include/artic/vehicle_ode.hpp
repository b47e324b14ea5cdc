#pragma once

#include "artic/model.hpp"
#include "artic/rti.hpp"

namespace artic {

/// Bridges the typed vehicle model into the runtime-sized RTI interface.
class VehicleOde final : public rti::OdeModel {
 public:
  explicit VehicleOde(const ModelConstants& c) : c_(c) {}

  int nx() const override { return 7; }
  int nu() const override { return 3; }
  int np() const override { return 4; }

  void eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
            const Eigen::VectorXd& p, Eigen::VectorXd& dx, Eigen::MatrixXd* fx,
            Eigen::MatrixXd* fu, Eigen::MatrixXd* fp) const override {
    const VehicleState s = VehicleState::from_vec(x);
    const ControlInput ui = ControlInput::from_vec(u);
    const VaryingParams pp = VaryingParams::from_vec(p);
    dx = dynamics(s, ui, pp, c_);
    if (fx != nullptr || fu != nullptr || fp != nullptr) {
      Mat77 jx;
      Mat73 ju;
      Mat74 jp;
      dynamics_jacobians(s, ui, pp, c_, &jx, &ju, &jp);
      if (fx != nullptr) *fx = jx;
      if (fu != nullptr) *fu = ju;
      if (fp != nullptr) *fp = jp;
    }
  }

  const ModelConstants& constants() const { return c_; }

 private:
  ModelConstants c_;
};

}  // namespace artic
