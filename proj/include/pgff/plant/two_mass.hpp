#pragma once

#include <array>
#include <cmath>
#include <string>

#include "pgff/error.hpp"
#include "pgff/lti/state_space.hpp"
#include "pgff/types.hpp"

namespace pgff::plant {

/// Two rotating inertias coupled by a flexible axle. Torque acts on the
/// motor side (mass 1); the load angle (mass 2) is measured.
struct TwoMsdParams {
  double J1 = 1e-4;   // kg m^2
  double J2 = 1e-4;   // kg m^2
  double k1 = 4.0;    // N m / rad
  double b1 = 2e-3;   // N m s / rad
  double kv1 = 1e-3;  // N m s / rad
  double kv2 = 1e-3;  // N m s / rad

  static constexpr std::size_t kCount = 6;
  static constexpr std::array<const char*, kCount> kNames{"J1", "J2", "k1", "b1", "kv1", "kv2"};

  [[nodiscard]] std::array<double, kCount> values() const { return {J1, J2, k1, b1, kv1, kv2}; }
  static TwoMsdParams from_values(const std::array<double, kCount>& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

  [[nodiscard]] TwoMsdParams scaled(double f) const {
    auto v = values();
    for (double& x : v) x *= f;
    return from_values(v);
  }

  void validate() const {
    const auto v = values();
    for (std::size_t i = 0; i < kCount; ++i)
      if (!(v[i] > 0.0) || !std::isfinite(v[i]))
        throw ConfigError(std::string("TwoMsdParams: ") + kNames[i] + " must be positive and finite");
  }
};

/// State [theta1, theta2, omega1, omega2], input motor torque, output theta2.
inline lti::ContinuousStateSpace build_2msd(const TwoMsdParams& p) {
  p.validate();
  Matrix A = Matrix::Zero(4, 4);
  A(0, 2) = 1.0;
  A(1, 3) = 1.0;
  A(2, 0) = -p.k1 / p.J1;
  A(2, 1) = p.k1 / p.J1;
  A(2, 2) = -(p.b1 + p.kv1) / p.J1;
  A(2, 3) = p.b1 / p.J1;
  A(3, 0) = p.k1 / p.J2;
  A(3, 1) = -p.k1 / p.J2;
  A(3, 2) = p.b1 / p.J2;
  A(3, 3) = -(p.b1 + p.kv2) / p.J2;
  Matrix B = Matrix::Zero(4, 1);
  B(2, 0) = 1.0 / p.J1;
  Matrix C = Matrix::Zero(1, 4);
  C(0, 1) = 1.0;
  return {A, B, C};
}

/// Friction beyond the viscous terms: smoothed Coulomb plus quadratic drag.
struct ParasiticConfig {
  double coulomb1 = 5e-3;    // N m
  double coulomb2 = 2e-3;    // N m
  double smooth_vel = 0.5;   // rad/s
  double quad_drag = 1e-6;   // N m s^2 / rad^2
  bool enabled = true;

  void validate() const {
    require(coulomb1 >= 0.0 && coulomb2 >= 0.0 && quad_drag >= 0.0, "ParasiticConfig: amplitudes must be >= 0");
    require(smooth_vel > 0.0, "ParasiticConfig: smooth_vel must be positive");
  }

  /// Torque on a mass spinning at `omega` with Coulomb amplitude `coulomb`.
  [[nodiscard]] double torque(double omega, double coulomb) const {
    return -coulomb * std::tanh(omega / smooth_vel) - quad_drag * omega * std::abs(omega);
  }
};

/// Sampled plant: the linear part advances by its zero-order-hold model; the
/// parasitic torques are evaluated at the start of the step and held over
/// it, entering through the ZOH input map of the mass they act on.
class TwoMassPlant {
 public:
  TwoMassPlant(const TwoMsdParams& p, const ParasiticConfig& nl, double Ts) : params_(p), nl_(nl) {
    nl.validate();
    const lti::ContinuousStateSpace css = build_2msd(p);
    Matrix B3 = Matrix::Zero(4, 3);
    B3.col(0) = css.B.col(0);
    B3(2, 1) = 1.0 / p.J1;
    B3(3, 2) = 1.0 / p.J2;
    const lti::DiscreteStateSpace d = lti::zoh_discretize({css.A, B3, css.C}, Ts);
    model_ = lti::DiscreteStateSpace(d.A, d.B.col(0), d.C, Ts);
    disturbance_ = d.B.rightCols(2);
  }

  [[nodiscard]] const lti::DiscreteStateSpace& linear_model() const { return model_; }
  [[nodiscard]] const TwoMsdParams& params() const { return params_; }
  [[nodiscard]] const ParasiticConfig& parasitics() const { return nl_; }

  [[nodiscard]] Vector step(const Vector& x, double u) const {
    Vector next = model_.A * x + model_.B.col(0) * u;
    if (nl_.enabled) {
      next += disturbance_.col(0) * nl_.torque(x(2), nl_.coulomb1);
      next += disturbance_.col(1) * nl_.torque(x(3), nl_.coulomb2);
    }
    return next;
  }

  [[nodiscard]] static double output(const Vector& x) { return x(1); }

 private:
  TwoMsdParams params_;
  ParasiticConfig nl_;
  lti::DiscreteStateSpace model_;
  Matrix disturbance_;  // 4 x 2, unit torque on mass 1 / mass 2
};

/// One sample of the plant from `state` under torque `u`.
inline Vector plant_step(const Vector& state, double u, const TwoMsdParams& p, const ParasiticConfig& nl, double Ts) {
  require(state.size() == 4, "plant_step: state must have 4 entries");
  return TwoMassPlant(p, nl, Ts).step(state, u);
}

}  // namespace pgff::plant
