#pragma once

#include <cmath>

#include "sweeper/control.hpp"
#include "sweeper/dynamics.hpp"
#include "sweeper/field.hpp"
#include "sweeper/geometry.hpp"

// Shared fixtures: the small scenario zoo used across the test suite.
namespace fixtures {

using namespace sweeper;

inline SublevelSet slide_set() {
  return SublevelSet::interval(0.0, 1.0, 0.9, 4.0);
}
inline Dynamics slide_dyn() {
  return Dynamics{FieldSpec::constant(VectorXd::Constant(1, 2.0), 1),
                  PhiSpec::zero(1), 2.0};
}
inline ControlPath zero_control(int dim = 1, int nodes = 101) {
  return ControlPath::constant(VectorXd::Zero(dim), nodes);
}

inline SublevelSet disk_set() {
  return SublevelSet::ball(VectorXd::Zero(2), 1.0, 0.9, 4.0);
}
inline Dynamics disk_dyn() {
  VectorXd f(2);
  f << 1.0, 0.0;
  return Dynamics{FieldSpec::constant(f, 1), PhiSpec::zero(2), 1.0};
}

inline SublevelSet ellipse_set() {
  VectorXd ctr = VectorXd::Zero(2);
  VectorXd axes(2);
  axes << 2.0, 1.0;
  return SublevelSet::ellipse(ctr, axes, 0.45, 2.0);
}
inline Dynamics ellipse_dyn() {
  VectorXd f(2);
  f << 2.0, -0.5;
  return Dynamics{FieldSpec::constant(f, 1), PhiSpec::zero(2), 2.1};
}
inline VectorXd ellipse_start() {
  VectorXd x0(2);
  x0 << 0.3, 0.7;
  return x0;
}

inline Dynamics contraction_dyn() {
  // f = 0 with Phi = |x|^2 / 2, so the effective drift is -x
  return Dynamics{FieldSpec::constant(VectorXd::Zero(2), 1),
                  PhiSpec::quadratic(1.0, VectorXd::Zero(2)), 1.5};
}

inline SublevelSet reach_set() {
  return SublevelSet::interval(0.0, 1.0, 0.9, 4.0);
}
inline Dynamics reach_dyn() {
  // scalar integrator xdot = u
  return Dynamics{
      FieldSpec::linear(MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1),
                        VectorXd::Zero(1)),
      PhiSpec::zero(1), 1.2};
}

/// Stationary layer depth of the one-dimensional slide xdot = c - gamma
/// e^{gamma(x^2-1)} 2x: Newton (in log form) on ln r + ln(2 gamma / c) +
/// gamma (r^2 - 1) = 0.  Independent of the integrator.
inline double slide_equilibrium(double gamma, double c = 2.0) {
  double r = 1.0;
  for (int it = 0; it < 100; ++it) {
    double val = std::log(r) + std::log(2.0 * gamma / c) + gamma * (r * r - 1.0);
    double der = 1.0 / r + 2.0 * gamma * r;
    double step = val / der;
    r -= step;
    if (std::abs(step) < 1e-16) break;
  }
  return r;
}

}  // namespace fixtures
