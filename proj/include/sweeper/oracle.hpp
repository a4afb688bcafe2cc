#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sweeper/common.hpp"
#include "sweeper/control.hpp"
#include "sweeper/field.hpp"
#include "sweeper/geometry.hpp"

namespace sweeper {

namespace detail {

/// Nearest-point projection for ellipse/quadform sets: damped Newton on the
/// stationarity system x = y - lambda grad psi(x), psi(x) = 0, seeded from
/// the boundary point on the ray anchor -> y.
inline VectorXd project_kkt(const SublevelSet& set, const VectorXd& y) {
  const int n = set.dim();
  VectorXd x = boundary_bisect(set, set.anchor(), y);
  double lambda = (y - x).norm() / std::max(set.grad_psi(x).norm(), 1e-12);

  auto residual = [&](const VectorXd& xs, double ls) {
    VectorXd r(n + 1);
    r.head(n) = xs - y + ls * set.grad_psi(xs);
    r[n] = set.psi(xs);
    return r;
  };

  VectorXd r = residual(x, lambda);
  for (int it = 0; it < 100; ++it) {
    double rn = r.norm();
    if (rn <= 1e-13 * (1.0 + y.norm())) {
      require(lambda >= -1e-10, "projection-failure",
              "projection multiplier came out negative");
      return x;
    }
    MatrixXd J = MatrixXd::Zero(n + 1, n + 1);
    J.topLeftCorner(n, n) =
        MatrixXd::Identity(n, n) + lambda * set.hess_psi(x);
    J.block(0, n, n, 1) = set.grad_psi(x);
    J.block(n, 0, 1, n) = set.grad_psi(x).transpose();
    VectorXd delta = J.partialPivLu().solve(-r);
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-8) {
      VectorXd xt = x + step * delta.head(n);
      double lt = lambda + step * delta[n];
      VectorXd rt = residual(xt, lt);
      if (rt.allFinite() && rt.norm() <= (1.0 - 1e-4 * step) * rn) {
        x = xt;
        lambda = lt;
        r = rt;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  require(r.norm() <= 1e-9 * (1.0 + y.norm()), "projection-failure",
          "Newton projection did not converge");
  return x;
}

}  // namespace detail

/// Nearest point of C; closed form for intervals and balls, Newton for the
/// curved shapes.  Points already in C are returned unchanged.
inline VectorXd project_onto_set(const SublevelSet& set, const VectorXd& y) {
  if (set.psi(y) <= 0.0) return y;
  switch (set.tag()) {
    case ShapeTag::interval: {
      // psi = (x - c)^2 - r^2 with Q = 1, b = -2c
      double c = -set.b()[0] / 2.0;
      double r = std::sqrt(c * c - set.c());
      VectorXd x(1);
      x[0] = std::clamp(y[0], c - r, c + r);
      return x;
    }
    case ShapeTag::ball: {
      VectorXd c = -set.b() / 2.0;
      double r = std::sqrt(c.squaredNorm() - set.c());
      return c + (r / (y - c).norm()) * (y - c);
    }
    case ShapeTag::ellipse:
    case ShapeTag::quadform:
      return detail::project_kkt(set, y);
  }
  fail("unsupported-set", "unknown shape tag");
}

/// Multiplier recovered from a trajectory: zero off the contact shell,
/// |xdot - f_phi| / |grad psi| on it.
struct MultiplierPath {
  std::vector<double> t;
  std::vector<double> xi;
  std::vector<uint8_t> on_boundary;
  double max_xi = 0.0;
};

inline MultiplierPath multiplier_from_trajectory(
    const SublevelSet& set, const Dynamics& dyn, const std::vector<double>& t,
    const std::vector<VectorXd>& x, const std::vector<VectorXd>& xdot,
    const ControlPath& u, double mask_tol) {
  require(t.size() == x.size() && t.size() == xdot.size(), "grid-mismatch",
          "trajectory arrays must share one grid");
  MultiplierPath mp;
  mp.t = t;
  mp.xi.resize(t.size(), 0.0);
  mp.on_boundary.resize(t.size(), 0);
  for (size_t j = 0; j < t.size(); ++j) {
    if (std::abs(set.psi(x[j])) > mask_tol) continue;
    VectorXd g = set.grad_psi(x[j]);
    require(g.norm() > set.eta(), "degenerate-gradient",
            "gradient norm on the contact shell fell below eta");
    mp.on_boundary[j] = 1;
    mp.xi[j] = (xdot[j] - dyn.f_phi(x[j], u.value(t[j]))).norm() / g.norm();
    mp.max_xi = std::max(mp.max_xi, mp.xi[j]);
  }
  return mp;
}

/// Sup over nodes of |xdot - f_phi(x, u) + xi grad psi(x)|: how well the
/// triple satisfies the inclusion with the recovered multiplier.  Nodes whose
/// difference stencil straddles a contact transition carry a kink-averaged
/// velocity that belongs to neither branch, so they are excluded.
inline double feasibility_residual(const SublevelSet& set, const Dynamics& dyn,
                                   const std::vector<double>& t,
                                   const std::vector<VectorXd>& x,
                                   const std::vector<VectorXd>& xdot,
                                   const std::vector<double>& xi,
                                   const std::vector<uint8_t>& on_boundary,
                                   const ControlPath& u) {
  require(on_boundary.size() == t.size(), "grid-mismatch",
          "mask must share the trajectory grid");
  double worst = 0.0;
  for (size_t j = 0; j < t.size(); ++j) {
    size_t lo = j > 0 ? j - 1 : j;
    size_t hi = j + 1 < t.size() ? j + 1 : j;
    if (on_boundary[lo] != on_boundary[hi]) continue;
    VectorXd r = xdot[j] - dyn.f_phi(x[j], u.value(t[j])) +
                 xi[j] * set.grad_psi(x[j]);
    worst = std::max(worst, r.norm());
  }
  return worst;
}

/// Catching-up trajectory with recovered multiplier; the reference solution
/// the penalty runs are compared against.
struct OracleRun {
  double h = 0.0;
  std::vector<double> t;
  std::vector<VectorXd> x;
  std::vector<VectorXd> xdot;  // central differences (one-sided at the ends)
  std::vector<double> psi;
  std::vector<double> xi;
  std::vector<uint8_t> on_boundary;
  double max_xi = 0.0;

  VectorXd state_at(double time) const {
    double s = std::clamp(time, 0.0, 1.0) / h;
    size_t j = std::min(static_cast<size_t>(s), t.size() - 2);
    double w = s - static_cast<double>(j);
    return (1.0 - w) * x[j] + w * x[j + 1];
  }
};

/// Projected Euler scheme x_{j+1} = proj_C(x_j + h f_phi(x_j, u(t_j))) on a
/// uniform grid over [0,1].  Requires h <= prox_radius / (2 Mbar).
inline OracleRun catching_up(const SublevelSet& set, const Dynamics& dyn,
                             const VectorXd& x0, const ControlPath& u,
                             double h, const Tolerances& tol) {
  require(h > 0.0 && h <= set.prox_radius() / (2.0 * dyn.Mbar), "step-failure",
          "catching-up step must satisfy h <= prox_radius / (2 Mbar)");
  require(set.psi(x0) <= tol.boundary_tol, "invariance-violation",
          "oracle start lies outside the admissible set");

  OracleRun run;
  int N = static_cast<int>(std::llround(1.0 / h));
  run.h = 1.0 / N;
  run.t = linspace(0.0, 1.0, N + 1);
  run.x.reserve(run.t.size());
  run.x.push_back(x0);
  for (int j = 0; j < N; ++j) {
    const VectorXd& xj = run.x.back();
    VectorXd pred = xj + run.h * dyn.f_phi(xj, u.value(run.t[j]));
    run.x.push_back(project_onto_set(set, pred));
  }

  run.xdot.resize(run.t.size());
  for (size_t j = 0; j < run.t.size(); ++j) {
    if (j == 0)
      run.xdot[j] = (run.x[1] - run.x[0]) / run.h;
    else if (j + 1 == run.t.size())
      run.xdot[j] = (run.x[j] - run.x[j - 1]) / run.h;
    else
      run.xdot[j] = (run.x[j + 1] - run.x[j - 1]) / (2.0 * run.h);
  }
  run.psi.resize(run.t.size());
  for (size_t j = 0; j < run.t.size(); ++j) run.psi[j] = set.psi(run.x[j]);

  MultiplierPath mp = multiplier_from_trajectory(
      set, dyn, run.t, run.x, run.xdot, u, 10.0 * tol.boundary_tol);
  run.xi = std::move(mp.xi);
  run.on_boundary = std::move(mp.on_boundary);
  run.max_xi = mp.max_xi;
  return run;
}

}  // namespace sweeper
