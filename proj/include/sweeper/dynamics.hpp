#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "sweeper/common.hpp"
#include "sweeper/control.hpp"
#include "sweeper/field.hpp"
#include "sweeper/geometry.hpp"

namespace sweeper {

struct StepControl {
  double abstol = 1e-10;
  double h0 = 0.0;  // 0 selects min(1e-2, 1/gamma)
  double h_min = 1e-14;
  long max_steps = 4000000;
  int newton_max_iter = 60;
  double gpsi_cap = 10.0;  // Newton trials must keep gamma*psi below this
  double h_max = 1e-2;     // hard step cap: keeps the resampling grid honest
  // Largest admissible velocity change across one accepted step, relative to
  // 1 + |v| + Mbar.  Step doubling alone cannot see a skipped boundary-layer
  // transient (both candidate steps land on the attracting manifold), so
  // steps that jump the velocity by more than this fraction are rejected.
  double vel_jump_frac = 0.25;
};

/// Piecewise path on an adaptive grid; v holds the dynamics right-hand side
/// evaluated at the nodes.
struct Trajectory {
  std::vector<double> t;
  std::vector<VectorXd> x;
  std::vector<VectorXd> v;
};

struct RunDiagnostics {
  double max_psi = -std::numeric_limits<double>::infinity();
  double max_xi = 0.0;
  double max_speed = 0.0;
  double energy_integral = 0.0;  // exact integral of |xdot|^2 for the
                                 // piecewise-linear numerical solution
  long steps_accepted = 0;
  long steps_rejected = 0;
  long newton_iters = 0;
  double h_smallest = std::numeric_limits<double>::infinity();
  double h_largest = 0.0;
};

/// Result of one penalized integration: uniform output grid plus the internal
/// adaptive nodes (kept for quadrature and adjoint interpolation).
struct PenaltyRun {
  double gamma = 0.0;
  std::vector<double> t;
  std::vector<VectorXd> x;
  std::vector<VectorXd> xdot;
  std::vector<double> xi;   // gamma * exp(gamma * psi(x_i))
  std::vector<double> psi;
  Trajectory internal;
  RunDiagnostics diag;

  int dim() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }

  /// Cubic Hermite state interpolation on the internal grid.
  VectorXd state_at(double time) const {
    const auto& tt = internal.t;
    if (time <= tt.front()) return internal.x.front();
    if (time >= tt.back()) return internal.x.back();
    size_t j = static_cast<size_t>(
        std::upper_bound(tt.begin(), tt.end(), time) - tt.begin() - 1);
    double dt = tt[j + 1] - tt[j];
    double s = (time - tt[j]) / dt;
    double s2 = s * s, s3 = s2 * s;
    double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * internal.x[j] + h10 * dt * internal.v[j] +
           h01 * internal.x[j + 1] + h11 * dt * internal.v[j + 1];
  }
};

namespace detail {

struct PenaltyRhs {
  const SublevelSet& set;
  const Dynamics& dyn;
  double gamma;

  VectorXd operator()(const VectorXd& x, const VectorXd& u) const {
    double p = set.psi(x);
    return dyn.f_phi(x, u) - (gamma * std::exp(gamma * p)) * set.grad_psi(x);
  }

  MatrixXd jacobian(const VectorXd& x) const {
    double w = gamma * std::exp(gamma * set.psi(x));
    VectorXd g = set.grad_psi(x);
    return dyn.jac_x(x) - w * (set.hess_psi(x) + gamma * g * g.transpose());
  }
};

/// One implicit midpoint stage: solves y = x + h * F((x+y)/2, u_mid) by
/// damped Newton.  Returns false when the stage cannot be solved at this h.
inline bool midpoint_stage(const PenaltyRhs& rhs, const VectorXd& x,
                           const VectorXd& u_mid, double h,
                           const StepControl& ctrl, VectorXd& y_out,
                           long& newton_iters) {
  const int n = static_cast<int>(x.size());
  auto admissible = [&](const VectorXd& y) {
    return y.allFinite() && rhs.gamma * rhs.set.psi(y) <= ctrl.gpsi_cap;
  };
  auto residual = [&](const VectorXd& y) -> VectorXd {
    return y - x - h * rhs(0.5 * (x + y), u_mid);
  };

  VectorXd y = x + h * rhs(x, u_mid);
  if (!admissible(y)) y = x;
  double tol = 1e-13 * (1.0 + x.cwiseAbs().maxCoeff());
  VectorXd r = residual(y);
  for (int it = 0; it < ctrl.newton_max_iter; ++it) {
    double rn = r.cwiseAbs().maxCoeff();
    if (rn <= tol) { y_out = y; return true; }
    ++newton_iters;
    MatrixXd J = MatrixXd::Identity(n, n) -
                 0.5 * h * rhs.jacobian(0.5 * (x + y));
    VectorXd delta = J.partialPivLu().solve(-r);
    if (!delta.allFinite()) return false;
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-6) {
      VectorXd trial = y + step * delta;
      if (admissible(trial)) {
        VectorXd rt = residual(trial);
        if (rt.cwiseAbs().maxCoeff() <= (1.0 - 1e-4 * step) * rn + tol) {
          y = trial;
          r = rt;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) {
      // stagnation close to the root still counts as converged
      if (rn <= 1e3 * tol) { y_out = y; return true; }
      return false;
    }
  }
  if (r.cwiseAbs().maxCoeff() <= 1e3 * tol) { y_out = y; return true; }
  return false;
}

}  // namespace detail

/// Integrates xdot = f_phi(x, u(t)) - gamma e^{gamma psi(x)} grad psi(x) over
/// [0,1] with adaptive implicit midpoint (step-doubling error control) and
/// resamples onto a uniform output grid.  Aborts when the state leaves the
/// admissible set beyond boundary_tol.
inline PenaltyRun integrate_penalized(const SublevelSet& set,
                                      const Dynamics& dyn, double gamma,
                                      const VectorXd& x0, const ControlPath& u,
                                      const Tolerances& tol,
                                      StepControl ctrl = StepControl{}) {
  require(gamma * set.eta() > 2.0 * dyn.Mbar, "schedule-domain",
          "gamma must exceed 2*Mbar/eta for the penalty layer to exist");
  require(x0.size() == set.dim(), "grid-mismatch",
          "initial state has wrong dimension");
  require(set.psi(x0) <= tol.boundary_tol, "invariance-violation",
          "initial state lies outside the admissible set: psi(x0) = " +
              format_double(set.psi(x0)));

  detail::PenaltyRhs rhs{set, dyn, gamma};
  PenaltyRun run;
  run.gamma = gamma;

  double t = 0.0;
  VectorXd x = x0;
  auto push_internal = [&](double tn, const VectorXd& xn) {
    VectorXd vn = rhs(xn, u.value(tn));
    run.internal.t.push_back(tn);
    run.internal.x.push_back(xn);
    run.internal.v.push_back(vn);
    run.diag.max_psi = std::max(run.diag.max_psi, set.psi(xn));
    run.diag.max_xi =
        std::max(run.diag.max_xi, gamma * std::exp(gamma * set.psi(xn)));
    run.diag.max_speed = std::max(run.diag.max_speed, vn.norm());
  };
  push_internal(0.0, x);

  double h = ctrl.h0 > 0.0 ? ctrl.h0 : std::min(1e-2, 1.0 / gamma);
  h = std::min(h, ctrl.h_max);
  long guard = 0;
  while (t < 1.0) {
    require(++guard <= ctrl.max_steps, "step-failure",
            "step budget exhausted at t = " + format_double(t));
    h = std::min(h, 1.0 - t);
    VectorXd y_full, y_mid, y_half;
    bool ok = detail::midpoint_stage(rhs, x, u.value(t + 0.5 * h), h, ctrl,
                                     y_full, run.diag.newton_iters) &&
              detail::midpoint_stage(rhs, x, u.value(t + 0.25 * h), 0.5 * h,
                                     ctrl, y_mid, run.diag.newton_iters) &&
              detail::midpoint_stage(rhs, y_mid, u.value(t + 0.75 * h),
                                     0.5 * h, ctrl, y_half,
                                     run.diag.newton_iters);
    if (ok) {
      // a step may not jump across a layer transient: the velocity must
      // change gradually from node to node or the Hermite resampling lies
      const VectorXd& v_prev = run.internal.v.back();
      double cap = ctrl.vel_jump_frac * (1.0 + v_prev.norm() + dyn.Mbar);
      VectorXd v_mid = rhs(y_mid, u.value(t + 0.5 * h));
      VectorXd v_new = rhs(y_half, u.value(t + h));
      if ((v_mid - v_prev).norm() > cap || (v_new - v_mid).norm() > cap)
        ok = false;
    }
    double est = ok ? (y_half - y_full).cwiseAbs().maxCoeff() / 3.0
                    : std::numeric_limits<double>::infinity();
    if (!ok || est > ctrl.abstol) {
      ++run.diag.steps_rejected;
      double shrink = ok ? std::max(0.2, 0.9 * std::cbrt(ctrl.abstol / est))
                         : 0.25;
      h *= shrink;
      require(h >= ctrl.h_min, "step-failure",
              "step size underflow at t = " + format_double(t));
      continue;
    }
    ++run.diag.steps_accepted;
    run.diag.h_smallest = std::min(run.diag.h_smallest, h);
    run.diag.h_largest = std::max(run.diag.h_largest, h);
    push_internal(t + 0.5 * h, y_mid);
    push_internal(t + h, y_half);
    t += h;
    x = y_half;
    double grow = 0.9 * std::cbrt(ctrl.abstol / std::max(est, 1e-300));
    h = std::min(h * std::clamp(grow, 0.2, 5.0), ctrl.h_max);
  }

  for (size_t j = 0; j + 1 < run.internal.t.size(); ++j) {
    double dt = run.internal.t[j + 1] - run.internal.t[j];
    run.diag.energy_integral +=
        (run.internal.x[j + 1] - run.internal.x[j]).squaredNorm() / dt;
  }

  run.t = linspace(0.0, 1.0, tol.output_nodes);
  run.x.reserve(run.t.size());
  for (double ti : run.t) {
    VectorXd xi_state = run.state_at(ti);
    VectorXd vi = rhs(xi_state, u.value(ti));
    double pi = set.psi(xi_state);
    run.x.push_back(xi_state);
    run.xdot.push_back(vi);
    run.xi.push_back(gamma * std::exp(gamma * pi));
    run.psi.push_back(pi);
    run.diag.max_psi = std::max(run.diag.max_psi, pi);
    run.diag.max_xi = std::max(run.diag.max_xi, run.xi.back());
    run.diag.max_speed = std::max(run.diag.max_speed, vi.norm());
  }

  require(run.diag.max_psi <= tol.boundary_tol, "invariance-violation",
          "max psi along the run is " + format_double(run.diag.max_psi) +
              ", beyond boundary_tol = " + format_double(tol.boundary_tol));
  return run;
}

/// Residuals of the layer bounds for runs started inside C(k):
/// containment psi <= -alpha_k, multiplier xi <= 2 Mbar / eta, and speed
/// |xdot| <= Mbar (1 + 2 Mbar_psi / eta); clamped at zero when satisfied.
struct BoundReport {
  double containment_residual = 0.0;  // max psi + alpha_k
  double multiplier_residual = 0.0;   // max xi - 2 Mbar / eta
  double speed_residual = 0.0;        // max |xdot| - (Mbar + 2 Mbar Mbar_psi / eta)
  double energy_residual = 0.0;       // energy integral - (Mbar^2 + 2)
  bool started_in_Ck = false;
  bool pass = false;
};

inline BoundReport check_bounds(const SublevelSet& set, const Dynamics& dyn,
                                const PenaltySchedule& sched, size_t k,
                                const PenaltyRun& run, bool started_in_Ck,
                                const Tolerances& tol) {
  BoundReport rep;
  rep.started_in_Ck = started_in_Ck;
  double alpha_k = sched.alphas.at(k);
  double xi_cap = 2.0 * dyn.Mbar / set.eta();
  double speed_cap = dyn.Mbar + 2.0 * dyn.Mbar * set.Mbar_psi() / set.eta();
  rep.containment_residual = std::max(0.0, run.diag.max_psi + alpha_k);
  rep.multiplier_residual = std::max(0.0, run.diag.max_xi - xi_cap);
  rep.speed_residual = std::max(0.0, run.diag.max_speed - speed_cap);
  rep.energy_residual =
      std::max(0.0, run.diag.energy_integral - (dyn.Mbar * dyn.Mbar + 2.0));
  rep.pass = !started_in_Ck ||
             (rep.containment_residual <= tol.report_tol &&
              rep.multiplier_residual <= tol.report_tol &&
              rep.speed_residual <= tol.report_tol &&
              rep.energy_residual <= tol.quadrature_tol);
  return rep;
}

/// Smallest schedule index from which every later report passes; the
/// schedule size when none does.
inline size_t detect_rank(const std::vector<BoundReport>& reports) {
  size_t rank = reports.size();
  for (size_t k = reports.size(); k-- > 0;) {
    if (!reports[k].pass) break;
    rank = k;
  }
  return rank;
}

/// Empirical max of |f_phi| over sampled C x U; must stay below the declared
/// Mbar for the layer bounds to mean anything.
inline double field_bound_residual(const SublevelSet& set, const Dynamics& dyn,
                                   const ControlSet& U, int samples) {
  double worst = 0.0;
  VectorXd span = set.box_hi() - set.box_lo();
  int m = U.dim();
  for (int i = 0; i < samples; ++i) {
    VectorXd w = halton_point(i, set.dim() + m);
    VectorXd x = set.box_lo() + span.cwiseProduct(w.head(set.dim()));
    if (set.psi(x) > 0.0) continue;
    VectorXd uraw(m);
    for (int j = 0; j < m; ++j) uraw[j] = -2.0 + 4.0 * w[set.dim() + j];
    VectorXd u = U.project(uraw);
    worst = std::max(worst, dyn.f_phi(x, u).norm());
  }
  return worst - dyn.Mbar;
}

}  // namespace sweeper
