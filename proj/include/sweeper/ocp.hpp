#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sweeper/common.hpp"
#include "sweeper/control.hpp"
#include "sweeper/dynamics.hpp"
#include "sweeper/field.hpp"
#include "sweeper/geometry.hpp"

namespace sweeper {

/// Finite intersection of convex primitives (point / box / ball), used for
/// the endpoint constraint sets.  An empty member list means the whole space.
struct EndpointSet {
  std::vector<ControlSet> members;
  int space_dim = 0;

  static EndpointSet whole(int dim) {
    EndpointSet s;
    s.space_dim = dim;
    return s;
  }
  static EndpointSet point(VectorXd p) {
    EndpointSet s;
    s.space_dim = static_cast<int>(p.size());
    s.members.push_back(ControlSet::point(std::move(p)));
    return s;
  }
  static EndpointSet box(VectorXd lo, VectorXd hi) {
    EndpointSet s;
    s.space_dim = static_cast<int>(lo.size());
    s.members.push_back(ControlSet::box(std::move(lo), std::move(hi)));
    return s;
  }
  static EndpointSet ball(VectorXd center, double radius) {
    EndpointSet s;
    s.space_dim = static_cast<int>(center.size());
    s.members.push_back(ControlSet::ball(std::move(center), radius));
    return s;
  }

  int dim() const { return space_dim; }
  bool unconstrained() const { return members.empty(); }

  EndpointSet intersected_with(const ControlSet& m) const {
    EndpointSet s = *this;
    require(m.dim() == space_dim, "grid-mismatch",
            "endpoint-set member has wrong dimension");
    s.members.push_back(m);
    return s;
  }

  EndpointSet translated(const VectorXd& v) const {
    EndpointSet s = *this;
    for (auto& m : s.members) m = m.translated(v);
    return s;
  }

  bool contains(const VectorXd& x, double tol) const {
    for (const auto& m : members)
      if (!m.contains(x, tol)) return false;
    return true;
  }

  /// Projection onto the intersection.  One member projects in closed form;
  /// several use Dykstra's alternating scheme (all members are convex).
  VectorXd project(const VectorXd& x) const {
    if (members.empty()) return x;
    if (members.size() == 1) return members.front().project(x);
    VectorXd y = x;
    std::vector<VectorXd> inc(members.size(), VectorXd::Zero(x.size()));
    for (int sweep = 0; sweep < 200; ++sweep) {
      double moved = 0.0;
      for (size_t m = 0; m < members.size(); ++m) {
        VectorXd z = y + inc[m];
        VectorXd yn = members[m].project(z);
        inc[m] = z - yn;
        moved += (yn - y).norm();
        y = yn;
      }
      if (moved <= 1e-14 * (1.0 + y.norm())) break;
    }
    require(contains(y, 1e-9 * (1.0 + x.norm())), "empty-set",
            "projection onto the endpoint set did not converge; the "
            "intersection is empty or degenerate");
    return y;
  }

  double distance(const VectorXd& x) const { return (x - project(x)).norm(); }

  /// Smooth exterior penalty 0.5 * sum_m dist_m(x)^2 with its gradient; zero
  /// exactly on the set.
  double penalty(const VectorXd& x, VectorXd* grad) const {
    double val = 0.0;
    if (grad) grad->setZero(x.size());
    for (const auto& m : members) {
      VectorXd r = x - m.project(x);
      val += 0.5 * r.squaredNorm();
      if (grad) *grad += r;
    }
    return val;
  }
};

/// Endpoint-cost control problem over the sweeping dynamics: minimize
/// g(x(0), x(1)) subject to x(0) in C0, x(1) in C1, u(t) in U, and the
/// trajectory staying delta-close to an optional reference pair.
struct MayerProblem {
  std::function<double(const VectorXd&, const VectorXd&)> g;
  std::function<void(const VectorXd&, const VectorXd&, VectorXd&, VectorXd&)>
      g_grad;  // fills dg/dx0, dg/dx1
  EndpointSet C0, C1;
  ControlSet U;
  double delta = 4.0;    // tube radius around the reference (monitored)
  double delta_o = 0.5;  // localization radius for the endpoint sets

  bool has_reference = false;
  std::function<VectorXd(double)> xbar;  // reference state path
  ControlPath ubar{1, 2};                // reference control

  static MayerProblem terminal_cost(
      std::function<double(const VectorXd&)> cost,
      std::function<VectorXd(const VectorXd&)> cost_grad, EndpointSet C0,
      EndpointSet C1, ControlSet U) {
    MayerProblem p;
    p.g = [cost](const VectorXd&, const VectorXd& x1) { return cost(x1); };
    p.g_grad = [cost_grad](const VectorXd& x0, const VectorXd& x1,
                           VectorXd& g0, VectorXd& g1) {
      g0 = VectorXd::Zero(x0.size());
      g1 = cost_grad(x1);
    };
    p.C0 = std::move(C0);
    p.C1 = std::move(C1);
    p.U = std::move(U);
    return p;
  }

  void set_reference(std::function<VectorXd(double)> x_ref, ControlPath u_ref) {
    has_reference = true;
    xbar = std::move(x_ref);
    ubar = std::move(u_ref);
  }
};

/// Checks the problem data against the state set: C0 must sit inside C
/// (sampled on member anchors and extreme points) and the radii must be
/// positive.
inline void validate_problem(const MayerProblem& prob, const SublevelSet& set,
                             const Tolerances& tol = {}) {
  require(prob.delta > 0.0 && prob.delta_o > 0.0, "unsupported-set",
          "tube radii must be positive");
  require(prob.delta_o <= prob.delta, "unsupported-set",
          "endpoint localization radius cannot exceed the tube radius");
  auto check_in_C = [&](const VectorXd& x) {
    require(set.psi(x) <= tol.boundary_tol, "unsupported-set",
            "an initial endpoint-set sample lies outside the state set");
  };
  for (const auto& m : prob.C0.members) {
    switch (m.kind) {
      case ControlSetKind::point:
        check_in_C(m.center);
        break;
      case ControlSetKind::box: {
        check_in_C(m.lo);
        check_in_C(m.hi);
        check_in_C(0.5 * (m.lo + m.hi));
        break;
      }
      case ControlSetKind::ball: {
        check_in_C(m.center);
        for (int i = 0; i < m.center.size(); ++i) {
          VectorXd e = m.center;
          e[i] += m.radius;
          VectorXd proj = prob.C0.project(e);
          check_in_C(proj);
        }
        break;
      }
    }
  }
}

/// C0(k): for an interior reference start, C0 localized to the delta_o ball;
/// for a boundary start, that set shifted inward by rho_k along -grad psi.
/// The shifted set must land inside C(k) (sampled on anchors), otherwise this
/// gamma is below the usable rank.
inline EndpointSet build_C0k(const MayerProblem& prob, const SublevelSet& set,
                             const PenaltySchedule& sched, size_t k,
                             const Tolerances& tol = {}) {
  require(prob.has_reference, "unsupported-set",
          "building C0(k) needs a reference pair");
  VectorXd x0 = prob.xbar(0.0);
  EndpointSet local =
      prob.C0.intersected_with(ControlSet::ball(x0, prob.delta_o));
  VectorXd anchor = x0;
  if (set.psi(x0) < -tol.boundary_tol) {
    require(local.contains(anchor, tol.boundary_tol), "empty-set",
            "reference start is not in C0");
    return local;
  }
  VectorXd grad = set.grad_psi(x0);
  require(grad.norm() > set.eta(), "degenerate-gradient",
          "boundary gradient too small to shift the start set");
  VectorXd shift = -(sched.rhos.at(k) / grad.norm()) * grad;
  EndpointSet shifted = local.translated(shift);
  anchor = x0 + shift;
  require(shifted.contains(anchor, tol.boundary_tol), "empty-set",
          "shifted start set lost its anchor");
  require(set.psi(anchor) <= -sched.alphas.at(k) + tol.boundary_tol,
          "containment",
          "shifted start set is not inside C(k) at this gamma; use a larger "
          "gamma rank");
  return shifted;
}

/// Intervals and balls have Q = I, so the state set is exactly the primitive
/// ball around the anchor; other shapes are not primitive-representable.
inline std::optional<ControlSet> state_set_primitive(const SublevelSet& set) {
  if (set.tag() == ShapeTag::interval || set.tag() == ShapeTag::ball) {
    double r2 = set.anchor().dot(set.anchor()) - set.c();
    return ControlSet::ball(set.anchor(), std::sqrt(std::max(0.0, r2)));
  }
  return std::nullopt;
}

/// C1(k): C1 localized around xbar(1), translated by the reachable endpoint
/// defect xbar_gk(1) - xbar(1), then intersected with C when C is exactly a
/// primitive (otherwise trajectory invariance already enforces membership).
inline EndpointSet build_C1k(const MayerProblem& prob, const SublevelSet& set,
                             const VectorXd& xbar1, const VectorXd& xbar_gk1,
                             const Tolerances& tol = {}) {
  EndpointSet local =
      prob.C1.intersected_with(ControlSet::ball(xbar1, prob.delta_o));
  EndpointSet moved = local.translated(xbar_gk1 - xbar1);
  if (auto prim = state_set_primitive(set)) {
    moved = moved.intersected_with(*prim);
  }
  require(moved.contains(xbar_gk1, 100.0 * tol.boundary_tol *
                                       (1.0 + xbar_gk1.norm())),
          "empty-set", "translated terminal set lost the reachable anchor");
  return moved;
}

/// J = g(x(0), x(1)) + 0.5 (|u(0)-ubar(0)|^2 + int |udot-ubardot|^2 +
/// |x(0)-xbar(0)|^2); the integral term is exact for piecewise-linear
/// controls on a shared grid.
inline double evaluate_J(const MayerProblem& prob, const VectorXd& x0,
                         const VectorXd& x1, const ControlPath& u,
                         const VectorXd& x0_center,
                         const ControlPath& u_center) {
  double prox = 0.5 * (sqr(u.w12_distance(u_center)) +
                       (x0 - x0_center).squaredNorm());
  return prob.g(x0, x1) + prox;
}

inline double evaluate_J(const MayerProblem& prob, const PenaltyRun& run,
                         const ControlPath& u) {
  require(prob.has_reference, "unsupported-set",
          "evaluating the proximal objective needs a reference pair");
  return evaluate_J(prob, run.x.front(), run.x.back(), u, prob.xbar(0.0),
                    prob.ubar.resampled(u.nodes()));
}

enum class SolveMode { nc, plain };

/// Fixed-grid implicit-midpoint transcription of the penalized dynamics with
/// an exact discrete adjoint.  Decision vector = initial state followed by
/// the control nodes (column-major).
class TranscribedNLP {
 public:
  TranscribedNLP(const SublevelSet& set, const Dynamics& dyn,
                 const MayerProblem& prob, double gamma, EndpointSet C0k,
                 EndpointSet C1k, const Tolerances& tol)
      : set_(set),
        dyn_(dyn),
        prob_(prob),
        gamma_(gamma),
        C0k_(std::move(C0k)),
        C1k_(std::move(C1k)),
        tol_(tol),
        steps_(tol.sim_steps),
        n_(set.dim()),
        m_(dyn.f.control_dim()),
        nodes_(tol.control_nodes),
        x0_center_(VectorXd::Zero(set.dim())),
        u_center_(dyn.f.control_dim(), tol.control_nodes) {
    require(gamma_ * set_.eta() > 2.0 * dyn_.Mbar, "schedule-domain",
            "gamma must exceed 2*Mbar/eta");
    ctrl_.h0 = 1.0 / steps_;
  }

  int dim() const { return n_ + m_ * nodes_; }
  int state_dim() const { return n_; }
  int control_nodes() const { return nodes_; }
  double gamma() const { return gamma_; }
  const EndpointSet& C1k() const { return C1k_; }

  void set_endpoint_weight(double w) { weight_ = w; }
  double endpoint_weight() const { return weight_; }

  /// Proximal center (x0, u); pass the reference in NC mode or the current
  /// warm start in plain mode.
  void set_prox_center(const VectorXd& x0c, const ControlPath& uc) {
    require(x0c.size() == n_ && uc.dim() == m_, "grid-mismatch",
            "prox center has wrong dimensions");
    x0_center_ = x0c;
    u_center_ = uc.nodes() == nodes_ ? uc : uc.resampled(nodes_);
  }

  VectorXd pack(const VectorXd& x0, const ControlPath& u) const {
    require(x0.size() == n_ && u.dim() == m_ && u.nodes() == nodes_,
            "grid-mismatch", "decision pieces have wrong dimensions");
    VectorXd d(dim());
    d.head(n_) = x0;
    d.tail(m_ * nodes_) =
        Eigen::Map<const VectorXd>(u.values().data(), m_ * nodes_);
    return d;
  }

  void unpack(const VectorXd& d, VectorXd& x0, ControlPath& u) const {
    x0 = d.head(n_);
    u = ControlPath(m_, nodes_);
    u.values() =
        Eigen::Map<const MatrixXd>(d.tail(m_ * nodes_).data(), m_, nodes_);
  }

  /// Exact projection: x0 onto C0(k), each control node onto U.
  VectorXd project(const VectorXd& d) const {
    VectorXd out = d;
    out.head(n_) = C0k_.project(d.head(n_));
    for (int j = 0; j < nodes_; ++j)
      out.segment(n_ + j * m_, m_) = prob_.U.project(d.segment(n_ + j * m_, m_));
    return out;
  }

  /// States on the fixed grid; empty when a stage solve fails (the caller
  /// treats that decision point as +inf).
  std::optional<std::vector<VectorXd>> simulate(const VectorXd& d) const {
    VectorXd x0;
    ControlPath u(m_, nodes_);
    unpack(d, x0, u);
    detail::PenaltyRhs rhs{set_, dyn_, gamma_};
    std::vector<VectorXd> xs(static_cast<size_t>(steps_) + 1);
    xs[0] = x0;
    double h = 1.0 / steps_;
    long newton = 0;
    for (int j = 0; j < steps_; ++j) {
      VectorXd u_mid = u.value((j + 0.5) * h);
      VectorXd next;
      if (!detail::midpoint_stage(rhs, xs[static_cast<size_t>(j)], u_mid, h,
                                  ctrl_, next, newton))
        return std::nullopt;
      xs[static_cast<size_t>(j) + 1] = std::move(next);
    }
    return xs;
  }

  double objective(const VectorXd& d) const {
    auto xs = simulate(d);
    if (!xs) return std::numeric_limits<double>::infinity();
    return objective_given_states(d, *xs);
  }

  /// Objective and its exact gradient via the discrete adjoint of the
  /// midpoint scheme.  Also exposes the terminal-cost costate samples w_j =
  /// dJ_terminal/dx_j for cross-checking against a continuous adjoint solve.
  double objective_and_gradient(const VectorXd& d, VectorXd& grad,
                                std::vector<VectorXd>* costates = nullptr) const {
    auto xs_opt = simulate(d);
    require(bool(xs_opt), "step-failure",
            "transcription forward pass failed at a gradient point");
    const std::vector<VectorXd>& xs = *xs_opt;
    VectorXd x0;
    ControlPath u(m_, nodes_);
    unpack(d, x0, u);
    const VectorXd& xS = xs.back();

    VectorXd g0, g1;
    prob_.g_grad(x0, xS, g0, g1);
    VectorXd pen_grad;
    C1k_.penalty(xS, &pen_grad);

    detail::PenaltyRhs rhs{set_, dyn_, gamma_};
    double h = 1.0 / steps_;
    VectorXd w = g1 + weight_ * pen_grad;  // dJ/dx_S
    if (costates) {
      costates->assign(static_cast<size_t>(steps_) + 1, VectorXd());
      costates->back() = w;
    }
    MatrixXd I = MatrixXd::Identity(n_, n_);
    VectorXd grad_u = VectorXd::Zero(m_ * nodes_);
    double cells = nodes_ - 1;
    for (int j = steps_ - 1; j >= 0; --j) {
      VectorXd xmid = 0.5 * (xs[static_cast<size_t>(j)] +
                             xs[static_cast<size_t>(j) + 1]);
      MatrixXd A = rhs.jacobian(xmid);
      VectorXd v = (I - 0.5 * h * A).transpose().partialPivLu().solve(w);
      VectorXd gu = h * dyn_.jac_u(xmid).transpose() * v;
      // scatter the midpoint-control sensitivity onto the two nodes that
      // interpolate u((j + 1/2) h)
      double s = std::clamp((j + 0.5) * h, 0.0, 1.0) * cells;
      int cell = std::min(static_cast<int>(s), nodes_ - 2);
      double wgt = s - cell;
      grad_u.segment(cell * m_, m_) += (1.0 - wgt) * gu;
      grad_u.segment((cell + 1) * m_, m_) += wgt * gu;
      w = (I + 0.5 * h * A).transpose() * v;
      if (costates) (*costates)[static_cast<size_t>(j)] = w;
    }

    // proximal terms: 0.5(|u(0)-uc(0)|^2 + int |udot-ucdot|^2 + |x0-x0c|^2)
    grad_u.segment(0, m_) += u.values().col(0) - u_center_.values().col(0);
    double dt = u.dt();
    for (int cidx = 0; cidx + 1 < nodes_; ++cidx) {
      VectorXd e = (u.values().col(cidx + 1) - u.values().col(cidx) -
                    (u_center_.values().col(cidx + 1) -
                     u_center_.values().col(cidx))) /
                   dt;
      grad_u.segment(cidx * m_, m_) -= e;
      grad_u.segment((cidx + 1) * m_, m_) += e;
    }

    grad.resize(dim());
    grad.head(n_) = w + g0 + (x0 - x0_center_);
    grad.tail(m_ * nodes_) = grad_u;
    return objective_given_states(d, xs);
  }

  double endpoint_violation(const std::vector<VectorXd>& xs) const {
    return C1k_.distance(xs.back());
  }

  /// Max tube excess max(0, |x(t) - xbar(t)| - delta) over the grid.
  double tube_violation(const std::vector<VectorXd>& xs) const {
    if (!prob_.has_reference) return 0.0;
    double worst = 0.0;
    double h = 1.0 / steps_;
    for (size_t j = 0; j < xs.size(); ++j) {
      double dev = (xs[j] - prob_.xbar(j * h)).norm() - prob_.delta;
      worst = std::max(worst, dev);
    }
    return std::max(0.0, worst);
  }

 private:
  double objective_given_states(const VectorXd& d,
                                const std::vector<VectorXd>& xs) const {
    VectorXd x0;
    ControlPath u(m_, nodes_);
    unpack(d, x0, u);
    double J = evaluate_J(prob_, x0, xs.back(), u, x0_center_, u_center_);
    return J + weight_ * C1k_.penalty(xs.back(), nullptr);
  }

  const SublevelSet& set_;
  const Dynamics& dyn_;
  const MayerProblem& prob_;
  double gamma_;
  EndpointSet C0k_, C1k_;
  Tolerances tol_;
  int steps_, n_, m_, nodes_;
  double weight_ = 0.0;
  VectorXd x0_center_;
  ControlPath u_center_;
  StepControl ctrl_;
};

enum class SolveStatus {
  converged,
  max_iterations,
  line_search_failure,
  infeasible_endpoint
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max-iterations";
    case SolveStatus::line_search_failure: return "line-search-failure";
    case SolveStatus::infeasible_endpoint: return "infeasible-endpoint";
  }
  return "unknown";
}

struct IterTrace {
  double J = 0.0;
  double pg_norm = 0.0;
  double step = 0.0;
  double udot_norm = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::converged;
  VectorXd x0;
  ControlPath u{1, 2};
  double J = 0.0;       // proximal objective at the solution
  double J_cost = 0.0;  // endpoint cost g alone
  double kkt_residual = 0.0;
  int iterations = 0;
  double endpoint_violation = 0.0;
  double tube_violation = 0.0;
  std::vector<IterTrace> trace;
  PenaltyRun run;  // adaptive re-integration at the returned control

  bool ok() const { return status == SolveStatus::converged; }
};

namespace detail {

/// Projected L-BFGS with Armijo backtracking.  Curvature pairs are dropped
/// whenever they fail the positivity test, which keeps the two-loop direction
/// a descent direction; projection onto the feasible box/ball nodes is exact.
struct ProjectedLbfgs {
  const TranscribedNLP& nlp;
  const Tolerances& tol;
  int max_iter = 400;
  std::vector<IterTrace>* trace = nullptr;

  SolveStatus minimize(VectorXd& d, double& J, double& pg_norm, int& iters) {
    const int mem = 10;
    std::deque<VectorXd> S, Y;
    d = nlp.project(d);
    VectorXd grad;
    J = nlp.objective_and_gradient(d, grad);
    for (iters = 0; iters < max_iter; ++iters) {
      pg_norm = (d - nlp.project(d - grad)).cwiseAbs().maxCoeff();
      record(J, pg_norm, 0.0, d);
      if (pg_norm <= tol.kkt_tol) return SolveStatus::converged;

      VectorXd dir = two_loop(grad, S, Y);
      double step = 1.0;
      double Jn = 0.0;
      VectorXd trial;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        trial = nlp.project(d - step * dir);
        VectorXd move = trial - d;
        double slope = grad.dot(move);
        if (slope <= 0.0) {
          Jn = nlp.objective(trial);
          if (Jn <= J + 1e-4 * slope) {
            accepted = true;
            break;
          }
        }
        step *= 0.5;
        if (step < 1e-14) break;
      }
      if (!accepted && !(dir - grad).isZero(0.0)) {
        // steepest-descent fallback before giving up
        step = 1.0;
        for (int ls = 0; ls < 60; ++ls) {
          trial = nlp.project(d - step * grad);
          VectorXd move = trial - d;
          double slope = grad.dot(move);
          if (slope <= 0.0) {
            Jn = nlp.objective(trial);
            if (Jn <= J + 1e-4 * slope) {
              accepted = true;
              break;
            }
          }
          step *= 0.5;
          if (step < 1e-14) break;
        }
      }
      if (!accepted) return SolveStatus::line_search_failure;

      VectorXd grad_new;
      double Jcheck = nlp.objective_and_gradient(trial, grad_new);
      VectorXd s = trial - d;
      VectorXd y = grad_new - grad;
      double sy = s.dot(y);
      if (sy > 1e-10 * s.norm() * y.norm()) {
        S.push_back(s);
        Y.push_back(y);
        if (static_cast<int>(S.size()) > mem) {
          S.pop_front();
          Y.pop_front();
        }
      }
      d = trial;
      grad = grad_new;
      J = Jcheck;
    }
    pg_norm = (d - nlp.project(d - grad)).cwiseAbs().maxCoeff();
    return pg_norm <= tol.kkt_tol ? SolveStatus::converged
                                  : SolveStatus::max_iterations;
  }

 private:
  void record(double J, double pg, double step, const VectorXd& d) {
    if (!trace) return;
    VectorXd x0;
    ControlPath u(1, 2);
    nlp.unpack(d, x0, u);
    trace->push_back(IterTrace{J, pg, step, u.w12_seminorm()});
  }

  static VectorXd two_loop(const VectorXd& grad, const std::deque<VectorXd>& S,
                           const std::deque<VectorXd>& Y) {
    VectorXd q = grad;
    if (S.empty()) return q;
    size_t k = S.size();
    std::vector<double> alpha(k), rho(k);
    for (size_t i = 0; i < k; ++i) rho[i] = 1.0 / Y[i].dot(S[i]);
    for (size_t i = k; i-- > 0;) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (size_t i = 0; i < k; ++i) {
      double beta = rho[i] * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    return q;
  }
};

}  // namespace detail

/// Solves one transcribed problem at a fixed gamma: exterior-penalty weight
/// continuation (10^1 .. 10^6) over projected L-BFGS runs, then re-integrates
/// the solution control with the adaptive stepper.  Iterates stay feasible in
/// (C0(k), U) by exact projection throughout; residual endpoint violation is
/// reported, never hidden.
inline SolveResult solve_Pk(const SublevelSet& set, const Dynamics& dyn,
                            const MayerProblem& prob, double gamma,
                            EndpointSet C0k, EndpointSet C1k, SolveMode mode,
                            const VectorXd& x0_init, const ControlPath& u_init,
                            const Tolerances& tol = {}) {
  TranscribedNLP nlp(set, dyn, prob, gamma, std::move(C0k), std::move(C1k),
                     tol);
  if (mode == SolveMode::nc) {
    require(prob.has_reference, "unsupported-set",
            "NC mode needs a reference pair");
    nlp.set_prox_center(prob.xbar(0.0), prob.ubar);
  } else {
    nlp.set_prox_center(x0_init, u_init);
  }

  SolveResult res;
  VectorXd d = nlp.project(nlp.pack(x0_init, u_init.resampled(tol.control_nodes)));
  double J = 0.0, pg = 0.0;
  int total_iters = 0;
  SolveStatus status = SolveStatus::converged;
  double last_violation = std::numeric_limits<double>::infinity();
  for (int p = 1; p <= 6; ++p) {
    nlp.set_endpoint_weight(std::pow(10.0, p));
    detail::ProjectedLbfgs opt{nlp, tol};
    opt.trace = &res.trace;
    int iters = 0;
    status = opt.minimize(d, J, pg, iters);
    total_iters += iters;
    auto xs = nlp.simulate(d);
    require(bool(xs), "step-failure", "solution forward pass failed");
    double violation = nlp.endpoint_violation(*xs);
    if (violation <= tol.boundary_tol) break;  // penalty already inactive
    if (p == 6 && violation > tol.endpoint_tol &&
        violation > 0.5 * last_violation) {
      status = SolveStatus::infeasible_endpoint;
    }
    last_violation = violation;
  }

  nlp.unpack(d, res.x0, res.u);
  res.status = status;
  res.J = J;
  res.kkt_residual = pg;
  res.iterations = total_iters;
  auto xs = nlp.simulate(d);
  require(bool(xs), "step-failure", "solution forward pass failed");
  res.endpoint_violation = nlp.endpoint_violation(*xs);
  res.tube_violation = nlp.tube_violation(*xs);
  res.J_cost = prob.g(res.x0, xs->back());
  res.run = integrate_penalized(set, dyn, gamma, res.x0, res.u, tol);
  return res;
}

struct ContinuationResult {
  std::vector<SolveResult> stages;       // one per gamma, ascending
  std::vector<EndpointSet> C0ks, C1ks;   // endpoint sets enforced per stage
  std::vector<double> control_steps;     // W^{1,2} distance between stages
  std::vector<double> J_values;          // proximal objective per stage
  bool converged = false;                // last control step <= cont_tol

  const SolveResult& final() const { return stages.back(); }
};

/// Warm-started continuation along the schedule.  NC mode keeps the proximal
/// center pinned to the supplied reference; plain mode re-centers on each
/// stage's warm start (proximal-point flavor).  Non-convergence after the
/// schedule is reported, not thrown.
inline ContinuationResult continuation_solve(const SublevelSet& set,
                                             const Dynamics& dyn,
                                             const MayerProblem& prob,
                                             const PenaltySchedule& sched,
                                             SolveMode mode,
                                             const Tolerances& tol = {}) {
  validate_problem(prob, set, tol);
  ContinuationResult out;
  VectorXd x0;
  ControlPath u(dyn.f.control_dim(), tol.control_nodes);
  if (mode == SolveMode::nc) {
    x0 = prob.xbar(0.0);
    u = prob.ubar.resampled(tol.control_nodes);
  } else {
    x0 = prob.C0.project(VectorXd::Zero(set.dim()));
    u = ControlPath::constant(prob.U.project(VectorXd::Zero(dyn.f.control_dim())),
                              tol.control_nodes);
  }

  for (size_t k = 0; k < sched.size(); ++k) {
    double gamma = sched.gammas[k];
    EndpointSet C0k = EndpointSet::whole(set.dim());
    EndpointSet C1k = EndpointSet::whole(set.dim());
    if (mode == SolveMode::nc) {
      C0k = build_C0k(prob, set, sched, k, tol);
      VectorXd xbar1 = prob.xbar(1.0);
      PenaltyRun ref_run = integrate_penalized(
          set, dyn, gamma, C0k.project(prob.xbar(0.0)), prob.ubar, tol);
      C1k = build_C1k(prob, set, xbar1, ref_run.x.back(), tol);
    } else {
      C0k = prob.C0;
      C1k = prob.C1;
      if (auto prim = state_set_primitive(set))
        C1k = C1k.intersected_with(*prim);
    }
    SolveResult res = solve_Pk(set, dyn, prob, gamma, C0k, C1k, mode,
                               x0, u, tol);
    out.C0ks.push_back(std::move(C0k));
    out.C1ks.push_back(std::move(C1k));
    if (!out.stages.empty())
      out.control_steps.push_back(res.u.w12_distance(out.stages.back().u));
    out.J_values.push_back(res.J);
    x0 = res.x0;
    u = res.u;
    out.stages.push_back(std::move(res));
  }
  out.converged = !out.control_steps.empty() &&
                  out.control_steps.back() <= tol.cont_tol;
  if (out.control_steps.empty()) out.converged = true;  // single stage
  return out;
}

}  // namespace sweeper
