#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support.hpp"
#include "sweeper/ocp.hpp"
#include "sweeper/oracle.hpp"

using namespace sweeper;
using namespace fixtures;

namespace {

// scalar integrator on C = [-1, 1]: maximize x(1) with |u| <= 1
MayerProblem reach_problem() {
  MayerProblem p = MayerProblem::terminal_cost(
      [](const VectorXd& x1) { return -x1[0]; },
      [](const VectorXd& x1) { return VectorXd::Constant(x1.size(), -1.0); },
      EndpointSet::point(VectorXd::Zero(1)),
      EndpointSet::box(VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)),
      ControlSet::box(VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)));
  p.set_reference([](double t) { return VectorXd::Constant(1, t); },
                  ControlPath::constant(VectorXd::Constant(1, 1.0), 101));
  return p;
}

Dynamics push_dyn() {
  return Dynamics{FieldSpec::linear(MatrixXd::Zero(2, 2),
                                    MatrixXd::Identity(2, 2), VectorXd::Zero(2)),
                  PhiSpec::zero(2), 1.2};
}

// planar pusher on the unit disk: minimize |x(1) - (2,0)|^2 with |u| <= 1
MayerProblem push_problem() {
  VectorXd target(2);
  target << 2.0, 0.0;
  return MayerProblem::terminal_cost(
      [target](const VectorXd& x1) { return (x1 - target).squaredNorm(); },
      [target](const VectorXd& x1) { return VectorXd(2.0 * (x1 - target)); },
      EndpointSet::point(VectorXd::Zero(2)), EndpointSet::whole(2),
      ControlSet::ball(VectorXd::Zero(2), 1.0));
}

// independent route to the pusher cost: 16 directions x 3^5 piecewise-linear
// magnitude profiles, each evaluated on the projection-stepping dynamics
double brute_force_push_cost() {
  SublevelSet set = disk_set();
  Dynamics dyn = push_dyn();
  Tolerances tol;
  VectorXd target(2);
  target << 2.0, 0.0;
  const double levels[3] = {0.25, 0.625, 1.0};
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 16; ++a) {
    double th = 2.0 * M_PI * a / 16.0;
    VectorXd e(2);
    e << std::cos(th), std::sin(th);
    for (int code = 0; code < 243; ++code) {
      ControlPath u(2, 5);
      int c = code;
      for (int j = 0; j < 5; ++j) {
        u.values().col(j) = levels[c % 3] * e;
        c /= 3;
      }
      OracleRun run =
          catching_up(set, dyn, VectorXd::Zero(2), u, 1e-3, tol);
      best = std::min(best, (run.x.back() - target).squaredNorm());
    }
  }
  return best;
}

}  // namespace

TEST_CASE("endpoint sets project exactly onto primitive intersections") {
  EndpointSet quarter = EndpointSet::box(VectorXd::Zero(2),
                                         VectorXd::Constant(2, 2.0))
                            .intersected_with(
                                ControlSet::ball(VectorXd::Zero(2), 1.0));
  VectorXd far(2);
  far << 2.0, 2.0;
  VectorXd proj = quarter.project(far);
  double s = std::sqrt(0.5);
  CHECK((proj - VectorXd::Constant(2, s)).norm() < 1e-10);
  CHECK(quarter.contains(proj, 1e-9));
  CHECK(quarter.distance(far) == Catch::Approx((far - proj).norm()).margin(1e-10));

  VectorXd inside(2);
  inside << 0.3, 0.4;
  CHECK(quarter.penalty(inside, nullptr) == 0.0);

  VectorXd grad;
  double val = quarter.penalty(far, &grad);
  CHECK(val > 0.0);
  double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    VectorXd lo = far, hi = far;
    lo[i] -= h;
    hi[i] += h;
    double fd = (quarter.penalty(hi, nullptr) - quarter.penalty(lo, nullptr)) /
                (2.0 * h);
    CHECK(grad[i] == Catch::Approx(fd).margin(1e-6));
  }
}

TEST_CASE("interior start sets stay put while boundary starts shift by rho") {
  Tolerances tol;
  SublevelSet set = reach_set();
  PenaltySchedule sched({10.0, 100.0, 1000.0}, 2.0, 0.9);

  MayerProblem interior = reach_problem();  // xbar(0) = 0, deep inside
  for (size_t k = 0; k < sched.size(); ++k) {
    EndpointSet C0k = build_C0k(interior, set, sched, k, tol);
    CHECK(C0k.project(VectorXd::Constant(1, 5.0))[0] == 0.0);
    CHECK(C0k.contains(VectorXd::Zero(1), 1e-12));
  }

  MayerProblem edge = reach_problem();
  edge.C0 = EndpointSet::point(VectorXd::Constant(1, 1.0));
  edge.set_reference([](double) { return VectorXd::Constant(1, 1.0); },
                     ControlPath::constant(VectorXd::Zero(1), 101));
  for (size_t k = 0; k < sched.size(); ++k) {
    EndpointSet C0k = build_C0k(edge, set, sched, k, tol);
    double anchor = C0k.project(VectorXd::Constant(1, 5.0))[0];
    CHECK(anchor == Catch::Approx(1.0 - sched.rhos[k]).margin(1e-14));
    // shifted start is inside C(k) from rank 0 for this geometry
    CHECK(set.psi(VectorXd::Constant(1, anchor)) <= -sched.alphas[k]);
  }
}

TEST_CASE("terminal sets translate by the reachable-endpoint defect") {
  Tolerances tol;
  SublevelSet set = reach_set();
  MayerProblem p = reach_problem();
  p.C1 = EndpointSet::box(VectorXd::Constant(1, 0.9), VectorXd::Constant(1, 1.0));

  VectorXd xbar1 = VectorXd::Constant(1, 1.0);
  VectorXd reached = VectorXd::Constant(1, 0.98);
  EndpointSet C1k = build_C1k(p, set, xbar1, reached, tol);
  CHECK(C1k.project(VectorXd::Constant(1, 2.0))[0] ==
        Catch::Approx(0.98).margin(1e-12));
  CHECK(C1k.project(VectorXd::Constant(1, 0.0))[0] ==
        Catch::Approx(0.88).margin(1e-12));
  CHECK(C1k.contains(VectorXd::Constant(1, 0.93), 1e-12));

  // zero translate leaves the localized set unchanged
  EndpointSet same = build_C1k(p, set, xbar1, xbar1, tol);
  CHECK(same.project(VectorXd::Constant(1, 2.0))[0] ==
        Catch::Approx(1.0).margin(1e-12));

  // the translate shrinks as gamma grows: the defect is the layer depth
  double prev = 1.0;
  for (double gamma : {100.0, 1000.0, 10000.0}) {
    PenaltyRun run = integrate_penalized(set, reach_dyn(), gamma,
                                         VectorXd::Zero(1), p.ubar, tol);
    double defect = std::abs(1.0 - run.x.back()[0]);
    CHECK(defect < prev);
    prev = defect;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("proximal objective vanishes at the reference and prices derivative offsets") {
  Tolerances tol;
  SublevelSet set = reach_set();
  Dynamics dyn = reach_dyn();
  MayerProblem p = reach_problem();
  PenaltyRun run = integrate_penalized(set, dyn, 1000.0, VectorXd::Zero(1),
                                       p.ubar, tol);
  double J_ref = evaluate_J(p, run, p.ubar);
  CHECK(J_ref == Catch::Approx(p.g(run.x.front(), run.x.back())).margin(1e-12));

  // u = ubar + t * 0.1: only the derivative-offset integral contributes
  ControlPath bent = ControlPath::ramp(VectorXd::Constant(1, 1.0),
                                       VectorXd::Constant(1, 0.1), 101);
  double J_bent = evaluate_J(p, run.x.front(), run.x.back(), bent,
                             VectorXd::Zero(1), p.ubar);
  double J_base = evaluate_J(p, run.x.front(), run.x.back(), p.ubar,
                             VectorXd::Zero(1), p.ubar);
  CHECK(J_bent - J_base == Catch::Approx(0.5 * 0.01).margin(1e-12));
}

TEST_CASE("adjoint gradients match central differences at random feasible points") {
  Tolerances tol;
  SublevelSet set = reach_set();
  Dynamics dyn = reach_dyn();
  MayerProblem p = reach_problem();
  TranscribedNLP nlp(set, dyn, p, 100.0, EndpointSet::point(VectorXd::Zero(1)),
                     EndpointSet::box(VectorXd::Constant(1, -1.0),
                                      VectorXd::Constant(1, 1.0)),
                     tol);
  nlp.set_prox_center(VectorXd::Zero(1), p.ubar);
  nlp.set_endpoint_weight(10.0);

  std::mt19937 rng(20240814u);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd d(nlp.dim());
    d[0] = 0.9 * unit(rng);
    for (int i = 1; i < nlp.dim(); ++i) d[i] = unit(rng);
    VectorXd v(nlp.dim());
    for (int i = 0; i < nlp.dim(); ++i) v[i] = unit(rng);
    v.normalize();

    VectorXd grad;
    nlp.objective_and_gradient(d, grad);
    double a = grad.dot(v);
    double h = 1e-6;
    double b = (nlp.objective(d + h * v) - nlp.objective(d - h * v)) / (2.0 * h);
    double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
    worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("adjoint gradients hold in two dimensions with a ball control set") {
  Tolerances tol;
  SublevelSet set = disk_set();
  Dynamics dyn = push_dyn();
  MayerProblem p = push_problem();
  TranscribedNLP nlp(set, dyn, p, 100.0, p.C0,
                     EndpointSet::ball(VectorXd::Zero(2), 1.0), tol);
  nlp.set_prox_center(VectorXd::Zero(2),
                      ControlPath::constant(VectorXd::Zero(2), tol.control_nodes));
  nlp.set_endpoint_weight(10.0);

  std::mt19937 rng(7u);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd d(nlp.dim());
    d[0] = 0.4 * unit(rng);
    d[1] = 0.4 * unit(rng);
    for (int i = 2; i < nlp.dim(); ++i) d[i] = 0.7 * unit(rng);
    VectorXd v(nlp.dim());
    for (int i = 0; i < nlp.dim(); ++i) v[i] = unit(rng);
    v.normalize();

    VectorXd grad;
    nlp.objective_and_gradient(d, grad);
    double a = grad.dot(v);
    double h = 1e-6;
    double b = (nlp.objective(d + h * v) - nlp.objective(d - h * v)) / (2.0 * h);
    double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
    worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("reach solve attains the analytic optimum") {
  Tolerances tol;
  SublevelSet set = reach_set();
  Dynamics dyn = reach_dyn();
  MayerProblem p = reach_problem();
  PenaltySchedule sched({100.0, 1000.0, 10000.0}, dyn.Mbar, set.eta());

  ContinuationResult cont =
      continuation_solve(set, dyn, p, sched, SolveMode::nc, tol);
  REQUIRE(cont.stages.size() == 3);
  const SolveResult& fin = cont.final();
  CHECK(fin.ok());
  CHECK(fin.J <= -1.0 + 1e-2);
  CHECK(std::abs(fin.J_cost - (-1.0)) <= 1e-2);
  CHECK(cont.converged);
  REQUIRE(cont.control_steps.size() == 2);
  // the optimum is the projected bound u = 1 at every stage, so successive
  // distances can only shrink (here: reach zero exactly)
  CHECK(cont.control_steps[1] <= cont.control_steps[0]);
  CHECK(cont.control_steps[1] <= tol.cont_tol);
  // returned control hugs the upper bound
  for (int j = 0; j < fin.u.nodes(); ++j) {
    CHECK(fin.u.values()(0, j) <= 1.0 + 1e-15);
    CHECK(fin.u.values()(0, j) >= 0.9);
  }
  // feasibility of the returned run
  CHECK(fin.run.diag.max_psi <= tol.boundary_tol);
  CHECK(fin.endpoint_violation <= tol.endpoint_tol);
  CHECK(fin.tube_violation == 0.0);
}

TEST_CASE("zero endpoint cost returns the reference pair") {
  Tolerances tol;
  SublevelSet set = reach_set();
  Dynamics dyn = reach_dyn();
  MayerProblem p = reach_problem();
  p.g = [](const VectorXd&, const VectorXd&) { return 0.0; };
  p.g_grad = [](const VectorXd& x0, const VectorXd& x1, VectorXd& g0,
                VectorXd& g1) {
    g0 = VectorXd::Zero(x0.size());
    g1 = VectorXd::Zero(x1.size());
  };
  PenaltySchedule sched({100.0}, dyn.Mbar, set.eta());
  EndpointSet C0k = build_C0k(p, set, sched, 0, tol);
  EndpointSet C1k = EndpointSet::box(VectorXd::Constant(1, -1.0),
                                     VectorXd::Constant(1, 1.0));
  // starting at the reference pair the proximal terms (the whole objective)
  // are already zero, so the solve is a fixpoint: nothing to descend
  SolveResult res = solve_Pk(set, dyn, p, 100.0, C0k, C1k, SolveMode::nc,
                             VectorXd::Zero(1), p.ubar, tol);
  CHECK(res.ok());
  CHECK(res.u.w12_distance(p.ubar.resampled(res.u.nodes())) <= 1e-10);
  CHECK((res.x0 - VectorXd::Zero(1)).norm() <= 1e-12);
  CHECK(res.J <= 1e-12);
  CHECK(res.iterations <= 2);
}

TEST_CASE("accepted steps never increase the stage objective") {
  Tolerances tol;
  SublevelSet set = reach_set();
  Dynamics dyn = reach_dyn();
  MayerProblem p = reach_problem();
  PenaltySchedule sched({100.0}, dyn.Mbar, set.eta());
  EndpointSet C0k = build_C0k(p, set, sched, 0, tol);
  EndpointSet C1k = EndpointSet::box(VectorXd::Constant(1, -1.0),
                                     VectorXd::Constant(1, 1.0));
  SolveResult res = solve_Pk(set, dyn, p, 100.0, C0k, C1k, SolveMode::nc,
                             VectorXd::Zero(1),
                             ControlPath::constant(VectorXd::Zero(1), 101), tol);
  REQUIRE(res.trace.size() > 2);
  for (size_t i = 0; i + 1 < res.trace.size(); ++i)
    CHECK(res.trace[i + 1].J <= res.trace[i].J + 1e-14);
  // minimizing-sequence probe: control derivatives stay bounded throughout
  for (const auto& it : res.trace) CHECK(it.udot_norm <= 10.0);
}

TEST_CASE("re-solving from the solution barely moves the objective") {
  Tolerances tol;
  SublevelSet set = reach_set();
  Dynamics dyn = reach_dyn();
  MayerProblem p = reach_problem();
  PenaltySchedule sched({100.0}, dyn.Mbar, set.eta());
  EndpointSet C0k = build_C0k(p, set, sched, 0, tol);
  EndpointSet C1k = EndpointSet::box(VectorXd::Constant(1, -1.0),
                                     VectorXd::Constant(1, 1.0));
  SolveResult first = solve_Pk(set, dyn, p, 100.0, C0k, C1k, SolveMode::nc,
                               VectorXd::Zero(1),
                               ControlPath::constant(VectorXd::Zero(1), 101),
                               tol);
  SolveResult second = solve_Pk(set, dyn, p, 100.0, C0k, C1k, SolveMode::nc,
                                first.x0, first.u, tol);
  CHECK(second.ok());
  CHECK(std::abs(second.J - first.J) <= 1e-6);
}

TEST_CASE("single-stage continuation reduces to one solve") {
  Tolerances tol;
  SublevelSet set = reach_set();
  Dynamics dyn = reach_dyn();
  MayerProblem p = reach_problem();
  PenaltySchedule sched({1000.0}, dyn.Mbar, set.eta());
  ContinuationResult cont =
      continuation_solve(set, dyn, p, sched, SolveMode::nc, tol);
  CHECK(cont.stages.size() == 1);
  CHECK(cont.converged);
  CHECK(cont.final().J <= -1.0 + 1e-2);
}

TEST_CASE("active terminal constraints are met through weight continuation") {
  Tolerances tol;
  SublevelSet set = reach_set();
  Dynamics dyn = reach_dyn();
  MayerProblem p = reach_problem();
  p.has_reference = false;  // plain mode: centers on the warm start
  p.C1 = EndpointSet::box(VectorXd::Constant(1, -1.0),
                          VectorXd::Constant(1, 0.5));
  PenaltySchedule sched({1000.0}, dyn.Mbar, set.eta());
  ContinuationResult cont =
      continuation_solve(set, dyn, p, sched, SolveMode::plain, tol);
  const SolveResult& fin = cont.final();
  CHECK(fin.status != SolveStatus::infeasible_endpoint);
  CHECK(fin.endpoint_violation <= tol.endpoint_tol);
  CHECK(std::abs(fin.J_cost - (-0.5)) <= 5e-3);
}

TEST_CASE("disk push reaches the projected target cost") {
  Tolerances tol;
  SublevelSet set = disk_set();
  Dynamics dyn = push_dyn();
  MayerProblem p = push_problem();
  PenaltySchedule sched({100.0, 1000.0, 10000.0}, dyn.Mbar, set.eta());
  ContinuationResult cont =
      continuation_solve(set, dyn, p, sched, SolveMode::plain, tol);
  const SolveResult& fin = cont.final();
  double brute = brute_force_push_cost();
  CHECK(std::abs(brute - 1.0) <= 5e-2);
  CHECK(std::abs(fin.J_cost - 1.0) <= 5e-2);
  CHECK(std::abs(fin.J_cost - brute) <= 5e-2);
  CHECK(fin.run.diag.max_psi <= tol.boundary_tol);
  for (int j = 0; j < fin.u.nodes(); ++j)
    CHECK(fin.u.values().col(j).norm() <= 1.0 + 1e-12);
}
