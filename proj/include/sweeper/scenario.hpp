#pragma once

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sweeper/common.hpp"
#include "sweeper/control.hpp"
#include "sweeper/convergence.hpp"
#include "sweeper/dynamics.hpp"
#include "sweeper/field.hpp"
#include "sweeper/geometry.hpp"
#include "sweeper/ocp.hpp"

namespace sweeper {

using json = nlohmann::json;

/// A fully validated problem instance: the constraint set with certified
/// constants, the controlled dynamics, a start state, the admissible control
/// set with a default path, the penalty schedule, tolerance overrides, and an
/// optional endpoint-cost problem.  doc keeps the validated source document,
/// so serialization is the identity on anything this parser accepted.
struct Scenario {
  std::string name;
  std::string notes;
  SublevelSet set;
  Dynamics dyn;
  VectorXd x0;
  ControlSet U;
  ControlPath default_u;
  PenaltySchedule schedule;
  Tolerances tol;
  std::optional<MayerProblem> problem;
  std::string analytic_tag;  // names a built-in closed form; empty when none
  json doc;
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& where,
                                    const std::string& msg) {
  fail("scenario-parse", where + ": " + msg);
}

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) parse_fail(where, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) parse_fail(where + "." + it.key(), "unknown field");
  }
}

inline const json& req(const json& obj, const std::string& where,
                       const char* key) {
  if (!obj.is_object() || !obj.contains(key))
    parse_fail(where + "." + key, "missing required field");
  return obj.at(key);
}

inline double jnum(const json& v, const std::string& where) {
  if (!v.is_number()) parse_fail(where, "expected a number");
  return v.get<double>();
}

inline int jint(const json& v, const std::string& where) {
  if (!v.is_number_integer()) parse_fail(where, "expected an integer");
  return v.get<int>();
}

inline std::string jstr(const json& v, const std::string& where) {
  if (!v.is_string()) parse_fail(where, "expected a string");
  return v.get<std::string>();
}

inline VectorXd jvec(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty())
    parse_fail(where, "expected a nonempty array of numbers");
  VectorXd out(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    out[static_cast<Eigen::Index>(i)] =
        jnum(v[i], where + "[" + std::to_string(i) + "]");
  return out;
}

inline MatrixXd jmat(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty())
    parse_fail(where, "expected a nonempty array of rows");
  VectorXd first = jvec(v[0], where + "[0]");
  MatrixXd out(v.size(), first.size());
  out.row(0) = first;
  for (size_t i = 1; i < v.size(); ++i) {
    VectorXd row = jvec(v[i], where + "[" + std::to_string(i) + "]");
    if (row.size() != first.size()) parse_fail(where, "ragged rows");
    out.row(static_cast<Eigen::Index>(i)) = row;
  }
  return out;
}

/// Re-raises a constructor invariant failure with the field path prepended,
/// keeping the original kind as part of the message.
template <typename F>
auto contextualize(const std::string& where, F&& build)
    -> decltype(build()) {
  try {
    return build();
  } catch (const error& e) {
    parse_fail(where, e.what());
  }
}

}  // namespace detail

inline json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    rows.push_back(vector_json(m.row(i)));
  return rows;
}

inline ControlSet parse_control_set(const json& spec,
                                    const std::string& where) {
  std::string kind = detail::jstr(detail::req(spec, where, "kind"),
                                  where + ".kind");
  if (kind == "point") {
    detail::check_keys(spec, where, {"kind", "center"});
    return ControlSet::point(
        detail::jvec(detail::req(spec, where, "center"), where + ".center"));
  }
  if (kind == "box") {
    detail::check_keys(spec, where, {"kind", "lo", "hi"});
    VectorXd lo = detail::jvec(detail::req(spec, where, "lo"), where + ".lo");
    VectorXd hi = detail::jvec(detail::req(spec, where, "hi"), where + ".hi");
    if (lo.size() != hi.size()) detail::parse_fail(where, "lo/hi size mismatch");
    return detail::contextualize(where, [&] { return ControlSet::box(lo, hi); });
  }
  if (kind == "ball") {
    detail::check_keys(spec, where, {"kind", "center", "radius"});
    VectorXd c = detail::jvec(detail::req(spec, where, "center"),
                              where + ".center");
    double r = detail::jnum(detail::req(spec, where, "radius"),
                            where + ".radius");
    return detail::contextualize(where, [&] { return ControlSet::ball(c, r); });
  }
  detail::parse_fail(where + ".kind",
                     "unknown kind '" + kind + "' (point | box | ball)");
}

inline json control_set_json(const ControlSet& s) {
  json out;
  switch (s.kind) {
    case ControlSetKind::point:
      out["kind"] = "point";
      out["center"] = vector_json(s.center);
      break;
    case ControlSetKind::box:
      out["kind"] = "box";
      out["lo"] = vector_json(s.lo);
      out["hi"] = vector_json(s.hi);
      break;
    case ControlSetKind::ball:
      out["kind"] = "ball";
      out["center"] = vector_json(s.center);
      out["radius"] = s.radius;
      break;
  }
  return out;
}

inline EndpointSet parse_endpoint_set(const json& spec,
                                      const std::string& where, int dim) {
  std::string kind = detail::jstr(detail::req(spec, where, "kind"),
                                  where + ".kind");
  EndpointSet out;
  out.space_dim = dim;
  if (kind == "whole") {
    detail::check_keys(spec, where, {"kind"});
    out = EndpointSet::whole(dim);
  } else if (kind == "intersection") {
    detail::check_keys(spec, where, {"kind", "members"});
    const json& members = detail::req(spec, where, "members");
    if (!members.is_array() || members.empty())
      detail::parse_fail(where + ".members", "expected a nonempty array");
    for (size_t i = 0; i < members.size(); ++i)
      out.members.push_back(parse_control_set(
          members[i], where + ".members[" + std::to_string(i) + "]"));
  } else {
    out.members.push_back(parse_control_set(spec, where));
  }
  for (const ControlSet& m : out.members)
    if (m.dim() != dim)
      detail::parse_fail(where, "member dimension " + std::to_string(m.dim()) +
                                    " does not match the state dimension " +
                                    std::to_string(dim));
  return out;
}

inline json endpoint_set_json(const EndpointSet& s) {
  if (s.members.empty()) return json{{"kind", "whole"}};
  if (s.members.size() == 1) return control_set_json(s.members.front());
  json out{{"kind", "intersection"}};
  json members = json::array();
  for (const ControlSet& m : s.members) members.push_back(control_set_json(m));
  out["members"] = members;
  return out;
}

/// "constant" and "ramp" path specs shared by the default control and the
/// reference pair.
inline ControlPath parse_path_spec(const json& spec, const std::string& where,
                                   int dim, int nodes) {
  std::string kind = detail::jstr(detail::req(spec, where, "kind"),
                                  where + ".kind");
  VectorXd a, b;
  if (kind == "constant") {
    detail::check_keys(spec, where, {"kind", "value"});
    a = detail::jvec(detail::req(spec, where, "value"), where + ".value");
    b = VectorXd::Zero(a.size());
  } else if (kind == "ramp") {
    detail::check_keys(spec, where, {"kind", "start", "slope"});
    a = detail::jvec(detail::req(spec, where, "start"), where + ".start");
    b = detail::jvec(detail::req(spec, where, "slope"), where + ".slope");
    if (a.size() != b.size())
      detail::parse_fail(where, "start/slope size mismatch");
  } else {
    detail::parse_fail(where + ".kind",
                       "unknown kind '" + kind + "' (constant | ramp)");
  }
  if (a.size() != dim)
    detail::parse_fail(where, "dimension " + std::to_string(a.size()) +
                                  " does not match the control dimension " +
                                  std::to_string(dim));
  return ControlPath::ramp(a, b, nodes);
}

namespace detail {

inline SublevelSet parse_set(const json& spec) {
  std::string where = "set";
  std::string shape = jstr(req(spec, where, "shape"), "set.shape");
  double eta = jnum(req(spec, where, "eta"), "set.eta");
  double rho = jnum(req(spec, where, "rho"), "set.rho");
  if (shape == "interval") {
    check_keys(spec, where, {"shape", "center", "radius", "eta", "rho"});
    double center = jnum(req(spec, where, "center"), "set.center");
    double radius = jnum(req(spec, where, "radius"), "set.radius");
    return contextualize(where, [&] {
      return SublevelSet::interval(center, radius, eta, rho);
    });
  }
  if (shape == "ball") {
    check_keys(spec, where, {"shape", "center", "radius", "eta", "rho"});
    VectorXd center = jvec(req(spec, where, "center"), "set.center");
    double radius = jnum(req(spec, where, "radius"), "set.radius");
    return contextualize(where, [&] {
      return SublevelSet::ball(center, radius, eta, rho);
    });
  }
  if (shape == "ellipse") {
    check_keys(spec, where, {"shape", "center", "semiaxes", "eta", "rho"});
    VectorXd center = jvec(req(spec, where, "center"), "set.center");
    VectorXd axes = jvec(req(spec, where, "semiaxes"), "set.semiaxes");
    return contextualize(where, [&] {
      return SublevelSet::ellipse(center, axes, eta, rho);
    });
  }
  parse_fail("set.shape",
             "unknown shape '" + shape + "' (interval | ball | ellipse)");
}

inline FieldSpec parse_field(const json& spec, int state_dim) {
  std::string where = "field";
  std::string kind = jstr(req(spec, where, "kind"), "field.kind");
  FieldSpec f;
  if (kind == "constant") {
    check_keys(spec, where, {"kind", "value", "control_dim"});
    VectorXd value = jvec(req(spec, where, "value"), "field.value");
    int m = jint(req(spec, where, "control_dim"), "field.control_dim");
    if (m < 1) parse_fail("field.control_dim", "must be at least 1");
    f = FieldSpec::constant(value, m);
  } else if (kind == "linear") {
    check_keys(spec, where, {"kind", "A", "B", "c"});
    MatrixXd A = jmat(req(spec, where, "A"), "field.A");
    MatrixXd B = jmat(req(spec, where, "B"), "field.B");
    VectorXd c = jvec(req(spec, where, "c"), "field.c");
    f = contextualize(where, [&] { return FieldSpec::linear(A, B, c); });
  } else {
    parse_fail("field.kind",
               "unknown kind '" + kind + "' (constant | linear)");
  }
  if (f.state_dim() != state_dim)
    parse_fail(where, "state dimension " + std::to_string(f.state_dim()) +
                          " does not match the set dimension " +
                          std::to_string(state_dim));
  return f;
}

inline PhiSpec parse_phi(const json* spec, int state_dim) {
  if (!spec) return PhiSpec::zero(state_dim);
  std::string where = "phi";
  std::string kind = jstr(req(*spec, where, "kind"), "phi.kind");
  if (kind == "zero") {
    check_keys(*spec, where, {"kind"});
    return PhiSpec::zero(state_dim);
  }
  if (kind == "quadratic") {
    check_keys(*spec, where, {"kind", "coeff", "center"});
    double coeff = jnum(req(*spec, where, "coeff"), "phi.coeff");
    VectorXd center = jvec(req(*spec, where, "center"), "phi.center");
    if (center.size() != state_dim)
      parse_fail("phi.center", "dimension mismatch with the state");
    if (coeff < 0.0)
      parse_fail("phi.coeff", "must be nonnegative for a convex term");
    return PhiSpec::quadratic(coeff, center);
  }
  parse_fail("phi.kind", "unknown kind '" + kind + "' (zero | quadratic)");
}

inline Tolerances parse_tolerances(const json* spec) {
  Tolerances t;
  if (!spec) return t;
  std::string where = "tolerances";
  if (!spec->is_object()) parse_fail(where, "expected an object");
  for (auto it = spec->begin(); it != spec->end(); ++it) {
    const std::string key = it.key();
    const std::string at = where + "." + key;
    if (key == "boundary_tol") t.boundary_tol = jnum(*it, at);
    else if (key == "step_abstol") t.step_abstol = jnum(*it, at);
    else if (key == "output_nodes") t.output_nodes = jint(*it, at);
    else if (key == "oracle_h") t.oracle_h = jnum(*it, at);
    else if (key == "sweep_tol") t.sweep_tol = jnum(*it, at);
    else if (key == "sweep_floor") t.sweep_floor = jnum(*it, at);
    else if (key == "report_tol") t.report_tol = jnum(*it, at);
    else if (key == "quadrature_tol") t.quadrature_tol = jnum(*it, at);
    else if (key == "adjoint_tol") t.adjoint_tol = jnum(*it, at);
    else if (key == "kkt_tol") t.kkt_tol = jnum(*it, at);
    else if (key == "cont_tol") t.cont_tol = jnum(*it, at);
    else if (key == "control_nodes") t.control_nodes = jint(*it, at);
    else if (key == "sim_steps") t.sim_steps = jint(*it, at);
    else if (key == "endpoint_tol") t.endpoint_tol = jnum(*it, at);
    else if (key == "active_tol") t.active_tol = jnum(*it, at);
    else if (key == "nc_residual_tol") t.nc_residual_tol = jnum(*it, at);
    else if (key == "nontriviality_tol") t.nontriviality_tol = jnum(*it, at);
    else if (key == "udot_na_threshold") t.udot_na_threshold = jnum(*it, at);
    else if (key == "certify_samples") t.certify_samples = jint(*it, at);
    else parse_fail(at, "unknown tolerance");
  }
  return t;
}

inline std::optional<MayerProblem> parse_problem(const json* spec, int dim,
                                                 const ControlSet& U,
                                                 int control_nodes) {
  if (!spec) return std::nullopt;
  std::string where = "problem";
  check_keys(*spec, where,
             {"cost", "C0", "C1", "reference", "delta", "delta_o"});

  const json& cost = req(*spec, where, "cost");
  std::string ckind = jstr(req(cost, "problem.cost", "kind"),
                           "problem.cost.kind");
  std::function<double(const VectorXd&)> g;
  std::function<VectorXd(const VectorXd&)> g_grad;
  if (ckind == "linear") {
    check_keys(cost, "problem.cost", {"kind", "weights"});
    VectorXd w = jvec(req(cost, "problem.cost", "weights"),
                      "problem.cost.weights");
    if (w.size() != dim)
      parse_fail("problem.cost.weights", "dimension mismatch with the state");
    g = [w](const VectorXd& x1) { return w.dot(x1); };
    g_grad = [w](const VectorXd&) { return w; };
  } else if (ckind == "target") {
    check_keys(cost, "problem.cost", {"kind", "target"});
    VectorXd target = jvec(req(cost, "problem.cost", "target"),
                           "problem.cost.target");
    if (target.size() != dim)
      parse_fail("problem.cost.target", "dimension mismatch with the state");
    g = [target](const VectorXd& x1) { return (x1 - target).squaredNorm(); };
    g_grad = [target](const VectorXd& x1) {
      return VectorXd(2.0 * (x1 - target));
    };
  } else {
    parse_fail("problem.cost.kind",
               "unknown kind '" + ckind + "' (linear | target)");
  }

  EndpointSet C0 = parse_endpoint_set(req(*spec, where, "C0"), "problem.C0",
                                      dim);
  EndpointSet C1 = parse_endpoint_set(req(*spec, where, "C1"), "problem.C1",
                                      dim);
  MayerProblem prob = MayerProblem::terminal_cost(g, g_grad, std::move(C0),
                                                  std::move(C1), U);
  if (spec->contains("delta"))
    prob.delta = jnum(spec->at("delta"), "problem.delta");
  if (spec->contains("delta_o"))
    prob.delta_o = jnum(spec->at("delta_o"), "problem.delta_o");

  if (spec->contains("reference")) {
    const json& ref = spec->at("reference");
    check_keys(ref, "problem.reference", {"xbar", "ubar"});
    const json& xb = req(ref, "problem.reference", "xbar");
    std::string xkind = jstr(req(xb, "problem.reference.xbar", "kind"),
                             "problem.reference.xbar.kind");
    std::function<VectorXd(double)> xbar;
    if (xkind == "constant") {
      check_keys(xb, "problem.reference.xbar", {"kind", "value"});
      VectorXd v = jvec(req(xb, "problem.reference.xbar", "value"),
                        "problem.reference.xbar.value");
      if (v.size() != dim)
        parse_fail("problem.reference.xbar.value", "dimension mismatch");
      xbar = [v](double) { return v; };
    } else if (xkind == "ramp") {
      check_keys(xb, "problem.reference.xbar", {"kind", "start", "slope"});
      VectorXd a = jvec(req(xb, "problem.reference.xbar", "start"),
                        "problem.reference.xbar.start");
      VectorXd b = jvec(req(xb, "problem.reference.xbar", "slope"),
                        "problem.reference.xbar.slope");
      if (a.size() != dim || b.size() != dim)
        parse_fail("problem.reference.xbar", "dimension mismatch");
      xbar = [a, b](double t) { return VectorXd(a + t * b); };
    } else {
      parse_fail("problem.reference.xbar.kind",
                 "unknown kind '" + xkind + "' (constant | ramp)");
    }
    ControlPath ubar = parse_path_spec(req(ref, "problem.reference", "ubar"),
                                       "problem.reference.ubar", U.dim(),
                                       control_nodes);
    prob.set_reference(std::move(xbar), std::move(ubar));
  }
  return prob;
}

}  // namespace detail

/// Builds a Scenario from a parsed document: structural validation with
/// field-path error messages, dimension checks, and default filling.  Runs no
/// sampling certification; load_scenario adds that.
inline Scenario parse_scenario(const json& doc) {
  detail::check_keys(doc, "scenario",
                     {"name", "notes", "set", "field", "phi", "Mbar", "x0",
                      "control", "schedule", "problem", "tolerances",
                      "analytic_reference"});
  std::string name = detail::jstr(detail::req(doc, "scenario", "name"),
                                  "name");
  std::string notes =
      doc.contains("notes") ? detail::jstr(doc.at("notes"), "notes") : "";

  SublevelSet set = detail::parse_set(detail::req(doc, "scenario", "set"));
  const json* phi_spec = doc.contains("phi") ? &doc.at("phi") : nullptr;
  FieldSpec field = detail::parse_field(detail::req(doc, "scenario", "field"),
                                        set.dim());
  PhiSpec phi = detail::parse_phi(phi_spec, set.dim());
  double Mbar = detail::jnum(detail::req(doc, "scenario", "Mbar"), "Mbar");
  if (Mbar <= 0.0) detail::parse_fail("Mbar", "must be positive");
  Dynamics dyn{std::move(field), std::move(phi), Mbar};

  Tolerances tol = detail::parse_tolerances(
      doc.contains("tolerances") ? &doc.at("tolerances") : nullptr);

  VectorXd x0 = detail::jvec(detail::req(doc, "scenario", "x0"), "x0");
  if (x0.size() != set.dim())
    detail::parse_fail("x0", "dimension mismatch with the state set");
  if (set.psi(x0) > tol.boundary_tol)
    detail::parse_fail("x0", "lies outside the admissible set (psi = " +
                                 format_double(set.psi(x0)) + ")");

  const json& ctrl = detail::req(doc, "scenario", "control");
  detail::check_keys(ctrl, "control", {"set", "default", "nodes"});
  ControlSet U = parse_control_set(detail::req(ctrl, "control", "set"),
                                   "control.set");
  if (U.dim() != dyn.f.control_dim())
    detail::parse_fail("control.set",
                       "dimension " + std::to_string(U.dim()) +
                           " does not match the field control dimension " +
                           std::to_string(dyn.f.control_dim()));
  int nodes = ctrl.contains("nodes")
                  ? detail::jint(ctrl.at("nodes"), "control.nodes")
                  : tol.control_nodes;
  if (nodes < 2) detail::parse_fail("control.nodes", "needs at least 2 nodes");
  ControlPath default_u =
      ctrl.contains("default")
          ? parse_path_spec(ctrl.at("default"), "control.default", U.dim(),
                            nodes)
          : ControlPath::constant(U.project(VectorXd::Zero(U.dim())), nodes);
  for (int j = 0; j < default_u.nodes(); ++j)
    if (!U.contains(default_u.value(default_u.node_time(j)), 1e-9))
      detail::parse_fail("control.default",
                         "values leave the admissible control set");

  const json& sched_spec = detail::req(doc, "scenario", "schedule");
  detail::check_keys(sched_spec, "schedule", {"gammas"});
  VectorXd gv = detail::jvec(detail::req(sched_spec, "schedule", "gammas"),
                             "schedule.gammas");
  std::vector<double> gammas(gv.data(), gv.data() + gv.size());
  PenaltySchedule schedule = detail::contextualize("schedule", [&] {
    return PenaltySchedule(gammas, Mbar, set.eta());
  });

  std::optional<MayerProblem> problem = detail::parse_problem(
      doc.contains("problem") ? &doc.at("problem") : nullptr, set.dim(), U,
      nodes);
  if (problem)
    detail::contextualize("problem",
                          [&] { validate_problem(*problem, set, tol); return 0; });

  std::string tag;
  if (doc.contains("analytic_reference")) {
    tag = detail::jstr(doc.at("analytic_reference"), "analytic_reference");
    bool known = tag == "slide1d" || tag == "reach1d" || tag == "disk-slide" ||
                 tag == "interior-null";
    if (!known)
      detail::parse_fail("analytic_reference",
                         "unknown tag '" + tag +
                             "' (slide1d | reach1d | disk-slide | "
                             "interior-null)");
  }

  return Scenario{std::move(name), std::move(notes), std::move(set),
                  std::move(dyn),  std::move(x0),    std::move(U),
                  std::move(default_u), std::move(schedule), tol,
                  std::move(problem), std::move(tag), doc};
}

/// The stored document back out; dump is deterministic (sorted keys,
/// shortest-round-trip numbers), so serialize(parse(serialize(s))) is
/// byte-identical to serialize(s).
inline std::string serialize_scenario(const Scenario& sc) {
  return sc.doc.dump(2) + "\n";
}

namespace detail {

inline json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "scenario-parse", path + ": cannot open file");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    size_t upto = std::min(text.size(), static_cast<size_t>(e.byte));
    auto line = 1 + std::count(text.begin(),
                               text.begin() + static_cast<long>(upto), '\n');
    fail("scenario-parse",
         path + ":" + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace detail

/// Parses and certifies: the declared set constants are sampled
/// (certify_constants) and the declared field bound is sampled over C x U;
/// either failure rejects the scenario with the witness in the message.
inline Scenario load_scenario(const std::string& path) {
  Scenario sc = parse_scenario(detail::load_json_file(path));
  CertificationReport cert = certify_constants(sc.set, sc.tol.certify_samples);
  if (!cert.pass) {
    std::string witness = "[";
    for (Eigen::Index i = 0; i < cert.witness.size(); ++i)
      witness += (i ? ", " : "") + format_double(cert.witness[i]);
    fail("certification-failure",
         sc.name + ": " + cert.message + " (witness " + witness + "])");
  }
  double excess = field_bound_residual(sc.set, sc.dyn, sc.U,
                                       sc.tol.certify_samples);
  require(excess <= 1e-9, "certification-failure",
          sc.name + ": sampled |f_phi| exceeds the declared bound by " +
              format_double(excess));
  return sc;
}

/// Reference pair for sweeps and stationarity checks: the closed form named
/// by the scenario's tag, otherwise the catching-up oracle on the default
/// control.  The tags assert forms valid for the corpus members as shipped
/// (their dynamics, start, and default control).
inline ReferencePath scenario_reference(const Scenario& sc) {
  const int N = sc.tol.output_nodes;
  const VectorXd x0 = sc.x0;
  if (sc.analytic_tag == "slide1d") {
    // xdot = 2 pressed against the right wall of [-1, 1]
    double hit = (1.0 - x0[0]) / 2.0;
    return reference_from_functions(
        N,
        [=](double t) {
          return VectorXd::Constant(1, std::min(x0[0] + 2.0 * t, 1.0));
        },
        [=](double t) { return VectorXd::Constant(1, t < hit ? 2.0 : 0.0); },
        [=](double t) { return t >= hit ? 1.0 : 0.0; });
  }
  if (sc.analytic_tag == "reach1d") {
    // xdot = u with u = 1: touches the wall exactly at the final time
    return reference_from_functions(
        N, [=](double t) { return VectorXd::Constant(1, x0[0] + t); },
        [](double) { return VectorXd::Constant(1, 1.0); },
        [](double) { return 0.0; });
  }
  if (sc.analytic_tag == "disk-slide") {
    // unit rightward push on the disk: the boundary absorbs the motion
    double hit = 1.0 - x0[0];
    return reference_from_functions(
        N,
        [=](double t) {
          VectorXd x(2);
          x << std::min(x0[0] + t, 1.0), 0.0;
          return x;
        },
        [=](double t) {
          VectorXd v(2);
          v << (t < hit ? 1.0 : 0.0), 0.0;
          return v;
        },
        [=](double t) { return t >= hit ? 0.5 : 0.0; });
  }
  if (sc.analytic_tag == "interior-null") {
    // pure contraction toward the anchor: never meets the boundary
    double k = sc.dyn.phi.Q(0, 0);
    return reference_from_functions(
        N, [=](double t) { return VectorXd(x0 * std::exp(-k * t)); },
        [=](double t) { return VectorXd(-k * x0 * std::exp(-k * t)); },
        [](double) { return 0.0; });
  }
  return reference_from_oracle(sc.set, sc.dyn, sc.x0, sc.default_u, sc.tol);
}

}  // namespace sweeper
