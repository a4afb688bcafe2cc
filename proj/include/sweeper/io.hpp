#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sweeper/convergence.hpp"
#include "sweeper/dynamics.hpp"
#include "sweeper/geometry.hpp"
#include "sweeper/nc_checker.hpp"
#include "sweeper/ocp.hpp"
#include "sweeper/oracle.hpp"
#include "sweeper/scenario.hpp"

namespace sweeper {

inline void write_text(const std::filesystem::path& path,
                       const std::string& content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io-failure", "cannot open " + path.string());
  out << content;
  require(out.good(), "io-failure", "short write to " + path.string());
}

namespace detail {

inline void csv_row(std::string& out, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i)
    out += (i ? "," : "") + cells[i];
  out += "\n";
}

inline std::vector<std::string> vec_cells(const VectorXd& v) {
  std::vector<std::string> cells;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    cells.push_back(format_double(v[i]));
  return cells;
}

inline void append_cells(std::vector<std::string>& row,
                         const std::vector<std::string>& cells) {
  row.insert(row.end(), cells.begin(), cells.end());
}

inline std::vector<std::string> indexed(const std::string& base, int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back(base + std::to_string(i));
  return names;
}

}  // namespace detail

/// Uniform-grid trajectory table: t, state, velocity, multiplier, psi.
inline std::string csv_run(const PenaltyRun& run) {
  std::string out;
  std::vector<std::string> header{"t"};
  detail::append_cells(header, detail::indexed("x", run.dim()));
  detail::append_cells(header, detail::indexed("xdot", run.dim()));
  header.push_back("xi");
  header.push_back("psi");
  detail::csv_row(out, header);
  for (size_t j = 0; j < run.t.size(); ++j) {
    std::vector<std::string> row{format_double(run.t[j])};
    detail::append_cells(row, detail::vec_cells(run.x[j]));
    detail::append_cells(row, detail::vec_cells(run.xdot[j]));
    row.push_back(format_double(run.xi[j]));
    row.push_back(format_double(run.psi[j]));
    detail::csv_row(out, row);
  }
  return out;
}

inline std::string csv_oracle(const OracleRun& run) {
  std::string out;
  int n = static_cast<int>(run.x.front().size());
  std::vector<std::string> header{"t"};
  detail::append_cells(header, detail::indexed("x", n));
  detail::append_cells(header, detail::indexed("xdot", n));
  header.push_back("xi");
  header.push_back("psi");
  header.push_back("on_boundary");
  detail::csv_row(out, header);
  for (size_t j = 0; j < run.t.size(); ++j) {
    std::vector<std::string> row{format_double(run.t[j])};
    detail::append_cells(row, detail::vec_cells(run.x[j]));
    detail::append_cells(row, detail::vec_cells(run.xdot[j]));
    row.push_back(format_double(run.xi[j]));
    row.push_back(format_double(run.psi[j]));
    row.push_back(run.on_boundary[j] ? "1" : "0");
    detail::csv_row(out, row);
  }
  return out;
}

inline std::string csv_sweep(const ConvergenceReport& rep) {
  std::string out;
  detail::csv_row(out, {"gamma", "alpha", "rho", "sup_state_err",
                        "l2_velocity_err", "l2_multiplier_err", "max_xi",
                        "tv_xi", "max_psi", "started_in_Ck"});
  for (const SweepRecord& r : rep.records)
    detail::csv_row(
        out, {format_double(r.gamma), format_double(r.alpha),
              format_double(r.rho), format_double(r.sup_state_err),
              format_double(r.l2_velocity_err),
              format_double(r.l2_multiplier_err), format_double(r.max_xi),
              format_double(r.tv_xi), format_double(r.max_psi),
              r.started_in_Ck ? "1" : "0"});
  return out;
}

inline std::string csv_adjoint(const AdjointArc& arc) {
  std::string out;
  int n = static_cast<int>(arc.p.front().size());
  std::vector<std::string> header{"t"};
  detail::append_cells(header, detail::indexed("p", n));
  detail::append_cells(header, detail::indexed("q", n));
  detail::csv_row(out, header);
  for (size_t j = 0; j < arc.t.size(); ++j) {
    std::vector<std::string> row{format_double(arc.t[j])};
    detail::append_cells(row, detail::vec_cells(arc.p[j]));
    detail::append_cells(row, detail::vec_cells(arc.q[j]));
    detail::csv_row(out, row);
  }
  return out;
}

inline std::string csv_control(const ControlPath& u) {
  std::string out;
  std::vector<std::string> header{"t"};
  detail::append_cells(header, detail::indexed("u", u.dim()));
  detail::csv_row(out, header);
  for (int j = 0; j < u.nodes(); ++j) {
    std::vector<std::string> row{format_double(u.node_time(j))};
    detail::append_cells(row, detail::vec_cells(u.values().col(j)));
    detail::csv_row(out, row);
  }
  return out;
}

inline std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

/// Constant-certification summary plus the schedule identity residuals
/// gamma_k e^{-alpha_k gamma_k} - 2 Mbar / eta (relative).
inline json certification_json(const Scenario& sc,
                               const CertificationReport& cert) {
  json out;
  out["scenario"] = sc.name;
  out["pass"] = cert.pass;
  out["message"] = cert.message;
  out["min_boundary_grad"] = cert.min_boundary_grad;
  out["epsilon_est"] = cert.epsilon_est;
  out["Mbar_psi_emp"] = cert.Mbar_psi_emp;
  out["M_psi_emp"] = cert.M_psi_emp;
  out["boundary_samples"] = cert.boundary_samples;
  if (cert.witness.size() > 0) out["witness"] = vector_json(cert.witness);
  json sched = json::array();
  for (size_t k = 0; k < sc.schedule.gammas.size(); ++k)
    sched.push_back(json{{"gamma", sc.schedule.gammas[k]},
                         {"alpha", sc.schedule.alphas[k]},
                         {"rho", sc.schedule.rhos[k]},
                         {"identity_residual", sc.schedule.identity_residual(k)}});
  out["schedule"] = sched;
  return out;
}

inline json run_json(const Scenario& sc, const PenaltyRun& run,
                     const BoundReport& bounds) {
  json out;
  out["scenario"] = sc.name;
  out["gamma"] = run.gamma;
  out["max_psi"] = run.diag.max_psi;
  out["max_xi"] = run.diag.max_xi;
  out["max_speed"] = run.diag.max_speed;
  out["energy_integral"] = run.diag.energy_integral;
  out["steps_accepted"] = run.diag.steps_accepted;
  out["steps_rejected"] = run.diag.steps_rejected;
  out["bounds"] = json{{"containment_residual", bounds.containment_residual},
                       {"multiplier_residual", bounds.multiplier_residual},
                       {"speed_residual", bounds.speed_residual},
                       {"energy_residual", bounds.energy_residual},
                       {"started_in_Ck", bounds.started_in_Ck},
                       {"pass", bounds.pass}};
  return out;
}

inline json oracle_json(const Scenario& sc, const OracleRun& run) {
  double xi_cap = sc.dyn.Mbar / (2.0 * sc.set.eta());
  json out;
  out["scenario"] = sc.name;
  out["h"] = run.h;
  out["max_xi"] = run.max_xi;
  out["xi_bound"] = xi_cap;
  out["xi_bound_residual"] = run.max_xi - xi_cap;
  long contact = 0;
  for (uint8_t b : run.on_boundary) contact += b;
  out["contact_nodes"] = contact;
  out["nodes"] = run.t.size();
  return out;
}

inline json sweep_json(const Scenario& sc, const ConvergenceReport& rep) {
  json out;
  out["scenario"] = sc.name;
  out["reference"] = to_string(rep.reference);
  out["multiplier_applicable"] = rep.multiplier_applicable;
  out["pass"] = rep.pass;
  out["note"] = rep.note;
  json records = json::array();
  for (const SweepRecord& r : rep.records)
    records.push_back(json{{"gamma", r.gamma},
                           {"alpha", r.alpha},
                           {"rho", r.rho},
                           {"sup_state_err", r.sup_state_err},
                           {"l2_velocity_err", r.l2_velocity_err},
                           {"l2_multiplier_err", r.l2_multiplier_err},
                           {"max_xi", r.max_xi},
                           {"tv_xi", r.tv_xi},
                           {"max_psi", r.max_psi},
                           {"started_in_Ck", r.started_in_Ck}});
  out["records"] = records;
  return out;
}

namespace detail {

inline json verdict_json(const NCVerdict& v) {
  return json{{"residual", v.residual}, {"tolerance", v.tol}, {"pass", v.pass}};
}

}  // namespace detail

inline json nc_json(const Scenario& sc, const NCReport& rep) {
  json out;
  out["scenario"] = sc.name;
  out["gamma"] = rep.gamma;
  out["lambda"] = rep.lambda;
  out["pT"] = vector_json(rep.pT);
  out["conditions"] =
      json{{"adjoint_consistency", detail::verdict_json(rep.adjoint_consistency)},
           {"maximization", detail::verdict_json(rep.maximization)},
           {"transversality_initial",
            detail::verdict_json(rep.transversality_initial)},
           {"transversality_final",
            detail::verdict_json(rep.transversality_final)},
           {"slackness", detail::verdict_json(rep.slackness)},
           {"nu_support", detail::verdict_json(rep.nu_support)},
           {"weak_maximization", detail::verdict_json(rep.weak_maximization)},
           {"nontriviality", detail::verdict_json(rep.nontriviality)}};
  out["normalization"] = rep.normalization;
  out["limit_normalization_gap"] = rep.limit_normalization_gap;
  out["fit_objective"] = rep.fit_objective;
  out["tv_p"] = rep.tv_p;
  out["divergence_warning"] = rep.divergence_warning;
  out["regime_violation"] = rep.regime_violation;
  out["pass"] = rep.pass;
  out["note"] = rep.note;
  return out;
}

inline json control_path_json(const ControlPath& u) {
  json values = json::array();
  for (int j = 0; j < u.nodes(); ++j)
    values.push_back(vector_json(u.values().col(j)));
  return json{{"nodes", u.nodes()}, {"values", values}};
}

inline ControlPath parse_control_path(const json& spec,
                                      const std::string& where) {
  int nodes = detail::jint(detail::req(spec, where, "nodes"),
                           where + ".nodes");
  const json& values = detail::req(spec, where, "values");
  if (!values.is_array() || static_cast<int>(values.size()) != nodes)
    detail::parse_fail(where + ".values", "expected one row per node");
  MatrixXd cols = detail::jmat(values, where + ".values");
  ControlPath u(static_cast<int>(cols.cols()), nodes);
  u.values() = cols.transpose();
  return u;
}

/// Full continuation record.  Each stage carries enough to re-simulate the
/// candidate (gamma, start state, control nodes) together with the endpoint
/// sets that were enforced, so a certificate check can rebuild the sweep from
/// this document alone.
inline json solve_json(const Scenario& sc, SolveMode mode,
                       const ContinuationResult& res) {
  json out;
  out["scenario"] = sc.name;
  out["mode"] = mode == SolveMode::nc ? "nc" : "plain";
  out["converged"] = res.converged;
  out["control_steps"] = res.control_steps;
  out["J_values"] = res.J_values;
  json stages = json::array();
  for (size_t k = 0; k < res.stages.size(); ++k) {
    const SolveResult& s = res.stages[k];
    stages.push_back(json{{"gamma", s.run.gamma},
                          {"status", to_string(s.status)},
                          {"J", s.J},
                          {"J_cost", s.J_cost},
                          {"kkt_residual", s.kkt_residual},
                          {"iterations", s.iterations},
                          {"endpoint_violation", s.endpoint_violation},
                          {"tube_violation", s.tube_violation},
                          {"x0", vector_json(s.x0)},
                          {"control", control_path_json(s.u)},
                          {"C0k", endpoint_set_json(res.C0ks[k])},
                          {"C1k", endpoint_set_json(res.C1ks[k])}});
  }
  out["stages"] = stages;
  return out;
}

/// Rebuilds the certificate sweep from a solve document by re-integrating
/// each recorded stage control at its gamma.
inline std::vector<NCCandidate> solution_candidates(const json& doc,
                                                    const Scenario& sc) {
  const json& stages = detail::req(doc, "solution", "stages");
  if (!stages.is_array() || stages.empty())
    detail::parse_fail("solution.stages", "expected a nonempty array");
  std::vector<NCCandidate> sweep;
  for (size_t k = 0; k < stages.size(); ++k) {
    const std::string where = "solution.stages[" + std::to_string(k) + "]";
    const json& st = stages[k];
    double gamma = detail::jnum(detail::req(st, where, "gamma"),
                                where + ".gamma");
    VectorXd x0 = detail::jvec(detail::req(st, where, "x0"), where + ".x0");
    if (x0.size() != sc.set.dim())
      detail::parse_fail(where + ".x0", "dimension mismatch with the scenario");
    ControlPath u = parse_control_path(detail::req(st, where, "control"),
                                       where + ".control");
    if (u.dim() != sc.U.dim())
      detail::parse_fail(where + ".control",
                         "dimension mismatch with the scenario control set");
    NCCandidate cand;
    cand.run = integrate_penalized(sc.set, sc.dyn, gamma, x0, u, sc.tol);
    cand.u = u;
    cand.C0k = parse_endpoint_set(detail::req(st, where, "C0k"),
                                  where + ".C0k", sc.set.dim());
    cand.C1k = parse_endpoint_set(detail::req(st, where, "C1k"),
                                  where + ".C1k", sc.set.dim());
    sweep.push_back(std::move(cand));
  }
  return sweep;
}

}  // namespace sweeper
