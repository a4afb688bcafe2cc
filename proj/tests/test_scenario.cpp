#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sweeper/cli.hpp"

using namespace sweeper;

namespace {

std::filesystem::path corpus_dir() { return SWEEPER_SCENARIO_DIR; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::filesystem::path corpus_path(const std::string& name) {
  return corpus_dir() / (name + ".json");
}

json corpus_doc(const std::string& name) {
  return json::parse(slurp(corpus_path(name)));
}

Scenario corpus(const std::string& name) {
  return load_scenario(corpus_path(name).string());
}

std::filesystem::path temp_file(const std::string& name,
                                const std::string& content) {
  std::filesystem::path p =
      std::filesystem::temp_directory_path() / ("sweeper-test-" + name);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  return p;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"sweeper"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

// Expects fn() to throw with the given kind and a message mentioning token.
template <typename F>
void check_error(F&& fn, const std::string& kind, const std::string& token) {
  try {
    fn();
    FAIL("expected an error of kind " << kind);
  } catch (const error& e) {
    CHECK(e.kind() == kind);
    CHECK(std::string(e.what()).find(token) != std::string::npos);
  }
}

const char* kCorpus[] = {"slide1d",   "reach1d",       "disk-slide",
                         "disk-push", "ellipse-graze", "interior-null"};

}  // namespace

TEST_CASE("the shipped corpus loads with certified constants") {
  for (const char* name : kCorpus) {
    Scenario sc = corpus(name);
    CHECK(sc.name == name);
    CHECK(!sc.notes.empty());
    CHECK(sc.set.psi(sc.x0) <= 0.0);
  }

  Scenario slide = corpus("slide1d");
  CHECK(slide.set.tag() == ShapeTag::interval);
  CHECK(slide.set.dim() == 1);
  CHECK(slide.set.eta() == 0.9);
  CHECK(slide.dyn.Mbar == 2.0);
  CHECK(slide.dyn.phi.is_zero());
  CHECK(slide.schedule.gammas == std::vector<double>{10.0, 100.0, 1000.0,
                                                     10000.0});
  CHECK(slide.analytic_tag == "slide1d");
  CHECK(!slide.problem.has_value());
  CHECK(slide.default_u.nodes() == 101);

  Scenario reach = corpus("reach1d");
  REQUIRE(reach.problem.has_value());
  CHECK(reach.problem->has_reference);
  CHECK(reach.U.kind == ControlSetKind::box);
  CHECK(reach.problem->C0.members.size() == 1);
  CHECK(reach.problem->xbar(0.25)[0] == 0.25);

  Scenario push = corpus("disk-push");
  REQUIRE(push.problem.has_value());
  CHECK(!push.problem->has_reference);
  CHECK(push.problem->C1.unconstrained());
  CHECK(push.U.kind == ControlSetKind::ball);

  Scenario null = corpus("interior-null");
  CHECK(!null.dyn.phi.is_zero());
  CHECK(null.dyn.phi.Q(0, 0) == 1.0);
  CHECK(corpus("ellipse-graze").analytic_tag.empty());
}

TEST_CASE("serialization is the identity on the shipped files") {
  for (const char* name : kCorpus) {
    std::string text = slurp(corpus_path(name));
    Scenario sc = parse_scenario(json::parse(text));
    CHECK(serialize_scenario(sc) == text);
    Scenario again = parse_scenario(json::parse(serialize_scenario(sc)));
    CHECK(serialize_scenario(again) == text);
  }
}

TEST_CASE("missing fields are reported by path") {
  json doc = corpus_doc("slide1d");
  doc["set"].erase("eta");
  check_error([&] { parse_scenario(doc); }, "scenario-parse", "set.eta");

  json doc2 = corpus_doc("reach1d");
  doc2["problem"]["cost"].erase("weights");
  check_error([&] { parse_scenario(doc2); }, "scenario-parse",
              "problem.cost.weights");
}

TEST_CASE("unknown fields are rejected") {
  json doc = corpus_doc("slide1d");
  doc["frobnicator"] = 1;
  check_error([&] { parse_scenario(doc); }, "scenario-parse",
              "scenario.frobnicator");

  json doc2 = corpus_doc("slide1d");
  doc2["set"]["slope"] = 2.0;
  check_error([&] { parse_scenario(doc2); }, "scenario-parse", "set.slope");

  json doc3 = corpus_doc("slide1d");
  doc3["tolerances"] = json{{"not_a_tolerance", 1.0}};
  check_error([&] { parse_scenario(doc3); }, "scenario-parse",
              "not_a_tolerance");
}

TEST_CASE("declared constants that fail sampling are rejected at load") {
  // eta = 1.5 passes the structural checks (M_psi rho = 6 >= 4 eta) but the
  // interval's boundary gradient is 2, below the required 2 eta = 3.
  json doc = corpus_doc("slide1d");
  doc["set"]["eta"] = 1.5;
  doc["set"]["rho"] = 6.0;
  CHECK_NOTHROW(parse_scenario(doc));

  auto p = temp_file("bad-cert.json", doc.dump(2) + "\n");
  check_error([&] { load_scenario(p.string()); }, "certification-failure",
              "witness");
}

TEST_CASE("syntax errors carry the file and line") {
  auto p = temp_file("bad-syntax.json", "{\n  \"name\": \"x\",\n  \"oops\"\n}\n");
  check_error([&] { load_scenario(p.string()); }, "scenario-parse", ":4:");
}

TEST_CASE("analytic reference forms match their scenarios") {
  auto at = [](const ReferencePath& ref, double t) {
    size_t j = static_cast<size_t>(
        std::lround(t * static_cast<double>(ref.t.size() - 1)));
    return j;
  };

  ReferencePath slide = scenario_reference(corpus("slide1d"));
  CHECK(slide.kind == RefKind::analytic);
  size_t j = at(slide, 0.2);
  CHECK(slide.x[j][0] == Catch::Approx(0.4).margin(1e-12));
  CHECK(slide.xdot[j][0] == 2.0);
  CHECK(slide.xi[j] == 0.0);
  j = at(slide, 0.75);
  CHECK(slide.x[j][0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(slide.xdot[j][0] == 0.0);
  CHECK(slide.xi[j] == 1.0);

  ReferencePath reach = scenario_reference(corpus("reach1d"));
  j = at(reach, 0.5);
  CHECK(reach.x[j][0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(reach.xi[j] == 0.0);

  ReferencePath disk = scenario_reference(corpus("disk-slide"));
  j = at(disk, 0.25);
  CHECK(disk.x[j][0] == Catch::Approx(0.75).margin(1e-12));
  CHECK(disk.x[j][1] == 0.0);
  CHECK(disk.xi[j] == 0.0);
  j = at(disk, 0.75);
  CHECK(disk.x[j][0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(disk.xi[j] == 0.5);

  Scenario null = corpus("interior-null");
  ReferencePath still = scenario_reference(null);
  j = at(still, 1.0);
  CHECK(still.x[j][0] == Catch::Approx(0.4 * std::exp(-1.0)).margin(1e-14));
  CHECK(still.x[j][1] == Catch::Approx(-0.2 * std::exp(-1.0)).margin(1e-14));
  CHECK(still.xi[j] == 0.0);
}

TEST_CASE("scenarios without a tag fall back to the projected oracle") {
  Scenario sc = corpus("ellipse-graze");
  ReferencePath ref = scenario_reference(sc);
  CHECK(ref.kind == RefKind::oracle);
  double max_psi = -1.0, max_xi = 0.0;
  for (size_t i = 0; i < ref.t.size(); ++i) {
    max_psi = std::max(max_psi, sc.set.psi(ref.x[i]));
    max_xi = std::max(max_xi, ref.xi[i]);
  }
  CHECK(max_psi <= 1e-9);   // projected states never leave the set
  CHECK(max_xi > 0.1);      // the drift really does press on the boundary
}

TEST_CASE("omitted sections fall back to defaults") {
  json doc = {{"name", "minimal"},
              {"set",
               {{"shape", "interval"},
                {"center", 0.0},
                {"radius", 1.0},
                {"eta", 0.9},
                {"rho", 4.0}}},
              {"field",
               {{"kind", "constant"}, {"value", {1.0}}, {"control_dim", 1}}},
              {"Mbar", 1.2},
              {"x0", {0.0}},
              {"control", {{"set", {{"kind", "point"}, {"center", {0.0}}}}}},
              {"schedule", {{"gammas", {10.0, 100.0}}}}};
  Scenario sc = parse_scenario(doc);
  CHECK(sc.notes.empty());
  CHECK(sc.dyn.phi.is_zero());
  CHECK(sc.analytic_tag.empty());
  CHECK(!sc.problem.has_value());
  CHECK(sc.default_u.nodes() == 101);
  CHECK(sc.default_u.value(0.5).isZero(0.0));
  CHECK(sc.tol.sweep_tol == 0.05);

  doc["tolerances"] = json{{"sweep_tol", 0.1}, {"control_nodes", 21}};
  doc["control"]["nodes"] = 11;
  Scenario sc2 = parse_scenario(doc);
  CHECK(sc2.tol.sweep_tol == 0.1);
  CHECK(sc2.tol.boundary_tol == 1e-9);   // untouched default
  CHECK(sc2.default_u.nodes() == 11);    // explicit nodes beat the tolerance
}

TEST_CASE("structural validation catches inconsistent data") {
  json doc = corpus_doc("slide1d");
  doc["x0"] = {2.0};
  check_error([&] { parse_scenario(doc); }, "scenario-parse", "x0");

  json doc2 = corpus_doc("reach1d");
  doc2["control"]["default"] = json{{"kind", "constant"}, {"value", {5.0}}};
  check_error([&] { parse_scenario(doc2); }, "scenario-parse",
              "control.default");

  json doc3 = corpus_doc("slide1d");
  doc3["control"]["set"] = json{{"kind", "point"}, {"center", {0.0, 0.0}}};
  check_error([&] { parse_scenario(doc3); }, "scenario-parse", "control.set");

  json doc4 = corpus_doc("slide1d");
  doc4["analytic_reference"] = "warp-drive";
  check_error([&] { parse_scenario(doc4); }, "scenario-parse",
              "analytic_reference");

  // gamma eta = 0.9 does not clear 2 Mbar = 4: outside the schedule domain
  json doc5 = corpus_doc("slide1d");
  doc5["schedule"]["gammas"] = {1.0};
  check_error([&] { parse_scenario(doc5); }, "scenario-parse", "schedule");
}

TEST_CASE("tabulated artifacts are deterministic") {
  Scenario sc = corpus("slide1d");
  PenaltyRun a = integrate_penalized(sc.set, sc.dyn, 100.0, sc.x0,
                                     sc.default_u, sc.tol);
  PenaltyRun b = integrate_penalized(sc.set, sc.dyn, 100.0, sc.x0,
                                     sc.default_u, sc.tol);
  CHECK(csv_run(a) == csv_run(b));
  CHECK(csv_run(a).substr(0, 20) == "t,x0,xdot0,xi,psi\n0,");

  ReferencePath ref = scenario_reference(sc);
  ConvergenceReport ra = gamma_sweep(sc.set, sc.dyn, sc.x0, sc.default_u,
                                     sc.schedule, ref, sc.tol);
  ConvergenceReport rb = gamma_sweep(sc.set, sc.dyn, sc.x0, sc.default_u,
                                     sc.schedule, ref, sc.tol);
  CHECK(dump_json(sweep_json(sc, ra)) == dump_json(sweep_json(sc, rb)));
  CHECK(csv_sweep(ra) == csv_sweep(rb));
}

TEST_CASE("solve artifacts reload into the same candidate sweep") {
  Scenario sc = corpus("reach1d");
  PenaltySchedule sched({100.0}, sc.dyn.Mbar, sc.set.eta());
  ContinuationResult res = continuation_solve(sc.set, sc.dyn, *sc.problem,
                                              sched, SolveMode::nc, sc.tol);
  REQUIRE(res.stages.size() == 1);

  json doc = solve_json(sc, SolveMode::nc, res);
  std::vector<NCCandidate> sweep = solution_candidates(doc, sc);
  REQUIRE(sweep.size() == 1);
  CHECK(sweep[0].run.gamma == 100.0);
  CHECK(sweep[0].u.values() == res.stages[0].u.values());
  CHECK(sweep[0].C0k.members.size() == res.C0ks[0].members.size());
  CHECK(sweep[0].C1k.members.size() == res.C1ks[0].members.size());
  // same integrator, same inputs: the reloaded trajectory is bit-identical
  CHECK(sweep[0].run.x.back() == res.stages[0].run.x.back());

  json broken = doc;
  broken["stages"][0].erase("control");
  check_error([&] { solution_candidates(broken, sc); }, "scenario-parse",
              "stages[0].control");
}

TEST_CASE("cli verdicts map onto exit codes") {
  std::filesystem::path out =
      std::filesystem::temp_directory_path() / "sweeper-test-cli";
  std::filesystem::remove_all(out);

  CHECK(run({"certify", corpus_path("slide1d").string(), "--out",
             out.string()}) == 0);
  CHECK(std::filesystem::exists(out / "slide1d.certify.json"));

  CHECK(run({"simulate", corpus_path("interior-null").string(), "--gamma",
             "200", "--out", out.string()}) == 0);
  CHECK(std::filesystem::exists(out / "interior-null.run.csv"));
  CHECK(std::filesystem::exists(out / "interior-null.run.json"));

  // bad constants: certify reports FAIL (1), loading commands error (2)
  json doc = corpus_doc("slide1d");
  doc["name"] = "bad-cert";
  doc["set"]["eta"] = 1.5;
  doc["set"]["rho"] = 6.0;
  auto bad = temp_file("cli-bad-cert.json", doc.dump(2) + "\n");
  CHECK(run({"certify", bad.string(), "--out", out.string()}) == 1);
  CHECK(run({"simulate", bad.string(), "--out", out.string()}) == 2);

  CHECK(run({"simulate", (out / "no-such-file.json").string()}) == 2);
  CHECK(run({"simulate", corpus_path("slide1d").string(), "--frobnicate"}) ==
        2);
  // solve needs a problem section
  CHECK(run({"solve", corpus_path("slide1d").string(), "--out",
             out.string()}) == 2);
}

TEST_CASE("cli artifacts are byte-stable across runs") {
  std::filesystem::path base = std::filesystem::temp_directory_path();
  std::filesystem::path a = base / "sweeper-test-det-a";
  std::filesystem::path b = base / "sweeper-test-det-b";
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);

  for (const auto& dir : {a, b}) {
    CHECK(run({"simulate", corpus_path("slide1d").string(), "--gamma", "200",
               "--out", dir.string()}) == 0);
    CHECK(run({"sweep", corpus_path("interior-null").string(), "--out",
               dir.string()}) == 0);
  }
  for (const char* f : {"slide1d.run.csv", "slide1d.run.json",
                        "interior-null.sweep.csv", "interior-null.sweep.json"})
    CHECK(slurp(a / f) == slurp(b / f));
}
