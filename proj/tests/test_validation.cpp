#include <catch_amalgamated.hpp>

#include "refplan/formulation.hpp"
#include "refplan/solver.hpp"
#include "refplan/validation.hpp"
#include "support/instances.hpp"

using namespace refplan;
using Catch::Approx;

namespace {

struct Solved {
  BenchmarkInstance inst;
  AlgebraicModel model;
  PlanSolution plan;
  double objective = 0.0;
};

// SLP plan of the demo, computed once per build option set.
const Solved& demo_plan(bool delta_base) {
  static std::map<bool, Solved> cache;
  auto it = cache.find(delta_base);
  if (it != cache.end()) return it->second;
  Solved s;
  s.inst = refplan::testing::demo_instance();
  BuildOptions o;
  o.delta_base = delta_base;
  s.model = build_model(s.inst, o);
  auto r = slp_heuristic(s.model, {});
  REQUIRE(r.status == SolveStatus::feasible);
  s.plan = plan_from_values(s.model, r.values, "demo", "slp");
  s.objective = r.objective;
  return cache.emplace(delta_base, std::move(s)).first->second;
}

}  // namespace

TEST_CASE("solver plan passes the independent check") {
  const auto& s = demo_plan(true);
  auto report = check_solution(s.inst, s.plan, 1e-6);
  for (const auto& v : report.violations) INFO(v.id << " " << v.relative);
  CHECK(report.feasible());
  CHECK_FALSE(report.residuals.empty());
  CHECK(report.profit.total() == Approx(s.objective).epsilon(1e-6));
  CHECK(evaluate_profit(s.inst, s.plan).total() == Approx(report.profit.total()));
}

TEST_CASE("perturbed flows are reported largest first") {
  const auto& s = demo_plan(true);
  auto plan = s.plan;
  std::size_t touched = 0;
  for (auto& [key, v] : plan.values)
    if (key.kind == VarKind::FVO && v > 1.0 && touched < 3) {
      v *= 1.0 + 0.05 * double(++touched);
    }
  REQUIRE(touched > 0);
  auto report = check_solution(s.inst, plan, 1e-6);
  REQUIRE_FALSE(report.feasible());
  for (std::size_t i = 1; i < report.violations.size(); ++i)
    CHECK(report.violations[i - 1].relative >= report.violations[i].relative);
  for (const auto& v : report.violations) {
    CHECK(v.relative > 1e-6);
    CHECK(v.id.rfind(v.family + "(", 0) == 0);
    CHECK(v.magnitude >= v.relative * 1.0 - 1e-12);
  }
}

TEST_CASE("plans lacking planning variables are rejected") {
  const auto& s = demo_plan(true);
  auto plan = s.plan;
  plan.values.erase(plan.values.begin());
  CHECK_THROWS_AS(plan_to_values(s.model, plan), MissingVariableError);
  CHECK_THROWS_AS(plan.at({VarKind::FVI, {"NOPE"}, "P1"}), MissingVariableError);
}

TEST_CASE("plan values round trip through the model") {
  const auto& s = demo_plan(true);
  auto x = plan_to_values(s.model, s.plan);
  auto back = plan_from_values(s.model, x);
  CHECK(back.values == s.plan.values);
}

TEST_CASE("calibration recomputes delta-base flows") {
  const auto& s = demo_plan(true);
  auto calib = calibrate_yields(s.inst, s.plan);
  REQUIRE_FALSE(calib.entries.empty());
  for (const auto& e : calib.entries) {
    CHECK(s.inst.is_unit(e.unit, UnitKind::delta_base));
    CHECK_FALSE(e.feed_properties.empty());
    // The plan was solved with calibrated yields, so nothing moves.
    for (const auto& f : e.flows) CHECK(f.delta() == Approx(0.0).margin(1e-4 * std::max(1.0, f.fixed)));
  }
}

TEST_CASE("every new violation gets exactly one tag or none") {
  const auto& fixed = demo_plan(false);
  BuildOptions fixed_opts;
  fixed_opts.delta_base = false;
  CHECK(check_solution(fixed.inst, fixed.plan, 1e-6, fixed_opts).feasible());

  auto calib = calibrate_yields(fixed.inst, fixed.plan);
  bool moved = false;
  for (const auto& e : calib.entries)
    for (const auto& f : e.flows) moved |= std::abs(f.delta()) > 1e-6;
  CHECK(moved);

  auto scen = classify_violations(fixed.inst, fixed.plan, calib, 1e-6);
  auto recheck = check_solution(fixed.inst, scen.propagated, 1e-6);
  CHECK(recheck.violations.size() == scen.tagged.size() + scen.unclassified.size());
  for (const auto& t : scen.tagged) {
    std::string name = to_string(t.scenario);
    CHECK_FALSE(name.empty());
    if (t.scenario == Scenario::throughput) CHECK(family_group(t.violation.family) == "capacity");
    if (t.scenario == Scenario::blend_property) CHECK(family_group(t.violation.family) != "capacity");
  }
}
