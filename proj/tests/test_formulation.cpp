#include <catch_amalgamated.hpp>

#include <set>

#include "refplan/formulation.hpp"
#include "refplan/validation.hpp"
#include "support/instances.hpp"

using namespace refplan;
using Catch::Approx;

namespace {

std::size_t count_kind(const AlgebraicModel& m, VarKind k) {
  std::size_t n = 0;
  for (const auto& v : m.variables) n += v.key.kind == k;
  return n;
}

// Model values taken from the plan where present, zero elsewhere.
std::vector<double> partial_values(const AlgebraicModel& m, const PlanSolution& plan) {
  std::vector<double> x(m.variables.size(), 0.0);
  for (VarId j = 0; j < x.size(); ++j)
    if (plan.has(m.variables[j].key)) x[j] = plan.at(m.variables[j].key);
  return x;
}

}  // namespace

TEST_CASE("building is deterministic") {
  auto inst = refplan::testing::demo_instance();
  auto a = build_model(inst), b = build_model(inst);
  REQUIRE(a.variables.size() == b.variables.size());
  REQUIRE(a.constraints.size() == b.constraints.size());
  for (std::size_t i = 0; i < a.constraints.size(); ++i) {
    CHECK(a.constraints[i].id() == b.constraints[i].id());
    CHECK(a.constraints[i].expr == b.constraints[i].expr);
  }
  CHECK(model_statistics(a) == model_statistics(b));
}

TEST_CASE("every family belongs to a named group") {
  auto m = build_model(refplan::testing::demo_instance());
  std::set<std::string> families;
  for (const auto& c : m.constraints) families.insert(c.family);
  for (const auto& f : families) {
    INFO(f);
    CHECK(family_group(f) != "plumbing");
  }
  CHECK(family_group("capacity_window") == "capacity");
  CHECK(family_group("blend_spec_lo") == "blender");
}

TEST_CASE("delta-base switch removes calibrated yields") {
  auto inst = refplan::testing::demo_instance();
  auto on = build_model(inst);
  BuildOptions off_opts;
  off_opts.delta_base = false;
  auto off = build_model(inst, off_opts);
  CHECK(count_kind(on, VarKind::Gamma) > 0);
  CHECK(count_kind(off, VarKind::Gamma) == 0);
  auto s_on = model_statistics(on), s_off = model_statistics(off);
  CHECK(s_off.total_variables < s_on.total_variables);
  CHECK(s_off.nonlinear_elements < s_on.nonlinear_elements);
}

TEST_CASE("inventory binaries are optional") {
  auto inst = refplan::testing::demo_instance();
  auto with = build_model(inst);
  BuildOptions o;
  o.inventory_binaries = false;
  auto without = build_model(inst, o);
  CHECK(model_statistics(with).binary_variables == count_kind(with, VarKind::X));
  CHECK(model_statistics(with).binary_variables > 0);
  CHECK(model_statistics(without).binary_variables == 0);
}

TEST_CASE("horizon truncates the period set") {
  auto inst = refplan::testing::demo_instance();
  REQUIRE(inst.periods.size() == 2);
  BuildOptions o;
  o.horizon = 1;
  CHECK(horizon_periods(inst, o) == std::vector<std::string>{inst.periods.front()});
  auto one = build_model(inst, o);
  for (const auto& v : one.variables) {
    INFO(to_string(v.key));
    CHECK((v.key.period.empty() || v.key.period == inst.periods.front()));
  }
  CHECK(2 * model_statistics(one).total_variables ==
        Approx(double(model_statistics(build_model(inst)).total_variables)).epsilon(0.1));
}

TEST_CASE("objective agrees with the profit evaluator") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto tiny = refplan::testing::random_tiny_instance(seed);
    std::vector<std::array<double, 4>> dec(tiny.periods, {3.0, 4.0, 2.0, 0.5});
    auto plan = refplan::testing::tiny_plan(tiny.inst, dec);
    auto model = build_model(tiny.inst);
    double obj = model.objective.evaluate(partial_values(model, plan));
    CHECK(obj == Approx(evaluate_profit(tiny.inst, plan).total()).epsilon(1e-12));
  }
}

TEST_CASE("material balances hold at a consistent plan") {
  auto tiny = refplan::testing::random_tiny_instance(3);
  std::vector<std::array<double, 4>> dec(tiny.periods, {5.0, 1.0, 2.0, 0.25});
  auto plan = refplan::testing::tiny_plan(tiny.inst, dec);
  auto model = build_model(tiny.inst);
  auto x = partial_values(model, plan);
  std::size_t checked = 0;
  for (const auto& c : model.constraints) {
    if (family_group(c.family) != "material_balance") continue;
    INFO(c.id());
    CHECK(constraint_violation(c, x) == Approx(0.0).margin(1e-9));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("fixed qualities are substituted away") {
  auto tiny = refplan::testing::random_tiny_instance(5);
  auto model = build_model(tiny.inst);
  for (const auto& [k, v] : tiny.inst.fixed)
    for (const auto& t : tiny.inst.periods)
      CHECK_FALSE(model.find({VarKind::FQ, {k[0], k[1]}, t}).has_value());
  for (const auto& v : model.variables) CHECK_FALSE(v.fixed);
}
