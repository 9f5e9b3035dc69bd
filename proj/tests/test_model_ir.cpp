#include <catch_amalgamated.hpp>

#include "refplan/model_ir.hpp"

using namespace refplan;
using Catch::Approx;

namespace {

Constraint row(std::string family, Expr e, Sense s) {
  Constraint c;
  c.family = std::move(family);
  c.expr = std::move(e);
  c.sense = s;
  return c;
}

}  // namespace

TEST_CASE("variables are unique by key") {
  AlgebraicModel m;
  auto x = add_variable(m, VarKind::FVI, {"A"}, "P1", {0, 10});
  CHECK(m.at({VarKind::FVI, {"A"}, "P1"}) == x);
  CHECK_THROWS_AS(add_variable(m, VarKind::FVI, {"A"}, "P1", {0, 1}), ModelError);
  CHECK_FALSE(m.find({VarKind::FVI, {"A"}, "P2"}).has_value());
  CHECK_THROWS_AS(m.at({VarKind::FVO, {"A"}, "P1"}), ModelError);
}

TEST_CASE("constraints must reference declared variables") {
  AlgebraicModel m;
  add_variable(m, VarKind::FVI, {"A"}, "P1", {0, 10});
  Expr e;
  e.add(1.0, VarId{3});
  CHECK_THROWS_AS(add_constraint(m, row("bad", e, Sense::le)), ModelError);
}

TEST_CASE("kind names round trip") {
  for (int k = 0; k <= int(VarKind::SLACK); ++k) {
    auto kind = VarKind(k);
    auto back = var_kind_from_string(to_string(kind));
    REQUIRE(back.has_value());
    CHECK(*back == kind);
  }
  CHECK_FALSE(var_kind_from_string("nope").has_value());
}

TEST_CASE("expressions evaluate linear, bilinear and constant parts") {
  Expr e;
  e.add(2.0, 0).add(-1.0, 0, 1).add(5.0);
  CHECK(e.evaluate({3.0, 4.0}) == Approx(2 * 3 - 12 + 5));
  Expr f;
  f.add(0.5, e);
  CHECK(f.evaluate({3.0, 4.0}) == Approx(0.5 * (6 - 12 + 5)));
}

TEST_CASE("statistics count incidences of bilinear variables once per row") {
  AlgebraicModel m;
  auto x = add_variable(m, VarKind::FVI, {"A"}, "P1", {0, 10});
  auto y = add_variable(m, VarKind::FQ, {"A", "S"}, "P1", {0, 1});
  auto z = add_variable(m, VarKind::X, {"A"}, "P1", {0, 1}, true);
  Expr e1;
  e1.add(1.0, x, y).add(2.0, x, y).add(1.0, z);  // x, y
  Expr e2;
  e2.add(1.0, y, z).add(1.0, x);                 // y, z
  Expr e3;
  e3.add(1.0, x);
  add_constraint(m, row("a", e1, Sense::le));
  add_constraint(m, row("b", e2, Sense::eq));
  add_constraint(m, row("c", e3, Sense::ge));
  auto s = model_statistics(m);
  CHECK(s.total_variables == 3);
  CHECK(s.binary_variables == 1);
  CHECK(s.total_constraints == 3);
  CHECK(s.nonlinear_elements == 4);
  CHECK(s.bilinear_terms == 3);
  CHECK_FALSE(m.is_linear());
  CHECK(m.has_integers());
}

TEST_CASE("canonicalize substitutes fixed variables and merges terms") {
  AlgebraicModel m;
  auto x = add_variable(m, VarKind::FVI, {"A"}, "P1", {0, 10});
  auto f = add_variable(m, VarKind::FQ, {"A", "S"}, "P1", {0.3, 0.3});
  m.variables[f].fixed = true;
  auto y = add_variable(m, VarKind::FQ, {"B", "S"}, "P1", {0, 1});
  Expr e;
  e.add(1.0, x).add(2.0, x).add(4.0, x, f).add(1.0, y, x).add(-1.0, f).add(1e-14, y);
  add_constraint(m, row("r", e, Sense::eq));
  auto c = canonicalize(m);
  REQUIRE(c.variables.size() == 2);
  CHECK(c.variables[0].key.index == std::vector<std::string>{"A"});
  CHECK(c.variables[1].key.index == std::vector<std::string>{"B", "S"});
  const auto& ex = c.constraints[0].expr;
  REQUIRE(ex.linear.size() == 1);
  CHECK(ex.linear[0].var == 0);
  CHECK(ex.linear[0].coef == Approx(3.0 + 4.0 * 0.3));
  REQUIRE(ex.bilinear.size() == 1);
  CHECK(ex.bilinear[0].a == 0);
  CHECK(ex.bilinear[0].b == 1);
  CHECK(ex.constant == Approx(-0.3));
  CHECK(c.lookup.at(c.variables[1].key) == 1);
}

TEST_CASE("violation respects the row sense") {
  Expr e;
  e.add(1.0, 0).add(-2.0);
  CHECK(constraint_violation(row("", e, Sense::le), {3.0}) == Approx(1.0));
  CHECK(constraint_violation(row("", e, Sense::le), {1.0}) == 0.0);
  CHECK(constraint_violation(row("", e, Sense::ge), {1.0}) == Approx(1.0));
  CHECK(constraint_violation(row("", e, Sense::eq), {1.0}) == Approx(1.0));
  CHECK(constraint_activity(row("", e, Sense::eq), {5.0}) == Approx(3.0));
}

TEST_CASE("solve_row_for handles bilinear occurrences") {
  // q * f - 2 = 0  with f = 4  =>  q = 0.5
  Expr e;
  e.add(1.0, 0, 1).add(-2.0);
  auto c = row("", e, Sense::eq);
  auto q = solve_row_for(c, 0, {0.0, 4.0});
  REQUIRE(q.has_value());
  CHECK(*q == Approx(0.5));
  CHECK_FALSE(solve_row_for(c, 0, {0.0, 0.0}).has_value());
  Expr sq;
  sq.add(1.0, 0, 0);
  CHECK_FALSE(solve_row_for(row("", sq, Sense::eq), 0, {1.0}).has_value());
}

TEST_CASE("row ids join the index") {
  Constraint c;
  c.family = "mb";
  c.index = {"S1", "P1"};
  CHECK(c.id() == "mb(S1,P1)");
  CHECK(c.vacuous());
}
