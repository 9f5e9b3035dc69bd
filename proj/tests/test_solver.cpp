#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>
#include <regex>
#include <sstream>

#include "refplan/formulation.hpp"
#include "refplan/solver.hpp"
#include "refplan/validation.hpp"
#include "support/instances.hpp"

using namespace refplan;
using Catch::Approx;

namespace {

struct DenseLp {
  Eigen::MatrixXd A;  // rows: a·x <= b
  Eigen::VectorXd b, c, upper;
};

AlgebraicModel to_model(const DenseLp& lp) {
  AlgebraicModel m;
  int n = int(lp.c.size());
  for (int j = 0; j < n; ++j)
    add_variable(m, VarKind::FVI, {"x" + std::to_string(j)}, "", {0.0, lp.upper[j]});
  for (int i = 0; i < lp.A.rows(); ++i) {
    Constraint c;
    c.family = "row";
    c.index = {std::to_string(i)};
    c.sense = Sense::le;
    for (int j = 0; j < n; ++j) c.expr.add(lp.A(i, j), VarId(j));
    c.expr.add(-lp.b[i]);
    add_constraint(m, c);
  }
  for (int j = 0; j < n; ++j) m.objective.add(lp.c[j], VarId(j));
  return m;
}

// Best objective over all vertices: every choice of n tight hyperplanes
// among the rows and the box faces.
double vertex_oracle(const DenseLp& lp) {
  int n = int(lp.c.size()), m = int(lp.A.rows());
  int k = m + 2 * n;
  Eigen::MatrixXd H(k, n);
  Eigen::VectorXd h(k);
  H.topRows(m) = lp.A;
  h.head(m) = lp.b;
  for (int j = 0; j < n; ++j) {
    H.row(m + j).setZero();
    H(m + j, j) = -1.0;  // -x <= 0
    h[m + j] = 0.0;
    H.row(m + n + j).setZero();
    H(m + n + j, j) = 1.0;  // x <= u
    h[m + n + j] = lp.upper[j];
  }
  double best = -kInf;
  std::vector<int> pick(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Eigen::MatrixXd S(n, n);
      Eigen::VectorXd r(n);
      for (int i = 0; i < n; ++i) {
        S.row(i) = H.row(pick[i]);
        r[i] = h[pick[i]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
      if (lu.rank() < n) return;
      Eigen::VectorXd x = lu.solve(r);
      if (((H * x - h).array() > 1e-9).any()) return;
      best = std::max(best, lp.c.dot(x));
      return;
    }
    for (int i = start; i < k; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("simplex matches vertex enumeration on random LPs") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> coef(-5, 5), rhs(1, 20), ub(1, 10);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + trial % 3, m = 2 + trial % 4;
    DenseLp lp{Eigen::MatrixXd(m, n), Eigen::VectorXd(m), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) lp.A(i, j) = coef(rng);
    for (int i = 0; i < m; ++i) lp.b[i] = rhs(rng);
    for (int j = 0; j < n; ++j) {
      lp.c[j] = coef(rng);
      lp.upper[j] = ub(rng);
    }
    auto r = solve_lp(to_model(lp));
    INFO("trial " << trial);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == Approx(vertex_oracle(lp)).epsilon(1e-8).margin(1e-8));
    CHECK(max_relative_violation(to_model(lp), r.values) <= 1e-9);
  }
}

TEST_CASE("infeasible and unbounded programs are recognized") {
  AlgebraicModel m;
  auto x = add_variable(m, VarKind::FVI, {"x"}, "", {0.0, kInf});
  Constraint lo;
  lo.family = "lo";
  lo.sense = Sense::ge;
  lo.expr.add(1.0, x).add(-5.0);
  Constraint hi = lo;
  hi.family = "hi";
  hi.sense = Sense::le;
  hi.expr = Expr{};
  hi.expr.add(1.0, x).add(-3.0);
  m.objective.add(1.0, x);
  auto unb = m;
  add_constraint(unb, lo);
  CHECK(solve_lp(unb).status == SolveStatus::unbounded);
  add_constraint(m, lo);
  add_constraint(m, hi);
  CHECK(solve_lp(m).status == SolveStatus::infeasible);
}

TEST_CASE("equality rows and free columns") {
  // max x - y  s.t.  x + y = 4, x - 2y >= -2, y free  => x = 4 + ... bounded by x <= 3
  AlgebraicModel m;
  auto x = add_variable(m, VarKind::FVI, {"x"}, "", {0.0, 3.0});
  auto y = add_variable(m, VarKind::FVO, {"y"}, "", {-kInf, kInf});
  Constraint e;
  e.family = "sum";
  e.expr.add(1.0, x).add(1.0, y).add(-4.0);
  add_constraint(m, e);
  m.objective.add(1.0, x).add(-1.0, y);
  auto r = solve_lp(m);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.values[x] == Approx(3.0));
  CHECK(r.values[y] == Approx(1.0));
  CHECK(r.objective == Approx(2.0));
}

TEST_CASE("branch and bound solves a knapsack and logs progress") {
  AlgebraicModel m;
  std::vector<double> value{10, 13, 7, 8}, weight{3, 4, 2, 3};
  Constraint cap;
  cap.family = "cap";
  cap.sense = Sense::le;
  for (std::size_t i = 0; i < value.size(); ++i) {
    auto v = add_variable(m, VarKind::X, {std::to_string(i)}, "", {0.0, 1.0}, true);
    cap.expr.add(weight[i], v);
    m.objective.add(value[i], v);
  }
  cap.expr.add(-7.0);
  add_constraint(m, cap);
  std::ostringstream log;
  SolveConfig cfg;
  cfg.log = &log;
  cfg.gap = 0.0;
  auto r = branch_and_bound(m, cfg);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.objective == Approx(23.0));
  CHECK(r.bound == Approx(23.0));
  CHECK(r.values == std::vector<double>{1, 1, 0, 0});
  std::regex line(R"(node=\d+ bound=\S+ incumbent=\S+ gap=\S+ time=\S+)");
  CHECK(std::regex_search(log.str(), line));
}

TEST_CASE("node limit leaves a valid bound") {
  AlgebraicModel m;
  Constraint cap;
  cap.family = "cap";
  cap.sense = Sense::le;
  for (int i = 0; i < 12; ++i) {
    auto v = add_variable(m, VarKind::X, {std::to_string(i)}, "", {0.0, 1.0}, true);
    cap.expr.add(3.0 + (i * 7) % 5, v);
    m.objective.add(5.0 + (i * 3) % 7, v);
  }
  cap.expr.add(-17.5);
  add_constraint(m, cap);
  SolveConfig cfg;
  cfg.node_limit = 3;
  auto limited = branch_and_bound(m, cfg);
  auto full = branch_and_bound(m, SolveConfig{});
  REQUIRE(full.status == SolveStatus::optimal);
  CHECK(limited.bound >= full.objective - 1e-9);
  if (!limited.values.empty()) CHECK(limited.objective <= full.objective + 1e-9);
}

TEST_CASE("successive linearization finds a checked plan for the demo") {
  auto inst = refplan::testing::demo_instance();
  auto model = build_model(inst);
  auto r = slp_heuristic(model, {});
  REQUIRE(r.status == SolveStatus::feasible);
  CHECK(r.max_violation <= 1e-6);
  CHECK_FALSE(r.trace.empty());
  auto report = check_solution(inst, plan_from_values(model, r.values));
  CHECK(report.feasible());
  CHECK(report.profit.total() == Approx(r.objective).epsilon(1e-6));

  SECTION("restarting from a feasible plan never loses profit") {
    auto again = slp_heuristic(model, r.values);
    REQUIRE(again.status == SolveStatus::feasible);
    CHECK(again.objective >= r.objective - 1e-6 * std::max(1.0, std::abs(r.objective)));
    double best = -kInf;
    for (const auto& it : again.trace)
      if (it.accepted && it.max_violation <= 1e-6) {
        CHECK(it.objective >= best - 1e-6 * std::max(1.0, std::abs(best)));
        best = std::max(best, it.objective);
      }
  }
}

TEST_CASE("relative violation scales by the right-hand side") {
  AlgebraicModel m;
  auto x = add_variable(m, VarKind::FVI, {"x"}, "", {0.0, 10.0});
  Constraint c;
  c.family = "r";
  c.sense = Sense::le;
  c.expr.add(1.0, x).add(-1000.0);
  add_constraint(m, c);
  CHECK(max_relative_violation(m, {1001.0}) == Approx(991.0 / 10.0).epsilon(1e-12));
  CHECK(max_relative_violation(m, {5.0}) == 0.0);
}
