#include "support/properties.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "refplan/formulation.hpp"
#include "refplan/relaxation.hpp"
#include "refplan/solver.hpp"
#include "refplan/validation.hpp"
#include "support/instances.hpp"

namespace refplan::testing {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

PropertyResult fail(std::string detail) { return {false, std::move(detail)}; }

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

PropertyResult relaxation_dominates_grid(std::size_t instances) {
  std::size_t feasible_plans = 0, tight = 0;
  for (std::uint64_t seed = 1; seed <= instances; ++seed) {
    auto tiny = random_tiny_instance(seed);
    const auto& inst = tiny.inst;
    auto relaxed = relax(build_model(inst));
    auto lp = solve_lp(relaxed);
    if (lp.status != SolveStatus::optimal)
      return fail("seed " + std::to_string(seed) + ": relaxation " + to_string(lp.status));

    // Per-period grid over purchases and the pool split; coarser when the
    // two periods multiply out.
    std::vector<double> levels = tiny.periods == 1 ? std::vector<double>{0.0, 1.0 / 3, 2.0 / 3, 1.0}
                                                   : std::vector<double>{0.0, 0.5, 1.0};
    const double splits[] = {0.0, 0.5, 1.0};
    std::vector<std::vector<std::array<double, 4>>> per_period(tiny.periods);
    for (std::size_t i = 0; i < tiny.periods; ++i) {
      const auto& t = inst.periods[i];
      double h1 = inst.flow_bounds.at({"R1", t}).hi, h2 = inst.flow_bounds.at({"R2", t}).hi,
             h3 = inst.flow_bounds.at({"R3", t}).hi;
      for (double a : levels)
        for (double b : levels)
          for (double c : levels)
            for (double s : splits) per_period[i].push_back({a * h1, b * h2, c * h3, s});
    }
    double best = -kInf;
    std::vector<std::array<double, 4>> d(tiny.periods);
    std::vector<std::size_t> pos(tiny.periods, 0);
    for (;;) {
      for (std::size_t i = 0; i < tiny.periods; ++i) d[i] = per_period[i][pos[i]];
      auto plan = tiny_plan(inst, d);
      auto rep = check_solution(inst, plan);
      if (rep.feasible()) {
        ++feasible_plans;
        double obj = rep.profit.total();
        best = std::max(best, obj);
        if (obj > lp.bound + 1e-6 * std::max(1.0, std::abs(lp.bound)))
          return fail("seed " + std::to_string(seed) + ": grid plan " + fmt(obj) + " exceeds bound " +
                      fmt(lp.bound));
      }
      std::size_t k = 0;
      while (k < tiny.periods && ++pos[k] == per_period[k].size()) pos[k++] = 0;
      if (k == tiny.periods) break;
    }
    if (best > -kInf && rel_gap(best, lp.bound) < 1e-3) ++tight;
  }
  if (feasible_plans == 0) return fail("no feasible grid plan on any instance");
  return {true, std::to_string(instances) + " instances, " + std::to_string(feasible_plans) +
                    " feasible grid plans, " + std::to_string(tight) + " within 0.1% of the bound"};
}

PropertyResult gamma_at_base() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::size_t rows = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = demo_instance();
    if (trial > 0) {
      for (auto& [k, v] : inst.base_property) v *= 1.0 + 0.2 * uni(rng);
      for (auto& [k, v] : inst.yield_sensitivity) v = 0.05 * uni(rng);
      for (auto& [k, v] : inst.delta_step) v *= 1.0 + 0.5 * std::abs(uni(rng));
    }
    auto model = build_model(inst);
    std::vector<double> x(model.variables.size(), 0.0);
    for (const auto& link : inst.delta_links)
      for (const auto& t : inst.periods)
        x[model.at({VarKind::FQ, {link[2], link[3]}, t})] = inst.base_property.at({link[0], link[1], link[3]});
    for (const auto& c : model.constraints) {
      if (c.family != "pd_delta") continue;
      auto v = solve_row_for(c, *c.defines, x);
      if (!v) return fail(c.id() + " does not determine its yield");
      double gamma = inst.base_yield.at({c.index[0], c.index[1], c.index[2]});
      if (std::abs(*v - gamma) > 1e-12 * std::max(1.0, std::abs(gamma)))
        return fail(c.id() + ": yield " + fmt(*v) + " at base properties, base yield " + fmt(gamma));
      ++rows;
    }
  }
  if (rows == 0) return fail("no calibrated-yield rows");
  return {true, std::to_string(rows) + " calibrated-yield rows over 20 parameter draws"};
}

PropertyResult swing_cancellation() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::size_t batches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = demo_instance();
    if (trial > 0)
      for (auto& [k, v] : inst.swing_ratio) v = uni(rng);
    auto model = build_model(inst);
    // Sum the yield rows of each CDU batch and period: the crude coefficients
    // must come out as minus the plain cut yields.
    std::map<std::array<std::string, 3>, std::map<VarId, double>> sums;
    for (const auto& c : model.constraints) {
      if (c.family != "cdu_yield") continue;
      auto& sum = sums[{c.index[0], c.index[1], c.index.back()}];
      for (const auto& t : c.expr.linear) sum[t.var] += t.coef;
    }
    for (const auto& [key, sum] : sums) {
      const auto& [u, m, t] = key;
      for (const auto& crude : inst.raw_materials) {
        auto id = model.find({VarKind::FVM, {u, m, crude}, t});
        if (!id) continue;
        double plain = 0.0;
        for (const auto& s : inst.batch_outlets(u, m)) {
          auto y = inst.cut_yield.find({u, m, s, crude});
          if (y != inst.cut_yield.end()) plain += y->second;
        }
        auto it = sum.find(*id);
        double coef = it == sum.end() ? 0.0 : it->second;
        if (std::abs(coef + plain) > 1e-12)
          return fail(u + "/" + m + "/" + t + "/" + crude + ": summed coefficient " + fmt(coef) +
                      ", plain yield total " + fmt(plain));
      }
      ++batches;
    }
  }
  if (batches == 0) return fail("no CDU batches");
  return {true, std::to_string(batches) + " batch-periods over 20 swing-ratio draws"};
}

PropertyResult inventory_telescoping() {
  auto inst = demo_instance();
  auto model = build_model(inst);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 50.0);
  std::size_t checks = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(model.variables.size(), 0.0);
    for (const auto& [s, l0] : inst.initial_inventory) {
      double expected = l0;
      for (const auto& t : inst.periods) {
        double in = uni(rng), out = uni(rng);
        x[model.at({VarKind::FVLI, {s}, t})] = in;
        x[model.at({VarKind::FVLO, {s}, t})] = out;
        expected += in - out;
        const Constraint* row = nullptr;
        for (const auto& c : model.constraints)
          if (c.family == "inventory_level" && c.index == std::vector<std::string>{s, t}) row = &c;
        if (!row) return fail("no level row for " + s + " in " + t);
        VarId level = model.at({VarKind::L, {s}, t});
        x[level] = *solve_row_for(*row, level, x);
        if (std::abs(x[level] - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
          return fail(s + "/" + t + ": level " + fmt(x[level]) + ", telescoped " + fmt(expected));
        ++checks;
      }
    }
  }
  // With the flag at 0 only inflow is allowed, at 1 only outflow.
  for (const auto& s : {std::string("GSL"), std::string("C1")})
    for (const auto& t : inst.periods) {
      VarId flag = model.at({VarKind::X, {s}, t});
      VarId in = model.at({VarKind::FVLI, {s}, t}), out = model.at({VarKind::FVLO, {s}, t});
      for (double xv : {0.0, 1.0})
        for (auto [vi, vo] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}) {
          std::vector<double> x(model.variables.size(), 0.0);
          x[flag] = xv;
          x[in] = vi;
          x[out] = vo;
          bool ok = true;
          for (const auto& c : model.constraints)
            if ((c.family == "inventory_in_flag" || c.family == "inventory_out_flag") &&
                c.index == std::vector<std::string>{s, t} && constraint_violation(c, x) > 1e-9)
              ok = false;
          bool allowed = (xv == 0.0 && vo == 0.0) || (xv == 1.0 && vi == 0.0);
          if (ok != allowed)
            return fail(s + "/" + t + ": flag " + fmt(xv) + " with inflow " + fmt(vi) + " outflow " +
                        fmt(vo) + (ok ? " accepted" : " rejected"));
          ++checks;
        }
    }
  return {true, std::to_string(checks) + " level and flag checks"};
}

PropertyResult envelope_corners() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-10.0, 10.0);
  std::size_t corners = 0;
  for (int trial = 0; trial < 200; ++trial) {
    double a = uni(rng), b = uni(rng), c = uni(rng), d = uni(rng);
    AlgebraicModel m;
    VarId x = add_variable(m, VarKind::FVI, {"x"}, "", {std::min(a, b), std::max(a, b)});
    VarId y = add_variable(m, VarKind::FVI, {"y"}, "", {std::min(c, d), std::max(c, d)});
    Constraint row;
    row.family = "product";
    row.expr.add(1.0, x, y);
    row.expr.add(-1e9);
    row.sense = Sense::le;
    add_constraint(m, row);
    auto r = mccormick_relax(m);
    VarId w = r.variables.size() - 1;
    for (double xv : {m.variables[x].lo, m.variables[x].hi})
      for (double yv : {m.variables[y].lo, m.variables[y].hi}) {
        std::vector<double> p(r.variables.size(), 0.0);
        p[x] = xv;
        p[y] = yv;
        double prod = xv * yv;
        for (double shift : {0.0, -1e-6, 1e-6}) {
          p[w] = prod + shift * std::max(1.0, std::abs(prod));
          double worst = 0.0;
          for (const auto& rc : r.constraints)
            if (rc.family.rfind("mccormick", 0) == 0) worst = std::max(worst, constraint_violation(rc, p));
          bool inside = worst <= 1e-12 * std::max(1.0, std::abs(prod));
          if ((shift == 0.0) != inside)
            return fail("box [" + fmt(m.variables[x].lo) + "," + fmt(m.variables[x].hi) + "]x[" +
                        fmt(m.variables[y].lo) + "," + fmt(m.variables[y].hi) + "] corner (" + fmt(xv) +
                        "," + fmt(yv) + ") shift " + fmt(shift) + (inside ? " admitted" : " cut off"));
        }
        ++corners;
      }
  }
  return {true, std::to_string(corners) + " corners exact"};
}

PropertyResult bb_matches_enumeration() {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uni(-5.0, 5.0);
  std::size_t toys = 0, infeasible = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t k = 2 + trial % 5;
    AlgebraicModel m;
    std::vector<VarId> bins;
    for (std::size_t i = 0; i < k; ++i)
      bins.push_back(add_variable(m, VarKind::X, {"b" + std::to_string(i)}, "", {0, 1}, true));
    VarId u = add_variable(m, VarKind::FVI, {"u"}, "", {0, 10});
    VarId v = add_variable(m, VarKind::FVI, {"v"}, "", {-5, 5});
    for (int r = 0; r < 4; ++r) {
      Constraint c;
      c.family = "row";
      c.index = {std::to_string(r)};
      for (auto b : bins) c.expr.add(std::round(uni(rng)), b);
      c.expr.add(uni(rng), u);
      c.expr.add(uni(rng), v);
      c.expr.add(-std::abs(uni(rng)) - 2.0);
      c.sense = Sense::le;
      add_constraint(m, c);
    }
    for (auto b : bins) m.objective.add(uni(rng), b);
    m.objective.add(uni(rng), u);
    m.objective.add(uni(rng), v);

    double best = -kInf;
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
      std::vector<double> lo, hi;
      for (const auto& var : m.variables) {
        lo.push_back(var.lo);
        hi.push_back(var.hi);
      }
      for (std::size_t i = 0; i < k; ++i) lo[bins[i]] = hi[bins[i]] = (mask >> i) & 1;
      auto r = solve_lp(m, lo, hi);
      if (r.status == SolveStatus::optimal) best = std::max(best, r.objective);
    }
    auto bb = branch_and_bound(m);
    if (best == -kInf) {
      ++infeasible;
      if (bb.status != SolveStatus::infeasible)
        return fail("toy " + std::to_string(trial) + ": enumeration infeasible, branch-and-bound " +
                    to_string(bb.status));
    } else {
      if (bb.status != SolveStatus::optimal)
        return fail("toy " + std::to_string(trial) + ": branch-and-bound " + to_string(bb.status));
      if (rel_gap(bb.objective, best) > 1e-4)
        return fail("toy " + std::to_string(trial) + ": branch-and-bound " + fmt(bb.objective) +
                    ", enumeration " + fmt(best));
      if (max_relative_violation(m, bb.values) > 1e-6)
        return fail("toy " + std::to_string(trial) + ": incumbent violates the model");
    }
    ++toys;
  }
  return {true, std::to_string(toys) + " toys with 2-6 binaries (" + std::to_string(infeasible) +
                    " infeasible) agree"};
}

AlgebraicModel model_from_mps(const MpsModel& mps) {
  AlgebraicModel m;
  for (std::size_t j = 0; j < mps.columns.size(); ++j) {
    bool binary = mps.integer[j] && mps.lo[j] >= 0.0 && mps.hi[j] <= 1.0;
    add_variable(m, VarKind::SLACK, {mps.columns[j]}, "", {mps.lo[j], mps.hi[j]}, binary);
    if (mps.objective[j] != 0.0) m.objective.add((mps.maximize ? 1.0 : -1.0) * mps.objective[j], j);
  }
  m.objective.add((mps.maximize ? 1.0 : -1.0) * mps.objective_constant);
  std::vector<Constraint> rows(mps.rows.size());
  for (std::size_t r = 0; r < mps.rows.size(); ++r) {
    rows[r].family = mps.rows[r];
    rows[r].sense = mps.row_type[r] == 'E' ? Sense::eq : mps.row_type[r] == 'L' ? Sense::le : Sense::ge;
    rows[r].expr.add(-mps.rhs[r]);
  }
  for (const auto& e : mps.entries) rows[e.row].expr.add(e.value, e.column);
  for (auto& r : rows) add_constraint(m, std::move(r));
  return m;
}

PropertyResult mps_round_trip() {
  // The demo NMDT relaxation has hundreds of binaries; only its continuous
  // optimum is compared. Every other model is solved to integer optimality.
  struct Case {
    std::string name;
    AlgebraicModel model;
    bool integer;
  };
  std::vector<Case> models;
  auto demo = build_model(demo_instance());
  models.push_back({"demo mccormick", relax(demo), true});
  models.push_back({"demo nmdt", relax(demo, {RelaxationMode::nmdt, 1, 3}), false});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto tiny = build_model(random_tiny_instance(seed).inst);
    models.push_back({"tiny " + std::to_string(seed), relax(tiny), true});
    if (seed <= 2)
      models.push_back({"tiny nmdt " + std::to_string(seed), relax(tiny, {RelaxationMode::nmdt, 1, 2}), true});
  }

  for (const auto& [name, model, integer] : models) {
    for (auto sense : {ObjectiveSense::max_section, ObjectiveSense::negate}) {
      ExportOptions opts;
      opts.sense = sense;
      auto text = mps_text(model, opts);
      if (text != mps_text(model, opts)) return fail(name + ": export is not deterministic");
      auto back = parse_mps(text, name);
      auto a = model_statistics(model), b = mps_statistics(back);
      if (!(a == b))
        return fail(name + ": statistics " + std::to_string(a.total_variables) + "/" +
                    std::to_string(a.binary_variables) + "/" + std::to_string(a.total_constraints) +
                    " read back as " + std::to_string(b.total_variables) + "/" +
                    std::to_string(b.binary_variables) + "/" + std::to_string(b.total_constraints));
      std::size_t nnz = 0;
      for (const auto& c : model.constraints) {
        std::map<VarId, double> merged;
        for (const auto& t : c.expr.linear) merged[t.var] += t.coef;
        for (const auto& [j, v] : merged) nnz += v != 0.0;
      }
      if (nnz != back.entries.size())
        return fail(name + ": " + std::to_string(nnz) + " coefficients, read back " +
                    std::to_string(back.entries.size()));
      auto copy = model_from_mps(back);
      auto solve = [integer = integer](const AlgebraicModel& m) {
        return integer && m.has_integers() ? branch_and_bound(m) : solve_lp(m);
      };
      auto r1 = solve(model), r2 = solve(copy);
      // The reader turns a minimization back into maximizing its negation.
      double o2 = r2.objective;
      if (r1.status != r2.status || (r1.status == SolveStatus::optimal && rel_gap(o2, r1.objective) > 1e-7))
        return fail(name + ": optimum " + fmt(r1.objective) + " read back as " + fmt(o2));
    }
  }
  return {true, std::to_string(models.size()) + " relaxations, both objective conventions"};
}

}  // namespace refplan::testing
