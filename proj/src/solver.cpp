#include "refplan/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "simplex.hpp"

namespace refplan {

using detail::Clock;

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::feasible: return "feasible";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::limit: return "limit";
  }
  return "?";
}

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Clock::time_point deadline_from(Clock::time_point start, double limit) {
  if (!std::isfinite(limit) || limit > 1e9) return Clock::time_point::max();
  return start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(limit));
}

// Magnitude a constraint residual is measured against: the larger of the
// positive and negative parts of the row at `values`.
double row_scale(const Constraint& c, const std::vector<double>& values) {
  double pos = 0.0, neg = 0.0;
  auto acc = [&](double v) { (v >= 0 ? pos : neg) += std::abs(v); };
  acc(c.expr.constant);
  for (const auto& t : c.expr.linear) acc(t.coef * values[t.var]);
  for (const auto& t : c.expr.bilinear) acc(t.coef * values[t.a] * values[t.b]);
  return std::max({1.0, pos, neg});
}

SolveResult lp_result(const AlgebraicModel& model, const detail::LpOutcome& out,
                      const SolveConfig& cfg, Clock::time_point start) {
  SolveResult r;
  r.status = out.status;
  r.iterations = out.iterations;
  r.nodes = 1;
  if (out.status == SolveStatus::optimal) {
    r.values = out.x;
    r.objective = -out.objective;
    r.bound = r.objective;
    double viol = max_relative_violation(model, r.values);
    if (viol > 100 * cfg.feasibility_tolerance) {
      std::ostringstream os;
      os << "simplex returned a point with relative violation " << viol << " after "
         << out.iterations << " pivots";
      throw NumericalError(os.str());
    }
  } else if (out.status == SolveStatus::unbounded) {
    r.bound = std::numeric_limits<double>::infinity();
  }
  r.seconds = seconds_since(start);
  return r;
}

}  // namespace

double max_relative_violation(const AlgebraicModel& model, const std::vector<double>& values) {
  double worst = 0.0;
  for (std::size_t j = 0; j < model.variables.size(); ++j) {
    const auto& v = model.variables[j];
    double x = values[j];
    if (x < v.lo) worst = std::max(worst, (v.lo - x) / std::max(1.0, std::abs(v.lo)));
    if (x > v.hi) worst = std::max(worst, (x - v.hi) / std::max(1.0, std::abs(v.hi)));
  }
  for (const auto& c : model.constraints) {
    double viol = constraint_violation(c, values);
    if (viol > 0) worst = std::max(worst, viol / row_scale(c, values));
  }
  return worst;
}

SolveResult solve_lp(const AlgebraicModel& model, const SolveConfig& cfg) {
  auto start = Clock::now();
  auto lp = detail::to_linear_program(model);
  auto out = detail::simplex(lp, cfg, deadline_from(start, cfg.time_limit));
  return lp_result(model, out, cfg, start);
}

SolveResult solve_lp(const AlgebraicModel& model, const std::vector<double>& lo,
                     const std::vector<double>& hi, const SolveConfig& cfg) {
  auto start = Clock::now();
  auto lp = detail::to_linear_program(model);
  lp.col_lo = lo;
  lp.col_hi = hi;
  auto out = detail::simplex(lp, cfg, deadline_from(start, cfg.time_limit));
  AlgebraicModel bounded = model;
  for (std::size_t j = 0; j < lo.size(); ++j) {
    bounded.variables[j].lo = lo[j];
    bounded.variables[j].hi = hi[j];
  }
  return lp_result(bounded, out, cfg, start);
}

// ---------------------------------------------------------------------------
// Branch and bound

namespace {

struct Node {
  std::vector<std::pair<VarId, double>> lower;  // tightened lower bounds
  std::vector<std::pair<VarId, double>> upper;  // tightened upper bounds
  double parent_bound = std::numeric_limits<double>::infinity();
  std::size_t depth = 0;
  std::shared_ptr<const detail::Basis> basis;  // parent's optimal basis
};

}  // namespace

SolveResult branch_and_bound(const AlgebraicModel& model, const SolveConfig& cfg) {
  auto start = Clock::now();
  auto deadline = deadline_from(start, cfg.time_limit);
  auto base = detail::to_linear_program(model);
  std::vector<VarId> integers;
  for (VarId j = 0; j < model.variables.size(); ++j)
    if (model.variables[j].integer) integers.push_back(j);

  SolveResult best;
  best.status = SolveStatus::infeasible;
  double global_bound = std::numeric_limits<double>::infinity();
  std::deque<Node> open;
  open.push_back(Node{});
  std::vector<double> col_lo, col_hi;
  std::size_t nodes = 0, iterations = 0;
  bool hit_limit = false;
  bool unbounded = false;

  auto log = [&](bool force) {
    if (!cfg.log || (!force && nodes % 10 != 0)) return;
    double gap = std::isfinite(best.objective)
                     ? std::abs(global_bound - best.objective) / std::max(1.0, std::abs(global_bound))
                     : std::numeric_limits<double>::infinity();
    *cfg.log << "node=" << nodes << " bound=" << std::setprecision(12) << global_bound
             << " incumbent=" << best.objective << " gap=" << gap
             << " time=" << std::setprecision(4) << seconds_since(start) << "\n";
  };
  auto closed = [&] {
    if (!std::isfinite(best.objective)) return false;
    return global_bound - best.objective <= cfg.gap * std::max(1.0, std::abs(global_bound));
  };
  auto refresh_bound = [&] {
    double b = best.objective;
    for (const auto& n : open) b = std::max(b, n.parent_bound);
    // Never loosen a bound that has already been proven.
    global_bound = std::min(global_bound, b);
  };

  while (!open.empty()) {
    if (nodes >= cfg.node_limit || Clock::now() > deadline) {
      hit_limit = true;
      break;
    }
    if (closed()) break;

    Node node;
    if (nodes > 0 && nodes % 100 == 0) {
      auto it = std::max_element(open.begin(), open.end(), [](const Node& a, const Node& b) {
        return a.parent_bound < b.parent_bound;
      });
      node = std::move(*it);
      open.erase(it);
    } else {
      node = std::move(open.back());
      open.pop_back();
    }
    if (std::isfinite(best.objective) &&
        node.parent_bound - best.objective <= cfg.gap * std::max(1.0, std::abs(best.objective))) {
      refresh_bound();
      continue;
    }

    col_lo = base.col_lo;
    col_hi = base.col_hi;
    for (const auto& [j, v] : node.lower) col_lo[j] = std::max(col_lo[j], v);
    for (const auto& [j, v] : node.upper) col_hi[j] = std::min(col_hi[j], v);
    auto out = detail::simplex(base, cfg, deadline, {&col_lo, &col_hi, node.basis.get()});
    ++nodes;
    iterations += out.iterations;

    if (out.status == SolveStatus::limit) {
      hit_limit = true;
      open.push_back(std::move(node));
      break;
    }
    if (out.status == SolveStatus::unbounded) {
      unbounded = true;
      break;
    }
    if (out.status == SolveStatus::infeasible) {
      refresh_bound();
      log(false);
      continue;
    }
    double obj = -out.objective;
    if (std::isfinite(best.objective) &&
        obj - best.objective <= cfg.gap * std::max(1.0, std::abs(best.objective))) {
      refresh_bound();
      log(false);
      continue;
    }

    // Most fractional integer variable, lowest id on ties.
    VarId branch = 0;
    double frac_best = -1.0;
    for (auto j : integers) {
      double v = out.x[j];
      double f = v - std::floor(v);
      double dist = std::min(f, 1.0 - f);
      if (dist > cfg.integrality_tolerance && dist > frac_best + 1e-12) {
        frac_best = dist;
        branch = j;
      }
    }
    if (frac_best < 0) {
      best.status = SolveStatus::feasible;
      best.values = out.x;
      for (auto j : integers) best.values[j] = std::round(best.values[j]);
      best.objective = obj;
      refresh_bound();
      log(true);
      continue;
    }

    double v = out.x[branch];
    Node down = node, up = node;
    down.upper.emplace_back(branch, std::floor(v));
    up.lower.emplace_back(branch, std::ceil(v));
    down.parent_bound = up.parent_bound = obj;
    down.depth = up.depth = node.depth + 1;
    down.basis = up.basis = out.basis;
    // The child on the side the LP leans towards is explored first.
    if (v - std::floor(v) >= 0.5) {
      open.push_back(std::move(down));
      open.push_back(std::move(up));
    } else {
      open.push_back(std::move(up));
      open.push_back(std::move(down));
    }
    refresh_bound();
    log(false);
  }

  SolveResult r = best;
  r.nodes = nodes;
  r.iterations = iterations;
  if (unbounded) {
    r.status = SolveStatus::unbounded;
    r.bound = std::numeric_limits<double>::infinity();
  } else if (hit_limit) {
    refresh_bound();
    r.status = SolveStatus::limit;
    r.bound = global_bound;
  } else if (std::isfinite(best.objective)) {
    refresh_bound();
    r.status = SolveStatus::optimal;
    r.bound = open.empty() ? best.objective : global_bound;
  } else {
    r.status = SolveStatus::infeasible;
    r.bound = -std::numeric_limits<double>::infinity();
  }
  r.seconds = seconds_since(start);
  log(true);
  return r;
}

// ---------------------------------------------------------------------------
// Successive linearization

SlpResult slp_heuristic(const AlgebraicModel& model, const std::vector<double>& start,
                        const SolveConfig& cfg) {
  auto t0 = Clock::now();
  auto deadline = deadline_from(t0, cfg.time_limit);
  std::size_t n = model.variables.size();

  // Frozen set: qualities and calibrated yields, plus one factor of any
  // other bilinear term so that every row becomes linear.
  std::vector<bool> frozen(n, false);
  for (VarId j = 0; j < n; ++j) {
    auto k = model.variables[j].key.kind;
    if (k == VarKind::FQ || k == VarKind::Gamma) frozen[j] = true;
  }
  for (const auto& c : model.constraints)
    for (const auto& t : c.expr.bilinear)
      if (!frozen[t.a] && !frozen[t.b]) frozen[std::max(t.a, t.b)] = true;
  for (const auto& t : model.objective.bilinear)
    if (!frozen[t.a] && !frozen[t.b]) frozen[std::max(t.a, t.b)] = true;

  // Re-derives every variable that has a defining row from the others.
  auto derive = [&](std::vector<double>& x) {
    for (int sweep = 0; sweep < 50; ++sweep) {
      double change = 0.0;
      for (const auto& c : model.constraints) {
        if (!c.defines) continue;
        VarId d = *c.defines;
        auto v = solve_row_for(c, d, x);
        if (!v || !std::isfinite(*v)) continue;
        double nv = std::clamp(*v, model.variables[d].lo, model.variables[d].hi);
        change = std::max(change, std::abs(nv - x[d]) / std::max(1.0, std::abs(x[d])));
        x[d] = nv;
      }
      if (change < 1e-12) break;
    }
  };

  std::vector<double> point(n);
  for (VarId j = 0; j < n; ++j) {
    const auto& v = model.variables[j];
    if (!start.empty()) point[j] = start[j];
    else if (std::isfinite(v.lo) && std::isfinite(v.hi)) point[j] = 0.5 * (v.lo + v.hi);
    else if (std::isfinite(v.lo)) point[j] = std::max(v.lo, frozen[j] ? 1.0 : 0.0);
    else if (std::isfinite(v.hi)) point[j] = std::min(v.hi, 0.0);
    else point[j] = frozen[j] ? 1.0 : 0.0;
  }
  if (start.empty()) derive(point);

  double obj_scale = 1.0;
  for (const auto& t : model.objective.linear) obj_scale = std::max(obj_scale, std::abs(t.coef));
  double penalty = 1e4 * obj_scale;

  SlpResult result;
  auto tol = cfg.feasibility_tolerance;
  auto better = [&](double viol, double obj, double bviol, double bobj) {
    bool f = viol <= tol, bf = bviol <= tol;
    if (f != bf) return f;
    if (f) return obj > bobj;
    return viol < bviol;
  };

  double cur_viol = max_relative_violation(model, point);
  double cur_obj = model.objective.evaluate(point);
  result.values = point;
  result.objective = cur_obj;
  result.max_violation = cur_viol;
  // The flow step is unrestricted until a step makes things worse.
  double radius = kInf;
  int increases = 0;

  for (std::size_t it = 1; it <= cfg.slp_max_iterations; ++it) {
    if (Clock::now() > deadline) break;

    // Linearize at the frozen values; rows touched by freezing get slacks.
    AlgebraicModel lin;
    lin.variables = model.variables;
    lin.lookup = model.lookup;
    for (VarId j = 0; j < n; ++j) {
      auto& v = lin.variables[j];
      if (frozen[j]) {
        v.lo = v.hi = point[j];
      } else if (std::isfinite(radius) && !v.integer) {
        double range = std::isfinite(v.hi - v.lo) ? v.hi - v.lo : 0.0;
        double step = radius * std::max({1.0, std::abs(point[j]), range});
        v.lo = std::max(v.lo, point[j] - step);
        v.hi = std::min(v.hi, point[j] + step);
      }
    }
    for (const auto& c : model.constraints) {
      Constraint nc;
      nc.family = c.family;
      nc.index = c.index;
      nc.sense = c.sense;
      nc.expr.constant = c.expr.constant;
      bool touched = !c.expr.bilinear.empty();
      for (const auto& t : c.expr.linear) {
        if (frozen[t.var]) {
          nc.expr.constant += t.coef * point[t.var];
          touched = true;
        } else {
          nc.expr.add(t.coef, t.var);
        }
      }
      for (const auto& t : c.expr.bilinear) {
        if (frozen[t.a] && frozen[t.b]) nc.expr.constant += t.coef * point[t.a] * point[t.b];
        else if (frozen[t.a]) nc.expr.add(t.coef * point[t.a], t.b);
        else nc.expr.add(t.coef * point[t.b], t.a);
      }
      if (nc.expr.linear.empty()) continue;
      if (touched) {
        auto id = c.id();
        if (nc.sense != Sense::ge) {
          VarId s = add_variable(lin, VarKind::SLACK, {id, "-"}, "", {0.0, kInf});
          nc.expr.add(-1.0, s);
          lin.objective.add(-penalty, s);
        }
        if (nc.sense != Sense::le) {
          VarId s = add_variable(lin, VarKind::SLACK, {id, "+"}, "", {0.0, kInf});
          nc.expr.add(1.0, s);
          lin.objective.add(-penalty, s);
        }
      }
      add_constraint(lin, std::move(nc));
    }
    lin.objective.constant += model.objective.constant;
    for (const auto& t : model.objective.linear) {
      if (frozen[t.var]) lin.objective.constant += t.coef * point[t.var];
      else lin.objective.add(t.coef, t.var);
    }
    for (const auto& t : model.objective.bilinear) {
      if (frozen[t.a] && frozen[t.b]) lin.objective.add(t.coef * point[t.a] * point[t.b]);
      else if (frozen[t.a]) lin.objective.add(t.coef * point[t.a], t.b);
      else lin.objective.add(t.coef * point[t.b], t.a);
    }

    SolveConfig sub = cfg;
    sub.log = nullptr;
    sub.time_limit = std::max(0.0, cfg.time_limit - seconds_since(t0));
    SolveResult lp = lin.has_integers() ? branch_and_bound(lin, sub) : solve_lp(lin, sub);
    if (lp.values.empty())
      throw Error("successive linearization: LP at iteration " + std::to_string(it) + " is " +
                  to_string(lp.status));

    std::vector<double> next(lp.values.begin(), lp.values.begin() + static_cast<long>(n));
    derive(next);
    double change = 0.0;
    for (VarId j = 0; j < n; ++j)
      if (frozen[j]) change = std::max(change, std::abs(next[j] - point[j]) / std::max(1.0, std::abs(point[j])));

    double viol = max_relative_violation(model, next);
    double obj = model.objective.evaluate(next);
    bool cur_feasible = cur_viol <= tol;
    bool accepted = cur_feasible
                        ? viol <= tol && obj >= cur_obj - 1e-9 * std::max(1.0, std::abs(cur_obj))
                        : viol <= cur_viol * (1 + 1e-9) || viol <= tol;

    SlpIteration rec;
    rec.iteration = it;
    rec.objective = obj;
    rec.max_violation = viol;
    rec.max_change = change;
    rec.radius = radius;
    rec.accepted = accepted;
    result.trace.push_back(rec);
    if (cfg.log)
      *cfg.log << "slp iter=" << it << " objective=" << std::setprecision(12) << obj
               << " violation=" << viol << " change=" << change << (accepted ? "" : " rejected")
               << "\n";

    if (better(viol, obj, result.max_violation, result.objective)) {
      result.values = next;
      result.objective = obj;
      result.max_violation = viol;
    }

    if (viol > cur_viol * (1 + 1e-9)) {
      if (++increases >= 5) {
        result.diverged = true;
        break;
      }
    } else {
      increases = 0;
    }
    if (accepted) {
      point = std::move(next);
      cur_viol = viol;
      cur_obj = obj;
      if (std::isfinite(radius)) radius = std::min(cfg.slp_radius, radius * 2);
      if (change < cfg.slp_tolerance) {
        result.converged = true;
        break;
      }
    } else {
      radius = (std::isfinite(radius) ? radius : cfg.slp_radius) * cfg.slp_shrink;
      if (radius < 1e-9) {
        result.converged = true;
        break;
      }
    }
  }

  result.status = result.max_violation <= tol ? SolveStatus::feasible : SolveStatus::infeasible;
  if (!result.converged && !result.diverged && result.status != SolveStatus::feasible)
    result.status = SolveStatus::limit;
  return result;
}

}  // namespace refplan
