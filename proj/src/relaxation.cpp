#include "refplan/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <functional>
#include <set>

namespace refplan {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Interval {
  double lo = kNegInf;
  double hi = kInf;
};

// Endpoint product with 0·inf taken as 0.
double emul(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

Interval mul(Interval x, Interval y) {
  double c[4] = {emul(x.lo, y.lo), emul(x.lo, y.hi), emul(x.hi, y.lo), emul(x.hi, y.hi)};
  return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
}

Interval scale(Interval x, double a) {
  if (a >= 0) return {emul(a, x.lo), emul(a, x.hi)};
  return {emul(a, x.hi), emul(a, x.lo)};
}

// x / y for a divisor interval that excludes zero. Indeterminate endpoints
// (inf/inf) widen to the corresponding infinity.
Interval divide(Interval x, Interval y) {
  double lo = kInf, hi = kNegInf;
  for (double a : {x.lo, x.hi})
    for (double b : {y.lo, y.hi}) {
      double q = a / b;
      if (std::isnan(q)) {
        lo = kNegInf;
        hi = kInf;
        continue;
      }
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
  return {lo, hi};
}

// Sum of intervals that can report the sum with one member left out.
struct IntervalSum {
  double lo = 0.0, hi = 0.0;
  int lo_inf = 0, hi_inf = 0;

  void add(Interval t) {
    if (std::isinf(t.lo)) ++lo_inf;
    else lo += t.lo;
    if (std::isinf(t.hi)) ++hi_inf;
    else hi += t.hi;
  }
  Interval without(Interval t) const {
    Interval r;
    if (std::isinf(t.lo)) r.lo = lo_inf == 1 ? lo : kNegInf;
    else r.lo = lo_inf == 0 ? lo - t.lo : kNegInf;
    if (std::isinf(t.hi)) r.hi = hi_inf == 1 ? hi : kInf;
    else r.hi = hi_inf == 0 ? hi - t.hi : kInf;
    return r;
  }
};

class Propagator {
 public:
  explicit Propagator(AlgebraicModel& m) : m_(m) {}

  bool pass() {
    bool progress = false;
    for (const auto& c : m_.constraints) progress |= row(c);
    return progress;
  }

 private:
  Interval dom(VarId v) const { return {m_.variables[v].lo, m_.variables[v].hi}; }

  bool row(const Constraint& c) {
    const auto& e = c.expr;
    std::size_t nl = e.linear.size(), nb = e.bilinear.size();
    terms_.resize(nl + nb);
    IntervalSum sum;
    for (std::size_t k = 0; k < nl; ++k) {
      terms_[k] = scale(dom(e.linear[k].var), e.linear[k].coef);
      sum.add(terms_[k]);
    }
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& t = e.bilinear[k];
      terms_[nl + k] = scale(mul(dom(t.a), dom(t.b)), t.coef);
      sum.add(terms_[nl + k]);
    }
    Interval target{c.sense == Sense::le ? kNegInf : 0.0, c.sense == Sense::ge ? kInf : 0.0};
    target.lo -= e.constant;
    target.hi -= e.constant;

    bool progress = false;
    for (std::size_t k = 0; k < nl + nb; ++k) {
      Interval others = sum.without(terms_[k]);
      Interval room{target.lo - others.hi, target.hi - others.lo};
      if (std::isinf(room.lo) && std::isinf(room.hi)) continue;
      if (k < nl) {
        const auto& t = e.linear[k];
        progress |= tighten(t.var, scale(room, 1.0 / t.coef), c);
      } else {
        const auto& t = e.bilinear[k - nl];
        Interval prod = scale(room, 1.0 / t.coef);
        if (t.a == t.b) {
          if (std::isfinite(prod.hi) && prod.hi >= 0) {
            double r = std::sqrt(prod.hi);
            progress |= tighten(t.a, {-r, r}, c);
          }
          continue;
        }
        for (auto [x, y] : {std::pair{t.a, t.b}, std::pair{t.b, t.a}}) {
          Interval dy = dom(y);
          if (dy.lo > 0 || dy.hi < 0) progress |= tighten(x, divide(prod, dy), c);
        }
      }
    }
    return progress;
  }

  bool tighten(VarId v, Interval cand, const Constraint& c) {
    auto& var = m_.variables[v];
    if (var.fixed) return false;
    // Widen slightly so round-off never excludes a feasible point.
    if (std::isfinite(cand.lo)) cand.lo -= 1e-9 * std::max(1.0, std::abs(cand.lo));
    if (std::isfinite(cand.hi)) cand.hi += 1e-9 * std::max(1.0, std::abs(cand.hi));
    if (var.integer) {
      if (std::isfinite(cand.lo)) cand.lo = std::ceil(cand.lo - 1e-6);
      if (std::isfinite(cand.hi)) cand.hi = std::floor(cand.hi + 1e-6);
    }
    bool changed = false;
    auto significant = [](double old_b, double new_b) {
      return std::isinf(old_b) || std::abs(new_b - old_b) > 1e-7 * std::max(1.0, std::abs(old_b));
    };
    if (cand.lo > var.lo && significant(var.lo, cand.lo)) {
      var.lo = cand.lo;
      changed = true;
    }
    if (cand.hi < var.hi && significant(var.hi, cand.hi)) {
      var.hi = cand.hi;
      changed = true;
    }
    if (var.lo > var.hi) {
      if (var.lo - var.hi > 1e-6 * std::max({1.0, std::abs(var.lo), std::abs(var.hi)}))
        throw BoundError("bound inference empties the domain of " + to_string(var.key) +
                         " at row " + c.id());
      double mid = 0.5 * (var.lo + var.hi);
      var.lo = var.hi = mid;
    }
    return changed;
  }

  AlgebraicModel& m_;
  std::vector<Interval> terms_;
};

std::set<VarId> participants(const AlgebraicModel& m) {
  std::set<VarId> out;
  auto scan = [&](const Expr& e) {
    for (const auto& t : e.bilinear) {
      out.insert(t.a);
      out.insert(t.b);
    }
  };
  for (const auto& c : m.constraints) scan(c.expr);
  scan(m.objective);
  return out;
}

void require_finite(const AlgebraicModel& m) {
  for (auto v : participants(m)) {
    const auto& var = m.variables[v];
    if (!std::isfinite(var.lo) || !std::isfinite(var.hi))
      throw BoundError("bilinear participant " + to_string(var.key) + " has bounds [" +
                       std::to_string(var.lo) + ", " + std::to_string(var.hi) + "]");
  }
}

std::string var_name(const AlgebraicModel& m, VarId v) { return to_string(m.variables[v].key); }

// Product variable for each distinct pair, created on first use.
class ProductTable {
 public:
  explicit ProductTable(AlgebraicModel& out) : out_(out) {}

  template <typename Make>
  VarId get(VarId a, VarId b, Make&& make) {
    if (a > b) std::swap(a, b);
    auto [it, fresh] = ids_.try_emplace({a, b}, 0);
    if (fresh) {
      Interval r = mul({out_.variables[a].lo, out_.variables[a].hi},
                       {out_.variables[b].lo, out_.variables[b].hi});
      it->second = add_variable(out_, VarKind::W, {var_name(out_, a), var_name(out_, b)}, "",
                                {r.lo, r.hi});
      out_.variables[it->second].product_of = std::array<VarId, 2>{a, b};
      make(a, b, it->second);
    }
    return it->second;
  }

 private:
  AlgebraicModel& out_;
  std::map<std::pair<VarId, VarId>, VarId> ids_;
};

// w ⋛ a·x + b·y + c, written as the constraint expr (sense) 0.
void envelope_row(AlgebraicModel& out, const std::string& family, const std::vector<std::string>& index,
                  VarId w, double cx, VarId x, double cy, VarId y, double c, Sense sense) {
  Constraint row;
  row.family = family;
  row.index = index;
  row.sense = sense;
  row.expr.add(1.0, w).add(-cx, x).add(-cy, y).add(-c);
  add_constraint(out, std::move(row));
}

void add_envelope(AlgebraicModel& out, VarId w, VarId x, VarId y, const std::string& family) {
  const auto& vx = out.variables[x];
  const auto& vy = out.variables[y];
  double xl = vx.lo, xu = vx.hi, yl = vy.lo, yu = vy.hi;
  std::vector<std::string> index{var_name(out, w)};
  envelope_row(out, family + "_under1", index, w, yl, x, xl, y, -xl * yl, Sense::ge);
  envelope_row(out, family + "_under2", index, w, yu, x, xu, y, -xu * yu, Sense::ge);
  envelope_row(out, family + "_over1", index, w, yl, x, xu, y, -xu * yl, Sense::le);
  envelope_row(out, family + "_over2", index, w, yu, x, xl, y, -xl * yu, Sense::le);
}

Expr substitute(const Expr& e, ProductTable& products, const std::function<void(VarId, VarId, VarId)>& make) {
  Expr r;
  r.linear = e.linear;
  r.constant = e.constant;
  for (const auto& t : e.bilinear) r.add(t.coef, products.get(t.a, t.b, make));
  return r;
}

AlgebraicModel replace_products(const AlgebraicModel& model,
                                const std::function<void(AlgebraicModel&, VarId, VarId, VarId)>& build) {
  AlgebraicModel out;
  out.variables = model.variables;
  out.lookup = model.lookup;
  ProductTable products(out);
  std::function<void(VarId, VarId, VarId)> make = [&](VarId a, VarId b, VarId w) { build(out, a, b, w); };
  std::vector<Constraint> rows;
  rows.reserve(model.constraints.size());
  for (const auto& c : model.constraints) {
    Constraint nc = c;
    nc.expr = substitute(c.expr, products, make);
    rows.push_back(std::move(nc));
  }
  out.objective = substitute(model.objective, products, make);
  // Model rows first, then the product definitions in creation order.
  std::vector<Constraint> defs = std::move(out.constraints);
  out.constraints = std::move(rows);
  for (auto& d : defs) out.constraints.push_back(std::move(d));
  return out;
}

}  // namespace

AlgebraicModel infer_bounds(const AlgebraicModel& model, int passes) {
  AlgebraicModel out = model;
  Propagator prop(out);
  auto parts = participants(out);
  auto all_finite = [&] {
    for (auto v : parts)
      if (!std::isfinite(out.variables[v].lo) || !std::isfinite(out.variables[v].hi)) return false;
    return true;
  };
  int done = 0;
  bool progress = true;
  while (progress && (done < passes || (!all_finite() && done < passes + 100))) {
    progress = prop.pass();
    ++done;
  }
  require_finite(out);
  return out;
}

AlgebraicModel mccormick_relax(const AlgebraicModel& model) {
  require_finite(model);
  return replace_products(model, [](AlgebraicModel& out, VarId a, VarId b, VarId w) {
    add_envelope(out, w, a, b, "mccormick");
  });
}

AlgebraicModel nmdt_relax(const AlgebraicModel& model, int digits) {
  if (digits < 1) throw Error("NMDT precision must be at least 1, got " + std::to_string(digits));
  require_finite(model);

  struct Discretized {
    std::vector<std::vector<VarId>> z;  // [position][digit]
    VarId rest = 0;
  };
  std::map<VarId, Discretized> disc;
  double step = std::pow(10.0, -digits);

  auto discretize = [&](AlgebraicModel& out, VarId x) -> Discretized& {
    auto it = disc.find(x);
    if (it != disc.end()) return it->second;
    Discretized d;
    std::string xn = var_name(out, x);
    double lo = out.variables[x].lo, range = out.variables[x].hi - lo;
    Constraint link;
    link.family = "nmdt_link";
    link.index = {xn};
    link.expr.add(1.0, x).add(-lo);
    for (int l = 1; l <= digits; ++l) {
      Constraint one;
      one.family = "nmdt_digit";
      one.index = {xn, std::to_string(l)};
      one.expr.add(-1.0);
      d.z.emplace_back();
      for (int k = 0; k <= 9; ++k) {
        VarId z = add_variable(out, VarKind::Z, {xn, std::to_string(l), std::to_string(k)}, "", {0, 1}, true);
        d.z.back().push_back(z);
        one.expr.add(1.0, z);
        if (k > 0) link.expr.add(-range * k * std::pow(10.0, -l), z);
      }
      add_constraint(out, std::move(one));
    }
    d.rest = add_variable(out, VarKind::DL, {xn}, "", {0.0, step});
    link.expr.add(-range, d.rest);
    add_constraint(out, std::move(link));
    return disc.emplace(x, std::move(d)).first->second;
  };

  return replace_products(model, [&](AlgebraicModel& out, VarId a, VarId b, VarId w) {
    double ra = out.variables[a].hi - out.variables[a].lo;
    double rb = out.variables[b].hi - out.variables[b].lo;
    VarId x = rb < ra ? b : a;
    VarId y = x == a ? b : a;
    double xl = out.variables[x].lo, range = out.variables[x].hi - xl;
    std::string wn = var_name(out, w);
    Constraint def;
    def.family = "nmdt_product";
    def.index = {wn};
    def.expr.add(1.0, w);
    if (x == y || range <= 1e-12) {
      // Square terms and degenerate ranges keep the plain envelope.
      add_envelope(out, w, a, b, "mccormick");
      return;
    }
    def.expr.add(-xl, y);
    const auto& d = discretize(out, x);
    double yl = out.variables[y].lo, yu = out.variables[y].hi;
    for (int l = 1; l <= digits; ++l) {
      Constraint total;
      total.family = "nmdt_split";
      total.index = {wn, std::to_string(l)};
      total.expr.add(-1.0, y);
      for (int k = 0; k <= 9; ++k) {
        VarId z = d.z[l - 1][k];
        VarId yd = add_variable(out, VarKind::YD, {wn, std::to_string(l), std::to_string(k)}, "",
                                {std::min(0.0, yl), std::max(0.0, yu)});
        total.expr.add(1.0, yd);
        if (k > 0) def.expr.add(-range * k * std::pow(10.0, -l), yd);
        // yd = y·z
        std::vector<std::string> idx{var_name(out, yd)};
        Constraint lo_row, hi_row;
        lo_row.family = "nmdt_select_lo";
        hi_row.family = "nmdt_select_hi";
        lo_row.index = hi_row.index = idx;
        lo_row.sense = Sense::ge;
        hi_row.sense = Sense::le;
        lo_row.expr.add(1.0, yd).add(-yl, z);
        hi_row.expr.add(1.0, yd).add(-yu, z);
        add_constraint(out, std::move(lo_row));
        add_constraint(out, std::move(hi_row));
      }
      add_constraint(out, std::move(total));
    }
    // remainder product rest·y
    Interval rw = mul({0.0, step}, {yl, yu});
    VarId dw = add_variable(out, VarKind::DW, {wn}, "", {rw.lo, rw.hi});
    out.variables[dw].product_of = std::array<VarId, 2>{d.rest, y};
    add_envelope(out, dw, d.rest, y, "nmdt_rest");
    def.expr.add(-range, dw);
    add_constraint(out, std::move(def));
  });
}

AlgebraicModel relax(const AlgebraicModel& model, const RelaxationConfig& cfg) {
  auto bounded = infer_bounds(model, cfg.bound_passes);
  if (cfg.mode == RelaxationMode::nmdt) return nmdt_relax(bounded, cfg.digits);
  return mccormick_relax(bounded);
}

std::vector<double> lift_point(const AlgebraicModel& relaxed, const std::vector<double>& original) {
  std::vector<double> x(relaxed.variables.size(), 0.0);
  std::copy(original.begin(), original.end(), x.begin());
  std::map<std::string, VarId> by_name;
  for (VarId j = 0; j < relaxed.variables.size(); ++j) by_name.emplace(to_string(relaxed.variables[j].key), j);

  // Normalized position of a discretized factor: whole cells and remainder.
  auto position = [&](VarId v, int digits) {
    const auto& var = relaxed.variables[v];
    double range = var.hi - var.lo;
    double lambda = std::clamp((x[v] - var.lo) / range, 0.0, 1.0);
    double cells = std::pow(10.0, digits);
    double cell = std::min(std::floor(lambda * cells), cells - 1);
    return std::pair{cell, lambda - cell / cells};
  };
  auto digits_of = [&](const std::string& xn) {
    int p = 0;
    while (by_name.count(to_string(VarKey{VarKind::Z, {xn, std::to_string(p + 1), "0"}, ""}))) ++p;
    return p;
  };
  auto discretized_factor = [&](VarId w) {
    auto [a, b] = *relaxed.variables[w].product_of;
    double ra = relaxed.variables[a].hi - relaxed.variables[a].lo;
    double rb = relaxed.variables[b].hi - relaxed.variables[b].lo;
    VarId f = rb < ra ? b : a;
    return std::pair{f, f == a ? b : a};
  };

  // Appended variables only depend on variables created before them.
  for (VarId j = original.size(); j < relaxed.variables.size(); ++j) {
    const auto& v = relaxed.variables[j];
    const auto& idx = v.key.index;
    switch (v.key.kind) {
      case VarKind::W:
      case VarKind::DW:
        x[j] = x[(*v.product_of)[0]] * x[(*v.product_of)[1]];
        break;
      case VarKind::Z: {
        int p = digits_of(idx[0]);
        int l = std::stoi(idx[1]), k = std::stoi(idx[2]);
        auto cell = static_cast<long long>(position(by_name.at(idx[0]), p).first);
        long long digit = cell / static_cast<long long>(std::pow(10.0, p - l)) % 10;
        x[j] = digit == k ? 1.0 : 0.0;
        break;
      }
      case VarKind::DL:
        x[j] = position(by_name.at(idx[0]), digits_of(idx[0])).second;
        break;
      case VarKind::YD: {
        VarId w = by_name.at(idx[0]);
        auto [f, y] = discretized_factor(w);
        VarId z = by_name.at(to_string(VarKey{VarKind::Z, {to_string(relaxed.variables[f].key), idx[1], idx[2]}, ""}));
        x[j] = x[y] * x[z];
        break;
      }
      default:
        break;
    }
  }
  return x;
}

}  // namespace refplan
