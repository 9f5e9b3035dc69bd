#include "refplan/model_ir.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace refplan {

namespace {

constexpr const char* kKindNames[] = {"FVI", "FVO", "FVM", "FQ", "Gamma", "FVLI",
                                      "FVLO", "L", "VM", "V", "X", "W",
                                      "Z", "YD", "DL", "DW", "SLACK"};

constexpr double kDropTol = 1e-12;

}  // namespace

const char* to_string(VarKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<VarKind> var_kind_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(VarKind::SLACK); ++i)
    if (s == kKindNames[i]) return static_cast<VarKind>(i);
  return std::nullopt;
}

std::string to_string(const VarKey& key) {
  std::string out = to_string(key.kind);
  out += "(";
  bool first = true;
  for (const auto& i : key.index) {
    out += (first ? "" : ",") + i;
    first = false;
  }
  if (!key.period.empty()) out += (first ? "" : ",") + key.period;
  return out + ")";
}

const char* to_string(Sense s) {
  switch (s) {
    case Sense::eq: return "=";
    case Sense::le: return "<=";
    case Sense::ge: return ">=";
  }
  return "?";
}

Expr& Expr::add(double coef, VarId v) {
  linear.push_back({coef, v});
  return *this;
}

Expr& Expr::add(double coef, VarId a, VarId b) {
  bilinear.push_back({coef, a, b});
  return *this;
}

Expr& Expr::add(double c) {
  constant += c;
  return *this;
}

Expr& Expr::add(double scale, const Expr& other) {
  for (const auto& t : other.linear) linear.push_back({scale * t.coef, t.var});
  for (const auto& t : other.bilinear) bilinear.push_back({scale * t.coef, t.a, t.b});
  constant += scale * other.constant;
  return *this;
}

double Expr::evaluate(const std::vector<double>& values) const {
  double v = constant;
  for (const auto& t : linear) v += t.coef * values[t.var];
  for (const auto& t : bilinear) v += t.coef * values[t.a] * values[t.b];
  return v;
}

std::string Constraint::id() const {
  std::string out = family + "(";
  for (std::size_t i = 0; i < index.size(); ++i) out += (i ? "," : "") + index[i];
  return out + ")";
}

bool Constraint::vacuous() const { return expr.linear.empty() && expr.bilinear.empty(); }

std::optional<VarId> AlgebraicModel::find(const VarKey& key) const {
  auto it = lookup.find(key);
  if (it == lookup.end()) return std::nullopt;
  return it->second;
}

VarId AlgebraicModel::at(const VarKey& key) const {
  auto it = lookup.find(key);
  if (it == lookup.end()) throw ModelError("unknown variable " + to_string(key));
  return it->second;
}

bool AlgebraicModel::is_linear() const {
  if (!objective.is_linear()) return false;
  return std::all_of(constraints.begin(), constraints.end(),
                     [](const Constraint& c) { return c.expr.is_linear(); });
}

bool AlgebraicModel::has_integers() const {
  return std::any_of(variables.begin(), variables.end(),
                     [](const Variable& v) { return v.integer; });
}

VarId add_variable(AlgebraicModel& model, VarKind kind, std::vector<std::string> index,
                   std::string period, Bounds bounds, bool integer) {
  VarKey key{kind, std::move(index), std::move(period)};
  if (model.lookup.count(key)) throw ModelError("duplicate variable " + to_string(key));
  if (integer) {
    bounds.lo = std::max(bounds.lo, 0.0);
    bounds.hi = std::min(bounds.hi, 1.0);
  }
  VarId id = model.variables.size();
  Variable v;
  v.key = key;
  v.lo = bounds.lo;
  v.hi = bounds.hi;
  v.integer = integer;
  model.variables.push_back(std::move(v));
  model.lookup.emplace(std::move(key), id);
  return id;
}

std::size_t add_constraint(AlgebraicModel& model, Constraint c) {
  auto n = model.variables.size();
  auto check = [&](VarId v) {
    if (v >= n)
      throw ModelError("constraint " + c.id() + " references unknown variable #" +
                       std::to_string(v));
  };
  for (const auto& t : c.expr.linear) check(t.var);
  for (const auto& t : c.expr.bilinear) {
    check(t.a);
    check(t.b);
  }
  if (c.defines) check(*c.defines);
  model.constraints.push_back(std::move(c));
  return model.constraints.size() - 1;
}

ModelStatistics model_statistics(const AlgebraicModel& model) {
  ModelStatistics s;
  s.total_variables = model.variables.size();
  for (const auto& v : model.variables)
    if (v.integer) ++s.binary_variables;
  s.total_constraints = model.constraints.size();
  std::vector<VarId> touched;
  for (const auto& c : model.constraints) {
    if (c.vacuous()) ++s.vacuous_constraints;
    s.bilinear_terms += c.expr.bilinear.size();
    touched.clear();
    for (const auto& t : c.expr.bilinear) {
      touched.push_back(t.a);
      touched.push_back(t.b);
    }
    std::sort(touched.begin(), touched.end());
    s.nonlinear_elements += std::unique(touched.begin(), touched.end()) - touched.begin();
  }
  return s;
}

namespace {

// Applies the substitution map (old id -> new id, or a constant) and
// normalizes term lists.
Expr canonical_expr(const Expr& e, const std::vector<std::optional<VarId>>& remap,
                    const std::vector<double>& fixed_value) {
  std::map<VarId, double> lin;
  std::map<std::pair<VarId, VarId>, double> bil;
  double constant = e.constant;
  for (const auto& t : e.linear) {
    if (remap[t.var]) lin[*remap[t.var]] += t.coef;
    else constant += t.coef * fixed_value[t.var];
  }
  for (const auto& t : e.bilinear) {
    auto a = remap[t.a], b = remap[t.b];
    if (a && b) bil[{std::min(*a, *b), std::max(*a, *b)}] += t.coef;
    else if (a) lin[*a] += t.coef * fixed_value[t.b];
    else if (b) lin[*b] += t.coef * fixed_value[t.a];
    else constant += t.coef * fixed_value[t.a] * fixed_value[t.b];
  }
  Expr out;
  out.constant = constant;
  for (const auto& [v, c] : lin)
    if (std::abs(c) >= kDropTol) out.linear.push_back({c, v});
  for (const auto& [p, c] : bil)
    if (std::abs(c) >= kDropTol) out.bilinear.push_back({c, p.first, p.second});
  return out;
}

}  // namespace

AlgebraicModel canonicalize(const AlgebraicModel& model) {
  std::size_t n = model.variables.size();
  std::vector<std::optional<VarId>> remap(n);
  std::vector<double> fixed_value(n, 0.0);
  AlgebraicModel out;
  for (VarId i = 0; i < n; ++i) {
    const auto& v = model.variables[i];
    if (v.fixed) {
      fixed_value[i] = v.lo;
      continue;
    }
    remap[i] = out.variables.size();
    out.lookup.emplace(v.key, out.variables.size());
    out.variables.push_back(v);
  }
  for (auto& v : out.variables) {
    if (!v.product_of) continue;
    auto a = remap[(*v.product_of)[0]], b = remap[(*v.product_of)[1]];
    if (a && b) v.product_of = std::array<VarId, 2>{std::min(*a, *b), std::max(*a, *b)};
    else v.product_of.reset();
  }
  out.constraints.reserve(model.constraints.size());
  for (const auto& c : model.constraints) {
    Constraint nc = c;
    nc.expr = canonical_expr(c.expr, remap, fixed_value);
    if (c.defines) {
      if (remap[*c.defines]) nc.defines = *remap[*c.defines];
      else nc.defines.reset();
    }
    out.constraints.push_back(std::move(nc));
  }
  out.objective = canonical_expr(model.objective, remap, fixed_value);
  return out;
}

double constraint_activity(const Constraint& c, const std::vector<double>& values) {
  return c.expr.evaluate(values);
}

double constraint_violation(const Constraint& c, const std::vector<double>& values) {
  double a = c.expr.evaluate(values);
  switch (c.sense) {
    case Sense::eq: return std::abs(a);
    case Sense::le: return std::max(a, 0.0);
    case Sense::ge: return std::max(-a, 0.0);
  }
  return 0.0;
}

std::optional<double> solve_row_for(const Constraint& c, VarId target, const std::vector<double>& values) {
  double a = 0.0, rest = c.expr.constant, scale = 0.0;
  for (const auto& t : c.expr.linear) {
    scale = std::max(scale, std::abs(t.coef));
    if (t.var == target) a += t.coef;
    else rest += t.coef * values[t.var];
  }
  for (const auto& t : c.expr.bilinear) {
    if (t.a == target && t.b == target) return std::nullopt;
    if (t.a == target) a += t.coef * values[t.b];
    else if (t.b == target) a += t.coef * values[t.a];
    else rest += t.coef * values[t.a] * values[t.b];
  }
  if (std::abs(a) <= 1e-9 * std::max(1.0, scale)) return std::nullopt;
  return -rest / a;
}

}  // namespace refplan
