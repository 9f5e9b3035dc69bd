#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refplan/schema.hpp"

namespace refplan {

/// Variable families. The first eleven are the planning model's own; the
/// rest are introduced by relaxations (W, Z, YD, DL, DW) or by the SLP
/// heuristic (SLACK).
enum class VarKind {
  FVI,    // inlet mass flow (s, t)
  FVO,    // outlet mass flow (s, t)
  FVM,    // batch mass flow (u, m, s, t)
  FQ,     // stream quality (s, q, t)
  Gamma,  // calibrated yield (u, m, s, t)
  FVLI,   // flow into inventory (s, t)
  FVLO,   // flow out of inventory (s, t)
  L,      // inventory level (s, t)
  VM,     // mixer batch volume (u, m, s, t)
  V,      // stream volume (s, t); (s, "out", t) for CDU outlet volumes
  X,      // inventory direction flag (s, t)
  W,      // product of two variables
  Z,      // digit selector
  YD,     // disaggregated factor copy
  DL,     // discretisation remainder
  DW,     // remainder product
  SLACK,
};

const char* to_string(VarKind kind);
std::optional<VarKind> var_kind_from_string(const std::string& s);

struct VarKey {
  VarKind kind = VarKind::FVI;
  std::vector<std::string> index;
  std::string period;  // empty for period-free variables

  friend auto operator<=>(const VarKey&, const VarKey&) = default;
};

std::string to_string(const VarKey& key);

using VarId = std::size_t;

struct Variable {
  VarKey key;
  double lo = 0.0;
  double hi = kInf;
  bool integer = false;
  bool fixed = false;  // pinned by FIX; removed by canonicalize
  std::optional<std::array<VarId, 2>> product_of;  // W / DW provenance
};

struct LinearTerm {
  double coef = 0.0;
  VarId var = 0;
  friend bool operator==(const LinearTerm&, const LinearTerm&) = default;
};

struct BilinearTerm {
  double coef = 0.0;
  VarId a = 0;  // a <= b after canonicalization
  VarId b = 0;
  friend bool operator==(const BilinearTerm&, const BilinearTerm&) = default;
};

/// Sum of linear terms, bilinear terms and a constant.
struct Expr {
  std::vector<LinearTerm> linear;
  std::vector<BilinearTerm> bilinear;
  double constant = 0.0;

  Expr& add(double coef, VarId v);
  Expr& add(double coef, VarId a, VarId b);
  Expr& add(double c);
  Expr& add(double scale, const Expr& other);
  bool is_linear() const { return bilinear.empty(); }
  double evaluate(const std::vector<double>& values) const;

  friend bool operator==(const Expr&, const Expr&) = default;
};

enum class Sense { eq, le, ge };
const char* to_string(Sense s);

/// expr (sense) 0.
struct Constraint {
  std::string family;
  std::vector<std::string> index;  // includes the period as last entry where applicable
  Expr expr;
  Sense sense = Sense::eq;
  /// Variable this row is the natural definition of (quality pooling,
  /// volume, calibrated yield). Used to re-derive values from flows.
  std::optional<VarId> defines;

  std::string id() const;  // "family(i1,i2,...)"
  bool vacuous() const;    // no terms left
};

/// Thrown for duplicate or unknown variables and malformed constraints.
class ModelError : public Error {
 public:
  using Error::Error;
};

struct AlgebraicModel {
  std::vector<Variable> variables;
  std::map<VarKey, VarId> lookup;
  std::vector<Constraint> constraints;
  Expr objective;  // maximized

  std::optional<VarId> find(const VarKey& key) const;
  VarId at(const VarKey& key) const;  // throws ModelError
  bool is_linear() const;
  bool has_integers() const;
};

VarId add_variable(AlgebraicModel& model, VarKind kind, std::vector<std::string> index,
                   std::string period, Bounds bounds, bool integer = false);

/// Returns the constraint position. Throws ModelError on unknown variables.
std::size_t add_constraint(AlgebraicModel& model, Constraint c);

struct ModelStatistics {
  std::size_t total_variables = 0;
  std::size_t binary_variables = 0;
  std::size_t total_constraints = 0;
  std::size_t nonlinear_elements = 0;
  std::size_t vacuous_constraints = 0;
  std::size_t bilinear_terms = 0;

  friend bool operator==(const ModelStatistics&, const ModelStatistics&) = default;
};

/// Nonlinear elements are (constraint, variable) incidences where the
/// variable occurs in at least one bilinear term of that constraint.
ModelStatistics model_statistics(const AlgebraicModel& model);

/// Substitutes fixed variables, merges duplicate terms, drops coefficients
/// below 1e-12 in magnitude, orders terms by variable id and stores each
/// bilinear pair as (min, max). Fixed variables are removed and the rest
/// renumbered in their existing order.
AlgebraicModel canonicalize(const AlgebraicModel& model);

/// Value of the constraint's expression at `values`.
double constraint_activity(const Constraint& c, const std::vector<double>& values);

/// Amount by which `c` is violated (0 when satisfied).
double constraint_violation(const Constraint& c, const std::vector<double>& values);

/// Value of `target` that satisfies `c` as an equation with every other
/// variable at `values`; nullopt when the row does not determine it.
std::optional<double> solve_row_for(const Constraint& c, VarId target, const std::vector<double>& values);

}  // namespace refplan
