#pragma once

#include <map>
#include <string>
#include <vector>

#include "refplan/formulation.hpp"
#include "refplan/model_ir.hpp"

namespace refplan {

/// Values of the planning variables, keyed like the model's variables.
struct PlanSolution {
  std::map<VarKey, double> values;
  std::string source;
  std::string solver;
  std::string timestamp;

  bool has(const VarKey& key) const { return values.count(key) != 0; }
  double at(const VarKey& key) const;  // throws MissingVariableError
  void set(const VarKey& key, double v) { values[key] = v; }
};

class MissingVariableError : public Error {
 public:
  using Error::Error;
};

/// Planning variables of `model` at `values`; relaxation and slack
/// variables are dropped.
PlanSolution plan_from_values(const AlgebraicModel& model, const std::vector<double>& values,
                              std::string source = "", std::string solver = "");

/// One value per model variable, read from the plan. Throws
/// MissingVariableError for planning variables the plan lacks; auxiliary
/// variables absent from the plan are set to zero.
std::vector<double> plan_to_values(const AlgebraicModel& model, const PlanSolution& plan);

struct Residual {
  std::string id;      // family(index...)
  std::string family;
  double magnitude = 0.0;  // absolute amount by which the row is missed
  double relative = 0.0;   // magnitude / max(1, |rhs|)
};

struct ProfitBreakdown {
  double revenue = 0.0;             // Σ cP·FVI over products
  double material_cost = 0.0;       // Σ cM·FVO over raw materials
  double product_inventory = 0.0;   // Σ ciP·FVLI − ciM·FVLO over products
  double material_inventory = 0.0;  // −Σ (ciM·FVLO − ciP·FVLI) over raw materials
  double total() const { return revenue - material_cost + product_inventory + material_inventory; }
};

struct ValidationReport {
  double tolerance = 1e-6;
  std::vector<Residual> residuals;   // every evaluated row, in evaluation order
  std::vector<Residual> violations;  // relative > tolerance, largest first
  ProfitBreakdown profit;
  std::size_t skipped_pools = 0;     // quality rows skipped for a near-empty pool
  bool feasible() const { return violations.empty(); }
};

/// Pools carrying less than this many tons are not quality-checked.
inline constexpr double kPoolEpsilon = 1e-5;

/// Evaluates every constraint family on the plan in its fractional form
/// (qualities as ratios of pooled quantities). With opts.delta_base set,
/// delta-base units are checked against yields recomputed from the plan's
/// feed qualities; otherwise against their base yields.
ValidationReport check_solution(const BenchmarkInstance& inst, const PlanSolution& plan,
                                double tolerance = 1e-6, const BuildOptions& opts = {});

ProfitBreakdown evaluate_profit(const BenchmarkInstance& inst, const PlanSolution& plan,
                                const BuildOptions& opts = {});

struct FlowChange {
  std::string stream;
  double fixed = 0.0;
  double calibrated = 0.0;
  double delta() const { return calibrated - fixed; }
};

struct CalibrationEntry {
  std::string unit, batch, period;
  std::map<std::string, double> feed_properties;  // quality -> value used
  std::map<std::string, double> yields;           // stream -> recomputed yield coefficient
  std::vector<FlowChange> flows;                  // outlet streams of the batch
};

struct CalibrationReport {
  std::vector<CalibrationEntry> entries;
};

/// Recomputes the yields of every delta-base batch from the plan's feed
/// qualities and the flows those yields imply for the plan's batch feed.
/// Throws MissingVariableError when the plan lacks a delta-base unit.
CalibrationReport calibrate_yields(const BenchmarkInstance& inst, const PlanSolution& plan,
                                   const BuildOptions& opts = {});

enum class Scenario { feed_ratio, throughput, demand, blend_property };
const char* to_string(Scenario s);

struct TaggedViolation {
  Residual violation;
  Scenario scenario;
};

struct ScenarioReport {
  PlanSolution propagated;                // plan after pushing calibrated flows downstream
  std::vector<TaggedViolation> tagged;
  std::vector<Residual> unclassified;
  bool empty() const { return tagged.empty() && unclassified.empty(); }
};

/// Pushes the calibrated flows through the network (flow splits, blend
/// recipes and qualities of the plan are kept) and validates the result
/// with calibrated yields. Violations that the original plan did not have
/// are tagged by the constraint family they belong to.
ScenarioReport classify_violations(const BenchmarkInstance& inst, const PlanSolution& plan,
                                   const CalibrationReport& calib, double tolerance = 1e-6,
                                   const BuildOptions& opts = {});

}  // namespace refplan
