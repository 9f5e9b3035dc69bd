#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "refplan/model_ir.hpp"
#include "refplan/schema.hpp"

namespace refplan {

struct BuildOptions {
  /// Build only the first `horizon` periods of T.
  std::optional<std::size_t> horizon;
  /// Emit the X flags that keep inflow and outflow of an inventory exclusive.
  bool inventory_binaries = true;
  /// Model U_PD units with calibrated yields. When off they use their base
  /// yields exactly like U_PF units.
  bool delta_base = true;
};

std::vector<std::string> horizon_periods(const BenchmarkInstance& inst, const BuildOptions& opts);

/// Family names used as constraint tags, grouped by the part of the model
/// they come from ("material_balance", "cdu", "process_unit", "mixing",
/// "blender", "inventory", "capacity").
std::string family_group(const std::string& family);

/// Registers every variable of the model. The emitters below expect it to
/// have run on the same model.
void declare_variables(const BenchmarkInstance& inst, const BuildOptions& opts,
                       AlgebraicModel& model);

void emit_material_balance(const BenchmarkInstance& inst, const BuildOptions& opts,
                           AlgebraicModel& model);
void emit_cdu_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                          AlgebraicModel& model);
void emit_process_unit_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                                   AlgebraicModel& model);
void emit_mixing_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                             AlgebraicModel& model);
void emit_blender_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                              AlgebraicModel& model);
void emit_inventory_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                                AlgebraicModel& model);
/// Capacity windows. Hard bounds (FQ, FIX, L, purchase and sales limits)
/// are variable bounds set by declare_variables.
void emit_capacity_and_bounds(const BenchmarkInstance& inst, const BuildOptions& opts,
                              AlgebraicModel& model);
void emit_objective(const BenchmarkInstance& inst, const BuildOptions& opts,
                    AlgebraicModel& model);

/// Declares variables, runs every emitter and canonicalizes.
AlgebraicModel build_model(const BenchmarkInstance& inst, const BuildOptions& opts = {});

}  // namespace refplan
