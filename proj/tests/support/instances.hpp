#pragma once

#include <cstdint>

#include "refplan/schema.hpp"
#include "refplan/validation.hpp"

namespace refplan::testing {

/// Small two-period refinery: one CDU with swing cuts, a delta-base FCC,
/// a mixer feeding a fixed-yield hydrotreater, a splitter, a gasoline
/// blender with property windows and a proportional diesel blender.
BenchmarkInstance demo_instance();

/// Random pooling instance: raw materials R1..R3 with fixed qualities,
/// mixer MX pooling R1 and R2 into P, splitter SP sending P to O1 and
/// product H, blender BG mixing O1 and R3 into product G with a sulfur
/// (and sometimes gravity) window.
struct TinyInstance {
  BenchmarkInstance inst;
  std::size_t periods = 1;
};
TinyInstance random_tiny_instance(std::uint64_t seed);

/// The plan of a tiny instance given per-period purchases (r1, r2, r3) and
/// the fraction of the pool sent to the blender.
PlanSolution tiny_plan(const BenchmarkInstance& inst, const std::vector<std::array<double, 4>>& decisions);

}  // namespace refplan::testing
