#pragma once

#include <limits>

#include "refplan/formulation.hpp"
#include "refplan/relaxation.hpp"
#include "refplan/schema.hpp"
#include "refplan/solver.hpp"
#include "refplan/validation.hpp"

namespace refplan {

/// bb: solve the relaxation by branch-and-bound for a bound, then run the
/// successive linearization from the bound midpoints and from the
/// relaxation's point, keeping the better plan. slp: linearization from
/// the bound midpoints only.
enum class SolveMethod { bb, slp };

struct WorkflowOptions {
  BuildOptions build;
  RelaxationConfig relaxation;
  SolveConfig solve;
  SolveMethod method = SolveMethod::bb;
};

struct WorkflowResult {
  PlanSolution plan;
  double objective = -std::numeric_limits<double>::infinity();
  double bound = std::numeric_limits<double>::infinity();
  SolveStatus relaxation_status = SolveStatus::limit;  // limit when not run
  SlpResult slp;
  ValidationReport report;  // independent check of the plan
};

/// Builds, solves and validates. Throws BoundError when the relaxation
/// needs bounds the instance does not provide.
WorkflowResult solve_instance(const BenchmarkInstance& inst, const WorkflowOptions& opts = {});

}  // namespace refplan
