#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "refplan/model_ir.hpp"

namespace refplan {

struct SolveConfig {
  double feasibility_tolerance = 1e-6;  // relative, |violation| / max(1, |rhs|)
  double integrality_tolerance = 1e-6;
  double gap = 1e-4;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  std::size_t iteration_limit = 5'000'000;                      // simplex pivots per LP
  std::size_t node_limit = std::numeric_limits<std::size_t>::max();
  double slp_radius = 0.1;  // initial trust region, fraction of each quality's bound range
  double slp_shrink = 0.5;
  std::size_t slp_max_iterations = 50;
  double slp_tolerance = 1e-5;  // max relative change that counts as converged
  std::ostream* log = nullptr;  // progress lines, if set
};

enum class SolveStatus { optimal, feasible, infeasible, unbounded, limit };
const char* to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::limit;
  std::vector<double> values;  // one per model variable; empty without a primal point
  double objective = -std::numeric_limits<double>::infinity();
  double bound = std::numeric_limits<double>::infinity();  // valid upper bound (maximization)
  std::size_t iterations = 0;
  std::size_t nodes = 0;
  double seconds = 0.0;
};

/// Raised when the basis cannot be factorized or the solution drifts out
/// of tolerance after refactorization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Maximizes the objective of a linear, continuous model (integrality marks
/// are ignored) with a bounded-variable primal simplex.
SolveResult solve_lp(const AlgebraicModel& model, const SolveConfig& cfg = {});

/// Same, with per-variable bounds replacing the model's.
SolveResult solve_lp(const AlgebraicModel& model, const std::vector<double>& lo,
                     const std::vector<double>& hi, const SolveConfig& cfg = {});

/// Depth-first branch and bound on the integer-marked variables of a linear
/// model, restarting from the best-bound node every 100 nodes.
SolveResult branch_and_bound(const AlgebraicModel& model, const SolveConfig& cfg = {});

struct SlpIteration {
  std::size_t iteration = 0;
  double objective = 0.0;
  double max_violation = 0.0;  // relative, over the bilinear model
  double max_change = 0.0;     // relative change of the frozen variables
  double radius = 0.0;
  bool accepted = false;
};

struct SlpResult {
  SolveStatus status = SolveStatus::limit;  // feasible, infeasible (best iterate violates), limit
  std::vector<double> values;
  double objective = 0.0;
  double max_violation = 0.0;
  bool converged = false;
  bool diverged = false;  // violations grew for five iterations in a row
  std::vector<SlpIteration> trace;
};

/// Successive linearization. `start` holds one value per variable (an empty
/// vector starts from each variable's bound midpoint). Qualities and
/// calibrated yields are frozen per iteration; the resulting LP (or MILP
/// when binaries exist) in the flows is solved with penalized slacks and
/// the frozen values are re-derived from the defining rows. Once a step is
/// rejected, flows are held in a trust region that shrinks on rejection.
SlpResult slp_heuristic(const AlgebraicModel& model, const std::vector<double>& start,
                        const SolveConfig& cfg = {});

/// Largest relative violation |r| / max(1, |rhs|) over constraints and
/// bounds at `values`.
double max_relative_violation(const AlgebraicModel& model, const std::vector<double>& values);

}  // namespace refplan
