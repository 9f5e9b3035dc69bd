#pragma once

// Bounded-variable revised primal simplex used by every solver entry point.

#include <chrono>
#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "refplan/solver.hpp"

namespace refplan::detail {

/// minimize cost·x + offset  s.t.  row_lo <= A x <= row_hi, col_lo <= x <= col_hi
struct LinearProgram {
  Eigen::SparseMatrix<double, Eigen::ColMajor> A;
  std::vector<double> row_lo, row_hi;
  std::vector<double> col_lo, col_hi;
  std::vector<double> cost;
  double offset = 0.0;

  std::size_t rows() const { return row_lo.size(); }
  std::size_t cols() const { return col_lo.size(); }
};

/// Negates the objective so that minimizing the program maximizes the
/// model. Throws ModelError for bilinear models.
LinearProgram to_linear_program(const AlgebraicModel& model);

/// Optimal basis over structural columns 0..n-1 and row logicals n..n+m-1.
struct Basis {
  std::vector<int> basic;   // column per basis position
  std::vector<char> upper;  // nonbasic column sits at its upper bound
};

struct LpOutcome {
  SolveStatus status = SolveStatus::limit;
  std::vector<double> x;
  double objective = 0.0;  // of the minimization
  std::size_t iterations = 0;
  std::shared_ptr<const Basis> basis;  // set when optimal
};

/// Column bound overrides and a starting basis. A basis that no longer
/// fits the bounds is repaired with dual simplex pivots; one that cannot
/// be factorized falls back to a cold start.
struct WarmStart {
  const std::vector<double>* col_lo = nullptr;
  const std::vector<double>* col_hi = nullptr;
  const Basis* basis = nullptr;
};

using Clock = std::chrono::steady_clock;

LpOutcome simplex(const LinearProgram& lp, const SolveConfig& cfg, Clock::time_point deadline,
                  const WarmStart& warm = {});

}  // namespace refplan::detail
