#pragma once

#include <string>
#include <vector>

#include "refplan/io.hpp"
#include "refplan/model_ir.hpp"

namespace refplan::testing {

struct PropertyResult {
  bool passed = true;
  std::string detail;
};

/// Grid-enumerated feasible plans of random tiny instances never beat the
/// McCormick relaxation bound.
PropertyResult relaxation_dominates_grid(std::size_t instances = 50);
/// Calibrated yields equal base yields when feed properties sit at base.
PropertyResult gamma_at_base();
/// Swing-cut coefficients cancel over the cuts of a batch.
PropertyResult swing_cancellation();
/// Levels telescope and the direction flag admits one of inflow/outflow.
PropertyResult inventory_telescoping();
/// McCormick envelopes are exact at the corners of the box.
PropertyResult envelope_corners();
/// Branch-and-bound agrees with exhaustive enumeration on 2..6 binaries.
PropertyResult bb_matches_enumeration();
/// Relaxations survive an MPS write/read cycle with identical statistics
/// and optimum.
PropertyResult mps_round_trip();

/// Linear program read from MPS as a model (variables keyed by column name).
AlgebraicModel model_from_mps(const MpsModel& mps);

}  // namespace refplan::testing
