#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "refplan/model_ir.hpp"

namespace refplan {

enum class RelaxationMode { mccormick, nmdt };

struct RelaxationConfig {
  RelaxationMode mode = RelaxationMode::mccormick;
  int digits = 1;         // NMDT precision, >= 1
  int bound_passes = 3;   // minimum interval-propagation passes
};

/// A bilinear participant has no finite bound, or propagation emptied a
/// variable's domain.
class BoundError : public Error {
 public:
  using Error::Error;
};

/// Feasibility-based interval propagation over the model's rows. Runs
/// `passes` sweeps, and keeps sweeping while a bilinear participant is
/// still unbounded and progress is being made. Bounds only ever shrink.
/// Throws BoundError naming the variable when a participant stays infinite
/// or when a domain becomes empty.
AlgebraicModel infer_bounds(const AlgebraicModel& model, int passes = 3);

/// Replaces each distinct product x·y by a W variable constrained by the
/// four envelope inequalities. Variables keep their ids; W variables are
/// appended and carry product_of. The result is linear.
AlgebraicModel mccormick_relax(const AlgebraicModel& model);

/// Normalized multiparametric disaggregation: the factor with the smaller
/// bound range of each product is written as lo + range·(Σ digit·10^-l + r)
/// with ten binaries per digit position, and the remainder product r·y is
/// enveloped. Binaries are shared by every product using the same factor.
AlgebraicModel nmdt_relax(const AlgebraicModel& model, int digits);

/// infer_bounds followed by the configured relaxation.
AlgebraicModel relax(const AlgebraicModel& model, const RelaxationConfig& cfg = {});

/// Extends a point of the original model to the relaxation: original ids
/// are copied and every appended variable is given its exact value.
std::vector<double> lift_point(const AlgebraicModel& relaxed, const std::vector<double>& original);

}  // namespace refplan
