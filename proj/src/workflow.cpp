#include "refplan/workflow.hpp"

namespace refplan {

WorkflowResult solve_instance(const BenchmarkInstance& inst, const WorkflowOptions& opts) {
  WorkflowResult out;
  auto model = build_model(inst, opts.build);
  std::vector<double> start;
  if (opts.method == SolveMethod::bb) {
    auto relaxed = relax(model, opts.relaxation);
    auto r = relaxed.has_integers() ? branch_and_bound(relaxed, opts.solve) : solve_lp(relaxed, opts.solve);
    out.relaxation_status = r.status;
    out.bound = r.bound;
    // Relaxations keep the original variables in front.
    if (!r.values.empty())
      start.assign(r.values.begin(), r.values.begin() + static_cast<long>(model.variables.size()));
  }
  out.slp = slp_heuristic(model, {}, opts.solve);
  if (!start.empty()) {
    // The relaxation point is a second start; the better plan is kept.
    auto second = slp_heuristic(model, start, opts.solve);
    double tol = opts.solve.feasibility_tolerance;
    bool f1 = out.slp.max_violation <= tol, f2 = second.max_violation <= tol;
    if (f2 != f1 ? f2 : (f2 ? second.objective > out.slp.objective : second.max_violation < out.slp.max_violation))
      out.slp = std::move(second);
  }
  if (!out.slp.values.empty()) {
    out.objective = out.slp.objective;
    out.plan = plan_from_values(model, out.slp.values, "solve", opts.method == SolveMethod::bb ? "bb+slp" : "slp");
  }
  if (!out.plan.values.empty())
    out.report = check_solution(inst, out.plan, opts.solve.feasibility_tolerance, opts.build);
  return out;
}

}  // namespace refplan
