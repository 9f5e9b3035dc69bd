// Acceptance checks. One line per criterion:  criterion N: PASS|FAIL  detail
//
// Criteria 1-5 need the published case bundles, converted to the bundle
// format, under $REFPLAN_DATASET_DIR:
//   case1/ case2/ case3/                    instance bundles
//   solutions/case{1,2,3}.csv               published plans (solution table format)
//   solutions/case2_fixed_yield.csv         Case 2 plan of the fixed-yield model

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "refplan/formulation.hpp"
#include "refplan/io.hpp"
#include "refplan/relaxation.hpp"
#include "refplan/schema.hpp"
#include "refplan/solver.hpp"
#include "refplan/validation.hpp"
#include "refplan/workflow.hpp"
#include "support/instances.hpp"
#include "support/properties.hpp"

using namespace refplan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string stats_string(const ModelStatistics& s) {
  std::ostringstream os;
  os << s.total_variables << "/" << s.binary_variables << "/" << s.total_constraints << "/"
     << s.nonlinear_elements;
  return os.str();
}

// Dataset root, or an explanation of why it is unusable.
std::optional<fs::path> dataset(std::string& why) {
  const char* env = std::getenv("REFPLAN_DATASET_DIR");
  if (!env || !*env) {
    why = "dataset not available: REFPLAN_DATASET_DIR is not set";
    return std::nullopt;
  }
  fs::path root(env);
  if (!fs::is_directory(root)) {
    why = "dataset not available: " + root.string() + " is not a directory";
    return std::nullopt;
  }
  return root;
}

template <class F>
Outcome with_dataset(F body) {
  std::string why;
  auto root = dataset(why);
  if (!root) return {false, why};
  try {
    return body(*root);
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

bool within_relative(double got, double want, double tol) {
  return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

Outcome model_statistics_oracle() {
  return with_dataset([](const fs::path& root) {
    const ModelStatistics expected[3] = {{3573, 0, 3428, 2082, 0, 0},
                                         {7157, 56, 8156, 4294, 0, 0},
                                         {21469, 168, 24466, 12882, 0, 0}};
    Outcome out{true, ""};
    for (int k = 0; k < 3; ++k) {
      auto inst = load_instance(root / ("case" + std::to_string(k + 1)));
      auto t0 = std::chrono::steady_clock::now();
      auto s = model_statistics(build_model(inst));
      double secs = seconds_since(t0);
      bool ok = s.total_variables == expected[k].total_variables &&
                s.binary_variables == expected[k].binary_variables &&
                s.total_constraints == expected[k].total_constraints &&
                s.nonlinear_elements == expected[k].nonlinear_elements && secs < 10.0;
      out.passed &= ok;
      std::ostringstream os;
      os << "case" << k + 1 << " " << stats_string(s) << " (expected " << stats_string(expected[k])
         << ", " << secs << " s); ";
      out.detail += os.str();
    }
    return out;
  });
}

Outcome ablation_statistics_oracle() {
  return with_dataset([](const fs::path& root) {
    auto inst = load_instance(root / "case2");
    BuildOptions o;
    o.delta_base = false;
    auto s = model_statistics(build_model(inst, o));
    bool ok = s.total_variables == 6976 && s.total_constraints == 7957 && s.nonlinear_elements == 3556;
    std::ostringstream os;
    os << "case2 without delta-base: " << s.total_variables << " variables, " << s.total_constraints
       << " constraints, " << s.nonlinear_elements << " nonlinear elements (expected 6976/7957/3556)";
    return Outcome{ok, os.str()};
  });
}

Outcome validator_oracle() {
  return with_dataset([](const fs::path& root) {
    const double profit[3] = {34'167'968.0, 67'303'190.0, 125'250'466.0};
    Outcome out{true, ""};
    for (int k = 0; k < 3; ++k) {
      auto name = "case" + std::to_string(k + 1);
      auto inst = load_instance(root / name);
      auto model = build_model(inst);
      auto plan = read_solution(root / "solutions" / (name + ".csv"), model);
      auto report = check_solution(inst, plan, 1e-6);
      bool ok = report.feasible() && within_relative(report.profit.total(), profit[k], 1e-6);
      out.passed &= ok;
      std::ostringstream os;
      os.precision(12);
      os << name << " violations=" << report.violations.size() << " profit=" << report.profit.total()
         << " (expected " << profit[k] << "); ";
      out.detail += os.str();
    }
    return out;
  });
}

Outcome relaxation_soundness() {
  return with_dataset([](const fs::path& root) {
    auto inst = load_instance(root / "case1");
    auto t0 = std::chrono::steady_clock::now();
    auto relaxed = relax(build_model(inst));
    auto r = relaxed.has_integers() ? branch_and_bound(relaxed) : solve_lp(relaxed);
    double secs = seconds_since(t0);
    bool ok = r.status == SolveStatus::optimal && r.objective >= 34'167'968.0 * (1 - 1e-9) && secs < 120.0;
    std::ostringstream os;
    os.precision(12);
    os << "case1 McCormick bound " << r.objective << " (" << to_string(r.status) << ", " << secs
       << " s), must be >= 34167968";
    return Outcome{ok, os.str()};
  });
}

Outcome calibration_oracle() {
  return with_dataset([](const fs::path& root) {
    auto inst = load_instance(root / "case2");
    BuildOptions fixed;
    fixed.delta_base = false;
    auto model = build_model(inst, fixed);
    auto plan = read_solution(root / "solutions" / "case2_fixed_yield.csv", model);
    auto calib = calibrate_yields(inst, plan);
    // Published (fixed yield, calibrated) pairs; rows are matched by their
    // fixed-yield flow so the check does not depend on dataset names.
    const std::vector<std::pair<double, double>> published = {
        {1354.7, 1250.4}, {965.8, 984.8},   {948.3, 981.3},   {751.6, 801.5},
        {904.7, 904.5},   {932.0, 932.0},   {682.8, 682.5},   {641.8, 641.3},
        {1463.6, 1498.0}, {771.5, 805.0},   {761.0, 721.6},   {263.3, 245.4},
        {2865.2, 2880.3}, {1370.9, 1378.2}, {1381.4, 1376.8}, {337.4, 330.4}};
    Outcome out{true, ""};
    std::size_t matched = 0;
    for (const auto& [fixed_flow, calibrated] : published) {
      const FlowChange* hit = nullptr;
      for (const auto& e : calib.entries)
        for (const auto& f : e.flows)
          if (std::abs(f.fixed - fixed_flow) <= 0.1) hit = &f;
      if (!hit) {
        out.passed = false;
        out.detail += "no flow of " + std::to_string(fixed_flow) + " t; ";
        continue;
      }
      ++matched;
      if (std::abs(hit->calibrated - calibrated) > 0.1) {
        out.passed = false;
        std::ostringstream os;
        os << hit->stream << " " << hit->calibrated << " t (expected " << calibrated << "); ";
        out.detail += os.str();
      }
    }
    auto scen = classify_violations(inst, plan, calib, 1e-6);
    bool throughput = false;
    for (const auto& t : scen.tagged) throughput |= t.scenario == Scenario::throughput;
    out.passed &= throughput;
    out.detail += std::to_string(matched) + "/" + std::to_string(published.size()) +
                  " published rows matched; throughput tag " + (throughput ? "present" : "absent");
    return out;
  });
}

Outcome property_suite() {
  using namespace refplan::testing;
  const std::vector<std::pair<std::string, std::function<PropertyResult()>>> props = {
      {"a", [] { return relaxation_dominates_grid(50); }},
      {"b", gamma_at_base},
      {"c", swing_cancellation},
      {"d", inventory_telescoping},
      {"e", envelope_corners},
      {"f", bb_matches_enumeration},
      {"g", mps_round_trip},
  };
  Outcome out{true, ""};
  for (const auto& [tag, fn] : props) {
    auto t0 = std::chrono::steady_clock::now();
    PropertyResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    std::ostringstream os;
    os.precision(3);
    os << "  (" << tag << ") " << (r.passed ? "PASS" : "FAIL") << "  " << r.detail << " ["
       << seconds_since(t0) << " s]\n";
    std::cout << os.str();
    out.passed &= r.passed;
    if (!r.passed) out.detail += (out.detail.empty() ? "failed: " : ", ") + tag;
  }
  if (out.passed) out.detail = "all of (a)-(g) hold";
  return out;
}

// Global optimality is not claimed: the workflow reports an incumbent and
// a proven bound separately, and the incumbent must not exceed the bound.
Outcome optimality_not_claimed() {
  try {
    auto inst = refplan::testing::demo_instance();
    WorkflowOptions o;
    o.solve.time_limit = 60.0;
    auto r = solve_instance(inst, o);
    bool ok = r.report.feasible() && std::isfinite(r.bound) &&
              r.objective <= r.bound + 1e-6 * std::max(1.0, std::abs(r.bound));
    std::ostringstream os;
    os.precision(10);
    os << "out of scope; demo incumbent " << r.objective << " reported with bound " << r.bound
       << ", no optimality claim";
    return {ok, os.str()};
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7};

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"model statistics", model_statistics_oracle},
      {"ablation statistics", ablation_statistics_oracle},
      {"validator", validator_oracle},
      {"relaxation soundness", relaxation_soundness},
      {"calibration", calibration_oracle},
      {"property suite", property_suite},
      {"global optimality", optimality_not_claimed},
  };
  bool all = true;
  for (int k : selected) {
    const auto& [name, fn] = criteria[k - 1];
    auto r = fn();
    all &= r.passed;
    std::cout << "criterion " << k << " (" << name << "): " << (r.passed ? "PASS" : "FAIL") << "  "
              << r.detail << std::endl;
  }
  return all ? 0 : 1;
}
