#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "refplan/formulation.hpp"
#include "refplan/io.hpp"
#include "refplan/relaxation.hpp"
#include "refplan/schema.hpp"
#include "refplan/solver.hpp"
#include "refplan/superstructure.hpp"
#include "refplan/validation.hpp"
#include "refplan/workflow.hpp"

namespace fs = std::filesystem;
using namespace refplan;

namespace {

constexpr int kOk = 0;
constexpr int kFound = 1;  // infeasible, or violations found
constexpr int kUsage = 2;

struct ModelArgs {
  std::string instance;
  bool no_delta_base = false;
  std::optional<std::size_t> periods;
  bool no_inventory_binaries = false;

  void attach(CLI::App* app) {
    app->add_option("instance", instance, "instance bundle directory")->required()->check(CLI::ExistingDirectory);
    app->add_flag("--no-delta-base", no_delta_base, "use base yields for delta-base units");
    app->add_option("--periods", periods, "build only the first k periods")->check(CLI::PositiveNumber);
    app->add_flag("--no-inventory-binaries", no_inventory_binaries, "drop the inventory direction flags");
  }
  BuildOptions options() const {
    BuildOptions o;
    o.delta_base = !no_delta_base;
    o.horizon = periods;
    o.inventory_binaries = !no_inventory_binaries;
    return o;
  }
};

BenchmarkInstance load_checked(const std::string& dir) {
  auto inst = load_instance(dir);
  auto diags = validate_instance(inst);
  for (const auto& d : diags) std::cerr << format(d) << "\n";
  if (has_errors(diags)) throw Error("instance has errors");
  return inst;
}

std::string now_utc() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

RelaxationMode parse_mode(const std::string& s) {
  return s == "nmdt" ? RelaxationMode::nmdt : RelaxationMode::mccormick;
}

void print_stats(const ModelStatistics& s) {
  std::cout << "variables " << s.total_variables << "\n"
            << "binaries " << s.binary_variables << "\n"
            << "constraints " << s.total_constraints << "\n"
            << "nonlinear " << s.nonlinear_elements << "\n"
            << "bilinear_terms " << s.bilinear_terms << "\n"
            << "vacuous " << s.vacuous_constraints << "\n"
            << s.total_variables << "/" << s.binary_variables << "/" << s.total_constraints << "/"
            << s.nonlinear_elements << "\n";
}

void print_report(const ValidationReport& r, std::size_t shown) {
  std::cout << std::setprecision(12) << "profit " << r.profit.total() << "\n"
            << "revenue " << r.profit.revenue << "\n"
            << "material_cost " << r.profit.material_cost << "\n"
            << "product_inventory " << r.profit.product_inventory << "\n"
            << "material_inventory " << r.profit.material_inventory << "\n"
            << "rows " << r.residuals.size() << "\n"
            << "skipped_pools " << r.skipped_pools << "\n"
            << "violations " << r.violations.size() << "\n";
  for (std::size_t i = 0; i < r.violations.size() && i < shown; ++i)
    std::cout << "  " << r.violations[i].id << " relative=" << r.violations[i].relative
              << " magnitude=" << r.violations[i].magnitude << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Refinery planning model builder, relaxer, solver and checker"};
  app.require_subcommand(1);

  // build
  ModelArgs build_args;
  bool build_stats = false;
  std::string build_network_file;
  auto* build = app.add_subcommand("build", "build the planning model");
  build_args.attach(build);
  build->add_flag("--stats", build_stats, "print model statistics");
  build->add_option("--network", build_network_file, "write the superstructure as JSON");

  // relax
  ModelArgs relax_args;
  std::string relax_mode = "mccormick", relax_out, relax_format = "mps";
  int relax_digits = 1, relax_passes = 3;
  bool relax_solve = false;
  double relax_time = kInf;
  auto* relax_cmd = app.add_subcommand("relax", "build a linear relaxation");
  relax_args.attach(relax_cmd);
  relax_cmd->add_option("--mode", relax_mode)->check(CLI::IsMember({"mccormick", "nmdt"}));
  relax_cmd->add_option("--digits", relax_digits, "NMDT digits")->check(CLI::PositiveNumber);
  relax_cmd->add_option("--bound-passes", relax_passes)->check(CLI::PositiveNumber);
  relax_cmd->add_option("--out", relax_out, "write the relaxation to this file");
  relax_cmd->add_option("--format", relax_format)->check(CLI::IsMember({"mps", "lp"}));
  relax_cmd->add_flag("--solve", relax_solve, "solve the relaxation and print its bound");
  relax_cmd->add_option("--time-limit", relax_time);

  // solve
  ModelArgs solve_args;
  std::string solve_method = "bb", solve_out, solve_report, solve_mode = "mccormick";
  int solve_digits = 1;
  double solve_time = kInf, solve_gap = 1e-4;
  std::size_t solve_slp_iters = 50;
  bool solve_quiet = false;
  auto* solve = app.add_subcommand("solve", "solve the planning model");
  solve_args.attach(solve);
  solve->add_option("--method", solve_method)->check(CLI::IsMember({"bb", "slp"}));
  solve->add_option("--mode", solve_mode, "relaxation for bb")->check(CLI::IsMember({"mccormick", "nmdt"}));
  solve->add_option("--digits", solve_digits)->check(CLI::PositiveNumber);
  solve->add_option("--time-limit", solve_time);
  solve->add_option("--gap", solve_gap);
  solve->add_option("--slp-iterations", solve_slp_iters);
  solve->add_option("--out", solve_out, "plan file")->required();
  solve->add_option("--report", solve_report, "validation report file");
  solve->add_flag("--quiet", solve_quiet, "no progress lines");

  // validate
  ModelArgs validate_args;
  std::string validate_plan, validate_report;
  double validate_tol = 1e-6;
  std::size_t validate_show = 20;
  auto* validate = app.add_subcommand("validate", "check a plan against the instance");
  validate_args.attach(validate);
  validate->add_option("plan", validate_plan)->required()->check(CLI::ExistingFile);
  validate->add_option("--tol", validate_tol);
  validate->add_option("--report", validate_report, "validation report file");
  validate->add_option("--show", validate_show, "violations to print");

  // calibrate
  ModelArgs calibrate_args;
  std::string calibrate_plan, calibrate_report, calibrate_scenarios, calibrate_propagated;
  double calibrate_tol = 1e-6;
  auto* calibrate = app.add_subcommand("calibrate", "recompute delta-base yields for a plan");
  calibrate_args.attach(calibrate);
  calibrate->add_option("plan", calibrate_plan)->required()->check(CLI::ExistingFile);
  calibrate->add_option("--tol", calibrate_tol);
  calibrate->add_option("--report", calibrate_report, "calibration table file");
  calibrate->add_option("--scenarios", calibrate_scenarios, "tagged violations file");
  calibrate->add_option("--propagated", calibrate_propagated, "propagated plan file");

  // export
  ModelArgs export_args;
  std::string export_out, export_format = "mps", export_mode = "mccormick", export_bundle;
  int export_digits = 1;
  bool export_negate = false;
  auto* export_cmd = app.add_subcommand("export", "write the relaxed model or the normalized bundle");
  export_args.attach(export_cmd);
  export_cmd->add_option("--out", export_out, "model file");
  export_cmd->add_option("--format", export_format)->check(CLI::IsMember({"mps", "lp"}));
  export_cmd->add_option("--mode", export_mode)->check(CLI::IsMember({"mccormick", "nmdt"}));
  export_cmd->add_option("--digits", export_digits)->check(CLI::PositiveNumber);
  export_cmd->add_flag("--negate", export_negate, "write minimize -profit instead of OBJSENSE MAX");
  export_cmd->add_option("--bundle", export_bundle, "rewrite the instance bundle into this directory");

  // summary
  std::string summary_instance;
  auto* summary = app.add_subcommand("summary", "instance counts and diagnostics");
  summary->add_option("instance", summary_instance)->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*build) {
      auto inst = load_checked(build_args.instance);
      auto t0 = std::chrono::steady_clock::now();
      auto model = build_model(inst, build_args.options());
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (build_stats) print_stats(model_statistics(model));
      std::cout << "build_seconds " << secs << "\n";
      if (!build_network_file.empty()) write_network_json(build_network(inst), build_network_file);
      return kOk;
    }

    if (*relax_cmd) {
      auto inst = load_checked(relax_args.instance);
      auto model = build_model(inst, relax_args.options());
      RelaxationConfig rc{parse_mode(relax_mode), relax_digits, relax_passes};
      auto relaxed = relax(model, rc);
      print_stats(model_statistics(relaxed));
      if (!relax_out.empty()) {
        ExportOptions eo;
        eo.format = relax_format == "lp" ? ExportFormat::lp : ExportFormat::mps;
        write_model(relaxed, relax_out, eo);
      }
      if (relax_solve) {
        SolveConfig sc;
        sc.time_limit = relax_time;
        sc.log = &std::cerr;
        auto r = relaxed.has_integers() ? branch_and_bound(relaxed, sc) : solve_lp(relaxed, sc);
        std::cout << std::setprecision(12) << "status " << to_string(r.status) << "\n"
                  << "bound " << r.bound << "\n"
                  << "objective " << r.objective << "\n"
                  << "seconds " << r.seconds << "\n";
        if (r.status == SolveStatus::infeasible) return kFound;
      }
      return kOk;
    }

    if (*solve) {
      auto inst = load_checked(solve_args.instance);
      WorkflowOptions wo;
      wo.build = solve_args.options();
      wo.method = solve_method == "slp" ? SolveMethod::slp : SolveMethod::bb;
      wo.relaxation = {parse_mode(solve_mode), solve_digits, 3};
      wo.solve.time_limit = solve_time;
      wo.solve.gap = solve_gap;
      wo.solve.slp_max_iterations = solve_slp_iters;
      if (!solve_quiet) wo.solve.log = &std::cerr;
      auto r = solve_instance(inst, wo);
      std::cout << std::setprecision(12);
      if (wo.method == SolveMethod::bb)
        std::cout << "relaxation " << to_string(r.relaxation_status) << "\n"
                  << "bound " << r.bound << "\n";
      if (r.plan.values.empty()) {
        std::cout << "no plan\n";
        return kFound;
      }
      r.plan.timestamp = now_utc();
      write_solution(r.plan, solve_out);
      if (!solve_report.empty()) write_validation_report(r.report, solve_report);
      std::cout << "slp " << to_string(r.slp.status) << " iterations " << r.slp.trace.size() << "\n"
                << "objective " << r.objective << "\n";
      print_report(r.report, 10);
      return r.report.feasible() ? kOk : kFound;
    }

    if (*validate) {
      auto inst = load_checked(validate_args.instance);
      auto plan = read_solution(validate_plan);
      auto report = check_solution(inst, plan, validate_tol, validate_args.options());
      if (!validate_report.empty()) write_validation_report(report, validate_report);
      print_report(report, validate_show);
      return report.feasible() ? kOk : kFound;
    }

    if (*calibrate) {
      auto inst = load_checked(calibrate_args.instance);
      auto plan = read_solution(calibrate_plan);
      auto opts = calibrate_args.options();
      auto calib = calibrate_yields(inst, plan, opts);
      std::cout << std::fixed << std::setprecision(1);
      for (const auto& e : calib.entries) {
        std::cout << e.unit << " " << e.batch << " " << e.period << "\n";
        for (const auto& f : e.flows)
          std::cout << "  " << std::left << std::setw(16) << f.stream << std::right << std::setw(12)
                    << f.fixed << std::setw(12) << f.calibrated << std::setw(10) << f.delta() << "\n";
      }
      auto scen = classify_violations(inst, plan, calib, calibrate_tol, opts);
      if (!calibrate_report.empty()) write_calibration_report(calib, calibrate_report);
      if (!calibrate_scenarios.empty()) write_scenario_report(scen, calibrate_scenarios);
      if (!calibrate_propagated.empty()) write_solution(scen.propagated, calibrate_propagated);
      std::cout << std::defaultfloat << std::setprecision(6);
      for (const auto& t : scen.tagged)
        std::cout << to_string(t.scenario) << " " << t.violation.id << " relative=" << t.violation.relative
                  << "\n";
      for (const auto& u : scen.unclassified)
        std::cout << "unclassified " << u.id << " relative=" << u.relative << "\n";
      return scen.empty() ? kOk : kFound;
    }

    if (*export_cmd) {
      auto inst = load_checked(export_args.instance);
      if (export_out.empty() && export_bundle.empty()) {
        std::cerr << "export: nothing to do; give --out or --bundle\n";
        return kUsage;
      }
      if (!export_bundle.empty()) {
        fs::create_directories(export_bundle);
        write_instance(inst, export_bundle);
      }
      if (!export_out.empty()) {
        auto model = build_model(inst, export_args.options());
        RelaxationConfig rc{parse_mode(export_mode), export_digits, 3};
        ExportOptions eo;
        eo.format = export_format == "lp" ? ExportFormat::lp : ExportFormat::mps;
        eo.sense = export_negate ? ObjectiveSense::negate : ObjectiveSense::max_section;
        write_model(relax(model, rc), export_out, eo);
      }
      return kOk;
    }

    if (*summary) {
      auto inst = load_instance(summary_instance);
      auto c = instance_summary(inst);
      std::cout << "periods " << c.periods << "\n"
                << "streams " << c.streams << "\n"
                << "products " << c.products << "\n"
                << "raw_materials " << c.raw_materials << "\n"
                << "units " << c.units() << "\n";
      for (const auto& [k, n] : c.units_by_kind) std::cout << "  " << to_string(k) << " " << n << "\n";
      std::cout << "secondary_units " << c.secondary_units() << "\n"
                << "batches " << c.batches << "\n"
                << "tracked_qualities " << c.tracked_qualities << "\n"
                << "delta_base_units " << c.delta_base_units << "\n"
                << "storable_streams " << c.storable_streams << "\n";
      auto diags = validate_instance(inst);
      for (const auto& d : diags) std::cout << format(d) << "\n";
      return has_errors(diags) ? kFound : kOk;
    }
  } catch (const BoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFound;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
