// Python bindings: instances, models, relaxations, solves and plan checks.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "refplan/formulation.hpp"
#include "refplan/io.hpp"
#include "refplan/relaxation.hpp"
#include "refplan/schema.hpp"
#include "refplan/solver.hpp"
#include "refplan/validation.hpp"
#include "refplan/workflow.hpp"

namespace py = pybind11;
using namespace refplan;

namespace {

py::dict stats_dict(const ModelStatistics& s) {
  py::dict d;
  d["variables"] = s.total_variables;
  d["binaries"] = s.binary_variables;
  d["constraints"] = s.total_constraints;
  d["nonlinear_elements"] = s.nonlinear_elements;
  d["bilinear_terms"] = s.bilinear_terms;
  return d;
}

py::tuple key_tuple(const VarKey& k) {
  return py::make_tuple(to_string(k.kind), py::tuple(py::cast(k.index)), k.period);
}

VarKey key_from(const py::tuple& t) {
  if (t.size() != 3) throw py::value_error("variable key must be (kind, index, period)");
  auto name = t[0].cast<std::string>();
  auto kind = var_kind_from_string(name);
  if (!kind) throw py::value_error("unknown variable kind '" + name + "'");
  return {*kind, t[1].cast<std::vector<std::string>>(), t[2].cast<std::string>()};
}

py::dict result_dict(const SolveResult& r) {
  py::dict d;
  d["status"] = to_string(r.status);
  d["objective"] = r.objective;
  d["bound"] = r.bound;
  d["values"] = r.values;
  d["nodes"] = r.nodes;
  d["iterations"] = r.iterations;
  d["seconds"] = r.seconds;
  return d;
}

py::list residual_list(const std::vector<Residual>& rs) {
  py::list out;
  for (const auto& r : rs) {
    py::dict d;
    d["id"] = r.id;
    d["family"] = r.family;
    d["magnitude"] = r.magnitude;
    d["relative"] = r.relative;
    out.append(d);
  }
  return out;
}

py::dict report_dict(const ValidationReport& rep) {
  py::dict d;
  d["feasible"] = rep.feasible();
  d["tolerance"] = rep.tolerance;
  d["violations"] = residual_list(rep.violations);
  d["rows_checked"] = rep.residuals.size();
  d["profit"] = rep.profit.total();
  return d;
}

BuildOptions build_options(bool delta_base, std::optional<std::size_t> horizon, bool inventory_binaries) {
  BuildOptions o;
  o.delta_base = delta_base;
  o.horizon = horizon;
  o.inventory_binaries = inventory_binaries;
  return o;
}

RelaxationMode relaxation_mode(const std::string& mode) {
  if (mode == "mccormick") return RelaxationMode::mccormick;
  if (mode == "nmdt") return RelaxationMode::nmdt;
  throw py::value_error("mode must be 'mccormick' or 'nmdt'");
}

}  // namespace

PYBIND11_MODULE(_refplan, m) {
  m.doc() = "Refinery planning model builder, relaxations, solvers and plan checker";

  auto base = py::register_exception<Error>(m, "RefplanError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ModelError>(m, "ModelError", base.ptr());
  py::register_exception<BoundError>(m, "BoundError", base.ptr());
  py::register_exception<MissingVariableError>(m, "MissingVariableError", base.ptr());

  py::class_<BenchmarkInstance>(m, "Instance")
      .def_readonly("periods", &BenchmarkInstance::periods)
      .def_property_readonly("streams",
                             [](const BenchmarkInstance& i) { return std::vector<std::string>(i.streams.begin(), i.streams.end()); })
      .def_property_readonly("units",
                             [](const BenchmarkInstance& i) {
                               std::map<std::string, std::string> out;
                               for (const auto& [u, k] : i.units) out[u] = to_string(k);
                               return out;
                             })
      .def("summary",
           [](const BenchmarkInstance& i) {
             auto c = instance_summary(i);
             py::dict d;
             d["periods"] = c.periods;
             d["streams"] = c.streams;
             d["products"] = c.products;
             d["raw_materials"] = c.raw_materials;
             d["units"] = c.units();
             d["batches"] = c.batches;
             d["tracked_qualities"] = c.tracked_qualities;
             return d;
           })
      .def("diagnostics", [](const BenchmarkInstance& i) {
        std::vector<std::string> out;
        for (const auto& d : validate_instance(i)) out.push_back(format(d));
        return out;
      });

  m.def("load_instance", &load_instance, py::arg("path"), "Read an instance bundle directory.");
  m.def("write_instance", &write_instance, py::arg("instance"), py::arg("path"));

  py::class_<AlgebraicModel>(m, "Model")
      .def_property_readonly("num_variables", [](const AlgebraicModel& a) { return a.variables.size(); })
      .def_property_readonly("num_constraints", [](const AlgebraicModel& a) { return a.constraints.size(); })
      .def_property_readonly("is_linear", &AlgebraicModel::is_linear)
      .def("statistics", [](const AlgebraicModel& a) { return stats_dict(model_statistics(a)); })
      .def("variable_keys",
           [](const AlgebraicModel& a) {
             py::list out;
             for (const auto& v : a.variables) out.append(key_tuple(v.key));
             return out;
           })
      .def("max_violation", &max_relative_violation, py::arg("values"));

  m.def(
      "build_model",
      [](const BenchmarkInstance& inst, bool delta_base, std::optional<std::size_t> horizon,
         bool inventory_binaries) { return build_model(inst, build_options(delta_base, horizon, inventory_binaries)); },
      py::arg("instance"), py::arg("delta_base") = true, py::arg("horizon") = py::none(),
      py::arg("inventory_binaries") = true);

  m.def(
      "relax",
      [](const AlgebraicModel& model, const std::string& mode, int digits, int bound_passes) {
        return relax(model, {relaxation_mode(mode), digits, bound_passes});
      },
      py::arg("model"), py::arg("mode") = "mccormick", py::arg("digits") = 1, py::arg("bound_passes") = 3);

  m.def(
      "solve_lp", [](const AlgebraicModel& model, double time_limit) {
        SolveConfig cfg;
        cfg.time_limit = time_limit;
        SolveResult r;
        {
          py::gil_scoped_release release;
          r = solve_lp(model, cfg);
        }
        return result_dict(r);
      },
      py::arg("model"), py::arg("time_limit") = kInf);

  m.def(
      "branch_and_bound",
      [](const AlgebraicModel& model, double time_limit, double gap) {
        SolveConfig cfg;
        cfg.time_limit = time_limit;
        cfg.gap = gap;
        SolveResult r;
        {
          py::gil_scoped_release release;
          r = branch_and_bound(model, cfg);
        }
        return result_dict(r);
      },
      py::arg("model"), py::arg("time_limit") = kInf, py::arg("gap") = 1e-4);

  m.def(
      "export_model",
      [](const AlgebraicModel& model, const std::filesystem::path& path, const std::string& format, bool negate) {
        ExportOptions o;
        if (format == "lp") o.format = ExportFormat::lp;
        else if (format != "mps") throw py::value_error("format must be 'mps' or 'lp'");
        o.sense = negate ? ObjectiveSense::negate : ObjectiveSense::max_section;
        write_model(model, path, o);
      },
      py::arg("model"), py::arg("path"), py::arg("format") = "mps", py::arg("negate") = false);

  py::class_<PlanSolution>(m, "Plan")
      .def(py::init<>())
      .def_readwrite("source", &PlanSolution::source)
      .def_readwrite("solver", &PlanSolution::solver)
      .def("__len__", [](const PlanSolution& p) { return p.values.size(); })
      .def("__getitem__", [](const PlanSolution& p, const py::tuple& k) { return p.at(key_from(k)); })
      .def("__setitem__", [](PlanSolution& p, const py::tuple& k, double v) { p.set(key_from(k), v); })
      .def("items",
           [](const PlanSolution& p) {
             py::list out;
             for (const auto& [k, v] : p.values) out.append(py::make_tuple(key_tuple(k), v));
             return out;
           })
      .def("write", [](const PlanSolution& p, const std::filesystem::path& path) { write_solution(p, path); });

  m.def("read_solution", py::overload_cast<const std::filesystem::path&>(&read_solution), py::arg("path"));

  m.def(
      "solve",
      [](const BenchmarkInstance& inst, const std::string& method, double time_limit, const std::string& mode,
         int digits, bool delta_base) {
        WorkflowOptions o;
        if (method == "slp") o.method = SolveMethod::slp;
        else if (method != "bb") throw py::value_error("method must be 'bb' or 'slp'");
        o.solve.time_limit = time_limit;
        o.relaxation.mode = relaxation_mode(mode);
        o.relaxation.digits = digits;
        o.build.delta_base = delta_base;
        WorkflowResult r;
        {
          py::gil_scoped_release release;
          r = solve_instance(inst, o);
        }
        py::dict d;
        d["plan"] = r.plan;
        d["objective"] = r.objective;
        d["bound"] = r.bound;
        d["relaxation_status"] = to_string(r.relaxation_status);
        d["slp_status"] = to_string(r.slp.status);
        d["report"] = report_dict(r.report);
        return d;
      },
      py::arg("instance"), py::arg("method") = "bb", py::arg("time_limit") = kInf, py::arg("mode") = "mccormick",
      py::arg("digits") = 1, py::arg("delta_base") = true);

  m.def(
      "check_solution",
      [](const BenchmarkInstance& inst, const PlanSolution& plan, double tol, bool delta_base) {
        BuildOptions o;
        o.delta_base = delta_base;
        return report_dict(check_solution(inst, plan, tol, o));
      },
      py::arg("instance"), py::arg("plan"), py::arg("tol") = 1e-6, py::arg("delta_base") = true);

  m.def(
      "calibrate",
      [](const BenchmarkInstance& inst, const PlanSolution& plan) {
        py::list out;
        for (const auto& e : calibrate_yields(inst, plan).entries) {
          for (const auto& f : e.flows) {
            py::dict d;
            d["unit"] = e.unit;
            d["batch"] = e.batch;
            d["period"] = e.period;
            d["stream"] = f.stream;
            d["fixed"] = f.fixed;
            d["calibrated"] = f.calibrated;
            out.append(d);
          }
        }
        return out;
      },
      py::arg("instance"), py::arg("plan"));
}
