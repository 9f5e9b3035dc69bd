#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "refplan/model_ir.hpp"
#include "refplan/validation.hpp"

namespace refplan {

enum class ExportFormat { mps, lp };

/// How the maximization objective is written. `max_section` emits an
/// OBJSENSE MAX section; `negate` writes minimize −objective for readers
/// that ignore OBJSENSE.
enum class ObjectiveSense { max_section, negate };

struct ExportOptions {
  ExportFormat format = ExportFormat::mps;
  ObjectiveSense sense = ObjectiveSense::max_section;
  std::string problem_name = "REFPLAN";
  bool name_map = true;  // write <file>.names.csv next to the model
};

/// Nonlinear model handed to a linear writer, or two entities mangled to
/// the same name.
class ExportError : public Error {
 public:
  using Error::Error;
};

/// Flat names for columns (`<kind>_<idx>..._t<period>`) and rows
/// (`<family>_<idx>...`). Characters other than letters and digits, and
/// the letter x itself, are written as x followed by two hex digits, so
/// the mapping is injective. Names longer than 255 characters are cut and
/// suffixed with a hash.
struct NameMap {
  std::vector<std::string> columns;  // by VarId
  std::vector<std::string> rows;     // by constraint position
  std::string objective = "obj";
};

std::string mangle(const VarKey& key);
std::string mangle(const Constraint& c);
/// Throws ExportError on a collision.
NameMap mangle_names(const AlgebraicModel& model);

/// Model text in the requested format. Columns and rows keep model order,
/// so identical models give identical text. Throws ExportError when the
/// model has bilinear terms.
std::string mps_text(const AlgebraicModel& model, const ExportOptions& opts = {});
std::string lp_text(const AlgebraicModel& model, const ExportOptions& opts = {});

/// Writes the model (and the name map when requested) atomically.
void write_model(const AlgebraicModel& model, const std::filesystem::path& file,
                 const ExportOptions& opts = {});

/// A linear program as read back from an MPS file.
struct MpsModel {
  std::string name;
  bool maximize = false;
  double objective_constant = 0.0;
  std::string objective_row;
  std::vector<std::string> rows;     // constraint rows, file order
  std::vector<char> row_type;        // 'E', 'L' or 'G'
  std::vector<double> rhs;
  std::vector<double> range;         // 0 when absent
  std::vector<std::string> columns;
  std::vector<bool> integer;
  std::vector<double> lo, hi;
  std::vector<double> objective;     // by column
  struct Entry {
    std::size_t row, column;
    double value;
  };
  std::vector<Entry> entries;        // constraint coefficients, file order
};

/// Reads fixed or free MPS (whitespace-separated fields). Throws
/// ParseError with the line number on malformed input.
MpsModel read_mps(const std::filesystem::path& file);
MpsModel parse_mps(const std::string& text, const std::string& source = "<mps>");

/// Counts in the same convention as model_statistics of a linear model.
ModelStatistics mps_statistics(const MpsModel& mps);

/// Columns: kind, index ('|'-joined), period, value. Plan metadata goes
/// into leading '#' lines.
void write_solution(const PlanSolution& plan, const std::filesystem::path& file);
PlanSolution read_solution(const std::filesystem::path& file);
/// As above; rows naming a variable the model lacks raise ParseError with
/// the row's line.
PlanSolution read_solution(const std::filesystem::path& file, const AlgebraicModel& model);

void write_validation_report(const ValidationReport& report, const std::filesystem::path& file);
void write_calibration_report(const CalibrationReport& report, const std::filesystem::path& file);
void write_scenario_report(const ScenarioReport& report, const std::filesystem::path& file);

}  // namespace refplan
