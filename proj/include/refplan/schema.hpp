#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace refplan {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed table content; the message carries "file:line".
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what);
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// A tuple references a set element that was never declared.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

/// A unit is declared under two different kinds.
class UnitKindConflict : public Error {
 public:
  using Error::Error;
};

using Key2 = std::array<std::string, 2>;
using Key3 = std::array<std::string, 3>;
using Key4 = std::array<std::string, 4>;

enum class UnitKind { cdu, fixed_yield, delta_base, mixer, splitter, blender };

enum class QualityClass { spg, volume, weight, percentage };

const char* to_string(UnitKind kind);
const char* to_string(QualityClass cls);

struct Bounds {
  double lo = 0.0;
  double hi = kInf;

  bool ordered() const { return lo <= hi; }
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct Quality {
  QualityClass cls = QualityClass::weight;
  std::string unit;  // opaque, e.g. "%", "ppm", "RON"
  friend bool operator==(const Quality&, const Quality&) = default;
};

/// Name of the specific-gravity quality. Volume conversion divides by it.
inline constexpr const char* kSpg = "SPG";

/// All sets and parameters of one planning instance.
///
/// Tuples are kept as sorted sets of string arrays so iteration order is
/// canonical (by declared name) everywhere downstream.
struct BenchmarkInstance {
  // Sets
  std::vector<std::string> periods;  // T, ordered
  std::set<std::string> streams;     // S
  std::set<std::string> products;    // S_P
  std::set<std::string> raw_materials;  // S_M
  std::map<std::string, UnitKind> units;
  std::set<std::string> proportional_blenders;  // RB
  std::set<Key2> iu;  // (u, s)
  std::set<Key2> ou;  // (u, s)
  std::set<Key3> im;  // (u, m, s)
  std::set<Key3> om;  // (u, m, s)
  std::set<Key4> sc;  // (u, m, s, s''): cut s'' may merge into output s
  std::map<std::string, Quality> qualities;
  std::set<Key2> sq;                  // (s, q) tracked
  std::map<Key2, double> fixed;       // FIX with FQ0
  std::map<Key3, double> transfer;    // QT (s, s', q) -> alpha
  std::set<std::string> crude_controlled;  // CRU
  std::set<Key3> cdu_controlled;           // CDUMQ (u, m, q)
  std::set<Key4> delta_links;              // DBSQ (u, m, s, q)
  std::map<Key4, double> virtual_batches;  // VMQ (u, m, s, q) -> w (1 when absent)
  std::set<std::string> capacities;        // C
  std::set<std::string> capacity_in;       // CAPIN
  std::set<std::string> capacity_out;      // CAPOUT
  std::set<Key2> capacity_streams;         // CAPS (c, s)
  std::set<Key2> composition_streams;      // USP (u, s), stored only
  std::map<Key2, Bounds> feed_composition; // FC (u, s), stored only

  // Parameters
  std::map<Key3, double> crude_quality;      // FQ^CRD (m, s, q)
  std::map<Key4, double> cut_quality;        // FQ^CUT (m, s, s', q)
  std::map<Key4, double> cut_yield;          // y (u, m, s, s')
  std::map<Key4, double> swing_ratio;        // phi (u, m, s, s'')
  std::map<Key3, double> base_yield;         // gamma (u, m, s)
  std::map<Key3, double> base_property;      // B (u, m, q)
  std::map<Key3, double> delta_step;         // Delta (u, m, q)
  std::map<Key4, double> yield_sensitivity;  // delta (u, m, s, q)
  std::map<Key2, double> blend_ratio;        // beta (s, s')
  std::map<std::string, double> initial_inventory;  // L0
  std::map<std::string, double> price_product;      // c^P
  std::map<std::string, double> price_material;     // c^M
  std::map<std::string, double> inventory_price_product;   // ci^P
  std::map<std::string, double> inventory_price_material;  // ci^M

  // Bounds
  std::map<Key2, Bounds> flow_bounds;         // FV (s, t)
  std::map<Key2, Bounds> capacity_bounds;     // FVC (c, t)
  std::map<std::string, Bounds> crude_quality_bounds;  // MFQ (q)
  std::map<Key2, Bounds> quality_bounds;      // FQ (s, q)
  std::map<Key3, Bounds> batch_quality_bounds;  // FQV (u, m, q)
  std::map<Key2, Bounds> blend_spec;          // FQB (u, q)
  std::map<Key2, Bounds> inventory_bounds;    // L (s, t)

  // Derived helpers.
  bool is_unit(const std::string& u, UnitKind kind) const;
  std::vector<std::string> units_of(UnitKind kind) const;
  bool tracked(const std::string& s, const std::string& q) const;
  bool is_fixed(const std::string& s, const std::string& q) const;
  QualityClass quality_class(const std::string& q) const;
  /// Streams with declared inventory bounds.
  bool storable(const std::string& s) const;
  /// Inventory bound for (s, t); zero capacity when undeclared.
  Bounds inventory(const std::string& s, const std::string& t) const;
  /// Flow bound for (s, t); [0, inf) when undeclared.
  Bounds flow(const std::string& s, const std::string& t) const;
  /// Batches of unit u that appear in IM or OM, sorted.
  std::vector<std::string> batches_of(const std::string& u) const;
  std::vector<std::string> inlets(const std::string& u) const;
  std::vector<std::string> outlets(const std::string& u) const;
  std::vector<std::string> batch_inlets(const std::string& u, const std::string& m) const;
  std::vector<std::string> batch_outlets(const std::string& u, const std::string& m) const;

  friend bool operator==(const BenchmarkInstance&, const BenchmarkInstance&) = default;
};

enum class Severity { warning, error };

struct Diagnostic {
  Severity severity = Severity::error;
  std::string locus;  // table or element the diagnostic refers to
  std::string message;
};

std::string format(const Diagnostic& d);
bool has_errors(const std::vector<Diagnostic>& diags);

struct InstanceCounts {
  std::size_t periods = 0;
  std::size_t streams = 0;
  std::size_t products = 0;
  std::size_t raw_materials = 0;
  std::map<UnitKind, std::size_t> units_by_kind;
  std::size_t batches = 0;  // distinct (u, m) pairs
  std::size_t tracked_qualities = 0;  // |SQ|
  std::size_t delta_base_units = 0;
  std::size_t storable_streams = 0;

  std::size_t units() const;
  std::size_t secondary_units() const;  // everything that is not a CDU, mixer, splitter or blender
};

/// Reads a bundle directory. Throws ParseError, ReferenceError or
/// UnitKindConflict. Does not run the semantic checks of validate_instance.
BenchmarkInstance load_instance(const std::filesystem::path& dir);

/// Writes a bundle directory (manifest plus one table per non-empty set or
/// parameter). Existing files of the same names are replaced.
void write_instance(const BenchmarkInstance& inst, const std::filesystem::path& dir);

std::vector<Diagnostic> validate_instance(const BenchmarkInstance& inst);

InstanceCounts instance_summary(const BenchmarkInstance& inst);

}  // namespace refplan
