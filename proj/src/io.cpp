#include "refplan/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "table.hpp"

namespace refplan {

using detail::format_number;

namespace {

constexpr std::size_t kMaxName = 255;

std::string sanitize(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    bool alnum = (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
    if (alnum && c != 'x') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('x');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

std::string limit_length(std::string name) {
  if (name.size() <= kMaxName) return name;
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  name.resize(kMaxName - 18);
  return name + "_h" + buf;
}

// Family names are identifiers already; only the index entries need escaping.
std::string family_part(const std::string& family) {
  std::string out;
  for (char c : family) {
    if (c == '_' || std::isalnum(static_cast<unsigned char>(c))) out.push_back(c);
    else out += sanitize(std::string(1, c));
  }
  return out;
}

struct Column {
  std::vector<std::pair<std::size_t, double>> entries;  // (row position, coefficient)
  double objective = 0.0;
};

std::vector<Column> columns_of(const AlgebraicModel& model) {
  if (!model.is_linear()) throw ExportError("model has bilinear terms; relax it before exporting");
  std::vector<Column> cols(model.variables.size());
  for (const auto& t : model.objective.linear) cols[t.var].objective += t.coef;
  for (std::size_t r = 0; r < model.constraints.size(); ++r) {
    std::map<VarId, double> merged;
    for (const auto& t : model.constraints[r].expr.linear) merged[t.var] += t.coef;
    for (const auto& [j, v] : merged)
      if (v != 0.0) cols[j].entries.push_back({r, v});
  }
  return cols;
}

// Fixed-field layout where names fit; longer names push the following
// fields right, which free-format readers accept.
class MpsLine {
 public:
  explicit MpsLine(std::ostringstream& os) : os_(os) {}
  void emit(const std::string& f1, const std::string& f2, const std::string& f3 = "",
            const std::string& f4 = "") {
    std::string line = " " + f1;
    pad(line, 4);
    line += f2;
    if (!f3.empty()) {
      pad(line, 14);
      line += f3;
      pad(line, 24);
      line += f4;
    }
    os_ << line << '\n';
  }

 private:
  static void pad(std::string& line, std::size_t col) {
    if (line.size() < col) line.resize(col, ' ');
    else line.push_back(' ');
  }
  std::ostringstream& os_;
};

double objective_sign(const ExportOptions& opts) {
  return opts.sense == ObjectiveSense::negate ? -1.0 : 1.0;
}

char row_letter(Sense s) {
  switch (s) {
    case Sense::eq: return 'E';
    case Sense::le: return 'L';
    case Sense::ge: return 'G';
  }
  return 'E';
}

}  // namespace

std::string mangle(const VarKey& key) {
  std::string out = to_string(key.kind);
  for (const auto& i : key.index) out += "_" + sanitize(i);
  if (!key.period.empty()) out += "_t" + sanitize(key.period);
  return limit_length(std::move(out));
}

std::string mangle(const Constraint& c) {
  std::string out = family_part(c.family);
  for (const auto& i : c.index) out += "_" + sanitize(i);
  return limit_length(std::move(out));
}

NameMap mangle_names(const AlgebraicModel& model) {
  NameMap names;
  std::unordered_map<std::string, std::string> seen{{names.objective, "objective"}};
  auto claim = [&](const std::string& name, const std::string& original) {
    auto [it, fresh] = seen.emplace(name, original);
    if (!fresh)
      throw ExportError("name collision: '" + original + "' and '" + it->second + "' both map to '" +
                        name + "'");
  };
  names.columns.reserve(model.variables.size());
  for (const auto& v : model.variables) {
    names.columns.push_back(mangle(v.key));
    claim(names.columns.back(), to_string(v.key));
  }
  names.rows.reserve(model.constraints.size());
  for (const auto& c : model.constraints) {
    names.rows.push_back(mangle(c));
    claim(names.rows.back(), c.id());
  }
  return names;
}

std::string mps_text(const AlgebraicModel& model, const ExportOptions& opts) {
  auto cols = columns_of(model);
  auto names = mangle_names(model);
  double sign = objective_sign(opts);
  std::ostringstream os;
  MpsLine line(os);

  os << "NAME          " << opts.problem_name << '\n';
  if (opts.sense == ObjectiveSense::max_section) os << "OBJSENSE\n    MAX\n";
  os << "ROWS\n";
  line.emit("N", names.objective);
  for (std::size_t r = 0; r < model.constraints.size(); ++r)
    line.emit(std::string(1, row_letter(model.constraints[r].sense)), names.rows[r]);

  os << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (VarId j = 0; j < cols.size(); ++j) {
    bool integer = model.variables[j].integer;
    if (integer != in_int) {
      line.emit("", "MARKER" + std::to_string(marker++), "'MARKER'", integer ? "'INTORG'" : "'INTEND'");
      in_int = integer;
    }
    const auto& name = names.columns[j];
    if (cols[j].objective != 0.0)
      line.emit("", name, names.objective, format_number(sign * cols[j].objective));
    for (const auto& [r, v] : cols[j].entries) line.emit("", name, names.rows[r], format_number(v));
    if (cols[j].objective == 0.0 && cols[j].entries.empty())
      line.emit("", name, names.objective, "0");
  }
  if (in_int) line.emit("", "MARKER" + std::to_string(marker), "'MARKER'", "'INTEND'");

  os << "RHS\n";
  if (model.objective.constant != 0.0)
    line.emit("", "RHS", names.objective, format_number(-sign * model.objective.constant));
  for (std::size_t r = 0; r < model.constraints.size(); ++r) {
    double rhs = -model.constraints[r].expr.constant;
    if (rhs != 0.0) line.emit("", "RHS", names.rows[r], format_number(rhs));
  }

  os << "BOUNDS\n";
  for (VarId j = 0; j < cols.size(); ++j) {
    const auto& v = model.variables[j];
    const auto& name = names.columns[j];
    if (v.lo == v.hi) {
      line.emit("FX", "BND", name, format_number(v.lo));
      continue;
    }
    if (v.lo == -kInf && v.hi == kInf) {
      line.emit("FR", "BND", name);
      continue;
    }
    if (v.lo == -kInf) line.emit("MI", "BND", name);
    else if (v.lo != 0.0 || v.hi < 0.0) line.emit("LO", "BND", name, format_number(v.lo));
    if (v.hi != kInf) line.emit("UP", "BND", name, format_number(v.hi));
    else if (v.integer) line.emit("PL", "BND", name);
  }
  os << "ENDATA\n";
  return os.str();
}

std::string lp_text(const AlgebraicModel& model, const ExportOptions& opts) {
  auto cols = columns_of(model);
  auto names = mangle_names(model);
  double sign = objective_sign(opts);
  std::ostringstream os;

  // Terms wrapped well below the usual 510-character line limit.
  auto write_terms = [&](std::string line, const std::vector<std::pair<VarId, double>>& terms) {
    bool first = true;
    for (const auto& [j, v] : terms) {
      std::string term = (v < 0 ? "- " : (first ? "" : "+ ")) + format_number(std::abs(v)) + " " +
                         names.columns[j];
      if (line.size() + term.size() > 200) {
        os << line << '\n';
        line = "   ";
      }
      line += " " + term;
      first = false;
    }
    if (terms.empty()) line += " 0 " + (names.columns.empty() ? std::string("dummy") : names.columns[0]);
    os << line;
  };

  os << "\\ " << opts.problem_name << '\n';
  os << (opts.sense == ObjectiveSense::max_section ? "Maximize\n" : "Minimize\n");
  std::vector<std::pair<VarId, double>> obj;
  for (VarId j = 0; j < cols.size(); ++j)
    if (cols[j].objective != 0.0) obj.push_back({j, sign * cols[j].objective});
  write_terms(" " + names.objective + ":", obj);
  if (model.objective.constant != 0.0) {
    double c = sign * model.objective.constant;
    os << (c < 0 ? " - " : " + ") << format_number(std::abs(c));
  }
  os << "\nSubject To\n";

  std::vector<std::vector<std::pair<VarId, double>>> rows(model.constraints.size());
  for (VarId j = 0; j < cols.size(); ++j)
    for (const auto& [r, v] : cols[j].entries) rows[r].push_back({j, v});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& c = model.constraints[r];
    write_terms(" " + names.rows[r] + ":", rows[r]);
    const char* op = c.sense == Sense::eq ? " = " : (c.sense == Sense::le ? " <= " : " >= ");
    os << op << format_number(-c.expr.constant) << '\n';
  }

  os << "Bounds\n";
  for (VarId j = 0; j < cols.size(); ++j) {
    const auto& v = model.variables[j];
    const auto& name = names.columns[j];
    if (v.lo == v.hi) os << ' ' << name << " = " << format_number(v.lo) << '\n';
    else if (v.lo == -kInf && v.hi == kInf) os << ' ' << name << " free\n";
    else if (v.lo == 0.0 && v.hi == kInf) continue;
    else
      os << ' ' << (v.lo == -kInf ? "-inf" : format_number(v.lo)) << " <= " << name << " <= "
         << (v.hi == kInf ? "+inf" : format_number(v.hi)) << '\n';
  }
  bool any_int = false;
  for (VarId j = 0; j < cols.size(); ++j) {
    if (!model.variables[j].integer) continue;
    if (!any_int) os << "General\n";
    any_int = true;
    os << ' ' << names.columns[j] << '\n';
  }
  os << "End\n";
  return os.str();
}

void write_model(const AlgebraicModel& model, const std::filesystem::path& file,
                 const ExportOptions& opts) {
  std::string text = opts.format == ExportFormat::mps ? mps_text(model, opts) : lp_text(model, opts);
  detail::write_text_atomic(file, text);
  if (!opts.name_map) return;
  auto names = mangle_names(model);
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"objective", names.objective, "objective"});
  for (VarId j = 0; j < names.columns.size(); ++j)
    rows.push_back({"column", names.columns[j], to_string(model.variables[j].key)});
  for (std::size_t r = 0; r < names.rows.size(); ++r)
    rows.push_back({"row", names.rows[r], model.constraints[r].id()});
  auto map_file = file;
  map_file += ".names.csv";
  detail::write_table(map_file, {"entity", "name", "original"}, rows);
}

// ---------------------------------------------------------------------------
// MPS reader

MpsModel parse_mps(const std::string& text, const std::string& source) {
  MpsModel m;
  enum class Section { none, name, objsense, rows, columns, rhs, ranges, bounds, done };
  Section section = Section::none;
  std::unordered_map<std::string, std::size_t> row_pos, col_pos;
  std::vector<bool> lo_set;
  bool in_int = false;
  bool have_objective = false;

  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> ParseError { return ParseError(source, lineno, what); };
  auto number = [&](const std::string& s) { return detail::parse_number(s, source, lineno); };
  auto row_of = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = row_pos.find(name);
    if (it == row_pos.end()) throw fail("unknown row '" + name + "'");
    if (it->second == static_cast<std::size_t>(-1)) return std::nullopt;  // objective
    return it->second;
  };
  auto column_of = [&](const std::string& name) -> std::size_t {
    auto it = col_pos.find(name);
    if (it == col_pos.end()) throw fail("unknown column '" + name + "'");
    return it->second;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty() || raw[0] == '*') continue;
    std::istringstream fields(raw);
    std::vector<std::string> f;
    for (std::string w; fields >> w;) f.push_back(w);
    if (f.empty()) continue;

    if (raw[0] != ' ' && raw[0] != '\t') {
      const auto& head = f[0];
      if (head == "NAME") {
        section = Section::name;
        if (f.size() > 1) m.name = f[1];
      } else if (head == "OBJSENSE") {
        section = Section::objsense;
        if (f.size() > 1) m.maximize = f[1] == "MAX" || f[1] == "MAXIMIZE";
      } else if (head == "ROWS") {
        section = Section::rows;
      } else if (head == "COLUMNS") {
        section = Section::columns;
      } else if (head == "RHS") {
        section = Section::rhs;
      } else if (head == "RANGES") {
        section = Section::ranges;
      } else if (head == "BOUNDS") {
        section = Section::bounds;
      } else if (head == "ENDATA") {
        section = Section::done;
        break;
      } else {
        throw fail("unknown section '" + head + "'");
      }
      continue;
    }

    switch (section) {
      case Section::objsense:
        m.maximize = f[0] == "MAX" || f[0] == "MAXIMIZE";
        break;
      case Section::rows: {
        if (f.size() != 2) throw fail("ROWS entry needs a type and a name");
        char type = f[0].size() == 1 ? f[0][0] : '?';
        if (type == 'N') {
          if (have_objective) break;  // further free rows are ignored
          have_objective = true;
          m.objective_row = f[1];
          row_pos[f[1]] = static_cast<std::size_t>(-1);
        } else if (type == 'E' || type == 'L' || type == 'G') {
          if (!row_pos.emplace(f[1], m.rows.size()).second) throw fail("duplicate row '" + f[1] + "'");
          m.rows.push_back(f[1]);
          m.row_type.push_back(type);
          m.rhs.push_back(0.0);
          m.range.push_back(0.0);
        } else {
          throw fail("bad row type '" + f[0] + "'");
        }
        break;
      }
      case Section::columns: {
        if (f.size() >= 3 && f[1] == "'MARKER'") {
          if (f[2] == "'INTORG'") in_int = true;
          else if (f[2] == "'INTEND'") in_int = false;
          else throw fail("bad marker '" + f[2] + "'");
          break;
        }
        if (f.size() != 3 && f.size() != 5) throw fail("COLUMNS entry needs 3 or 5 fields");
        auto it = col_pos.find(f[0]);
        std::size_t j;
        if (it == col_pos.end()) {
          j = m.columns.size();
          col_pos.emplace(f[0], j);
          m.columns.push_back(f[0]);
          m.integer.push_back(in_int);
          m.lo.push_back(0.0);
          m.hi.push_back(kInf);
          m.objective.push_back(0.0);
          lo_set.push_back(false);
        } else {
          j = it->second;
          if (j + 1 != m.columns.size()) throw fail("entries of column '" + f[0] + "' are not contiguous");
        }
        for (std::size_t k = 1; k + 1 < f.size(); k += 2) {
          double v = number(f[k + 1]);
          auto r = row_of(f[k]);
          if (!r) m.objective[j] += v;
          else if (v != 0.0) m.entries.push_back({*r, j, v});
        }
        break;
      }
      case Section::rhs:
      case Section::ranges: {
        // The set name is optional when the entry has an even field count.
        std::size_t first = f.size() % 2 == 0 ? 0 : 1;
        if (f.size() < 2) throw fail("entry needs a row and a value");
        for (std::size_t k = first; k + 1 < f.size(); k += 2) {
          double v = number(f[k + 1]);
          auto r = row_of(f[k]);
          if (section == Section::rhs) {
            if (!r) m.objective_constant = -v;
            else m.rhs[*r] = v;
          } else {
            if (!r) throw fail("range on the objective row");
            m.range[*r] = v;
          }
        }
        break;
      }
      case Section::bounds: {
        const auto& type = f[0];
        bool valueless = type == "FR" || type == "MI" || type == "PL" || type == "BV";
        // The bound set name is optional.
        std::size_t need = valueless ? 2 : 3;
        if (f.size() < need || f.size() > need + 1) throw fail("malformed BOUNDS entry");
        const auto& col = f.size() == need + 1 ? f[2] : f[1];
        std::size_t j = column_of(col);
        double v = valueless ? 0.0 : number(f.back());
        if (type == "UP") {
          m.hi[j] = v;
          if (v < 0.0 && !lo_set[j]) m.lo[j] = -kInf;
        } else if (type == "LO") {
          m.lo[j] = v;
          lo_set[j] = true;
        } else if (type == "FX") {
          m.lo[j] = m.hi[j] = v;
          lo_set[j] = true;
        } else if (type == "FR") {
          m.lo[j] = -kInf;
          m.hi[j] = kInf;
        } else if (type == "MI") {
          m.lo[j] = -kInf;
          lo_set[j] = true;
        } else if (type == "PL") {
          m.hi[j] = kInf;
        } else if (type == "BV") {
          m.integer[j] = true;
          m.lo[j] = 0.0;
          m.hi[j] = 1.0;
        } else if (type == "LI" || type == "UI") {
          m.integer[j] = true;
          (type == "LI" ? m.lo[j] : m.hi[j]) = v;
        } else {
          throw fail("bad bound type '" + type + "'");
        }
        break;
      }
      default:
        throw fail("data outside a section");
    }
  }
  if (section != Section::done) throw ParseError(source, lineno, "missing ENDATA");
  if (!have_objective) throw ParseError(source, lineno, "no objective row");
  return m;
}

MpsModel read_mps(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError(file.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_mps(ss.str(), file.string());
}

ModelStatistics mps_statistics(const MpsModel& mps) {
  ModelStatistics s;
  s.total_variables = mps.columns.size();
  for (bool b : mps.integer)
    if (b) ++s.binary_variables;
  s.total_constraints = mps.rows.size();
  std::vector<bool> used(mps.rows.size(), false);
  for (const auto& e : mps.entries) used[e.row] = true;
  for (bool u : used)
    if (!u) ++s.vacuous_constraints;
  return s;
}

// ---------------------------------------------------------------------------
// Solutions and reports

namespace {

// Elements are joined by '|'. A bar or backslash inside an element is
// preceded by a backslash.
std::string join_index(const std::vector<std::string>& index) {
  std::string out;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (i) out += '|';
    for (char ch : index[i]) {
      if (ch == '|' || ch == '\\') out += '\\';
      out += ch;
    }
  }
  return out;
}

std::vector<std::string> split_index(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  out.emplace_back();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) out.back() += s[++i];
    else if (s[i] == '|') out.emplace_back();
    else out.back() += s[i];
  }
  return out;
}

PlanSolution read_solution_impl(const std::filesystem::path& file, const AlgebraicModel* model) {
  auto t = detail::read_table(file, ',', true);
  auto ck = t.require("kind"), ci = t.require("index"), cp = t.require("period"), cv = t.require("value");
  PlanSolution plan;
  for (const auto& c : t.comments) {
    auto colon = c.find(':');
    if (colon == std::string::npos) continue;
    auto key = detail::trim(std::string_view(c).substr(0, colon));
    auto value = detail::trim(std::string_view(c).substr(colon + 1));
    if (key == "source") plan.source = value;
    else if (key == "solver") plan.solver = value;
    else if (key == "timestamp") plan.timestamp = value;
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto kind = var_kind_from_string(row[ck]);
    if (!kind) throw ParseError(file.string(), t.lines[r], "unknown variable kind '" + row[ck] + "'");
    VarKey key{*kind, split_index(row[ci]), row[cp]};
    if (model && !model->find(key))
      throw ParseError(file.string(), t.lines[r], "unknown variable " + to_string(key));
    double v = detail::parse_number(row[cv], file, t.lines[r]);
    if (!plan.values.emplace(key, v).second)
      throw ParseError(file.string(), t.lines[r], "duplicate variable " + to_string(key));
  }
  return plan;
}

}  // namespace

void write_solution(const PlanSolution& plan, const std::filesystem::path& file) {
  std::vector<std::string> comments;
  if (!plan.source.empty()) comments.push_back("source: " + plan.source);
  if (!plan.solver.empty()) comments.push_back("solver: " + plan.solver);
  if (!plan.timestamp.empty()) comments.push_back("timestamp: " + plan.timestamp);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(plan.values.size());
  for (const auto& [k, v] : plan.values)
    rows.push_back({to_string(k.kind), join_index(k.index), k.period, format_number(v)});
  detail::write_table(file, {"kind", "index", "period", "value"}, rows, ',', comments);
}

PlanSolution read_solution(const std::filesystem::path& file) { return read_solution_impl(file, nullptr); }

PlanSolution read_solution(const std::filesystem::path& file, const AlgebraicModel& model) {
  return read_solution_impl(file, &model);
}

void write_validation_report(const ValidationReport& report, const std::filesystem::path& file) {
  std::vector<std::string> comments = {
      "tolerance: " + format_number(report.tolerance),
      "feasible: " + std::string(report.feasible() ? "yes" : "no"),
      "violations: " + std::to_string(report.violations.size()),
      "skipped_pools: " + std::to_string(report.skipped_pools),
      "revenue: " + format_number(report.profit.revenue),
      "material_cost: " + format_number(report.profit.material_cost),
      "product_inventory: " + format_number(report.profit.product_inventory),
      "material_inventory: " + format_number(report.profit.material_inventory),
      "profit: " + format_number(report.profit.total()),
  };
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.residuals)
    rows.push_back({r.id, r.family, format_number(r.magnitude), format_number(r.relative),
                    r.relative > report.tolerance ? "1" : "0"});
  detail::write_table(file, {"row", "family", "magnitude", "relative", "violated"}, rows, ',', comments);
}

void write_calibration_report(const CalibrationReport& report, const std::filesystem::path& file) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : report.entries)
    for (const auto& f : e.flows) {
      auto y = e.yields.find(f.stream);
      rows.push_back({e.unit, e.batch, e.period, f.stream,
                      y == e.yields.end() ? "" : format_number(y->second), format_number(f.fixed),
                      format_number(f.calibrated), format_number(f.delta())});
    }
  detail::write_table(file,
                      {"unit", "batch", "period", "stream", "yield", "fixed", "calibrated", "delta"},
                      rows);
}

void write_scenario_report(const ScenarioReport& report, const std::filesystem::path& file) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : report.tagged)
    rows.push_back({to_string(t.scenario), t.violation.id, t.violation.family,
                    format_number(t.violation.magnitude), format_number(t.violation.relative)});
  for (const auto& r : report.unclassified)
    rows.push_back({"unclassified", r.id, r.family, format_number(r.magnitude), format_number(r.relative)});
  detail::write_table(file, {"scenario", "row", "family", "magnitude", "relative"}, rows);
}

}  // namespace refplan
