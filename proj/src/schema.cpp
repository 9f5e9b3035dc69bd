#include "refplan/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "table.hpp"

namespace refplan {

namespace fs = std::filesystem;
using detail::format_number;
using detail::parse_number;
using detail::read_table;
using detail::Table;

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

const char* to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::cdu: return "CDU";
    case UnitKind::fixed_yield: return "PF";
    case UnitKind::delta_base: return "PD";
    case UnitKind::mixer: return "MIX";
    case UnitKind::splitter: return "SPL";
    case UnitKind::blender: return "BLD";
  }
  return "?";
}

const char* to_string(QualityClass cls) {
  switch (cls) {
    case QualityClass::spg: return "SPG";
    case QualityClass::volume: return "V";
    case QualityClass::weight: return "W";
    case QualityClass::percentage: return "P";
  }
  return "?";
}

bool BenchmarkInstance::is_unit(const std::string& u, UnitKind kind) const {
  auto it = units.find(u);
  return it != units.end() && it->second == kind;
}

std::vector<std::string> BenchmarkInstance::units_of(UnitKind kind) const {
  std::vector<std::string> out;
  for (const auto& [u, k] : units)
    if (k == kind) out.push_back(u);
  return out;
}

bool BenchmarkInstance::tracked(const std::string& s, const std::string& q) const {
  Key2 k{s, q};
  return sq.count(k) || fixed.count(k);
}

bool BenchmarkInstance::is_fixed(const std::string& s, const std::string& q) const {
  return fixed.count(Key2{s, q}) > 0;
}

QualityClass BenchmarkInstance::quality_class(const std::string& q) const {
  auto it = qualities.find(q);
  if (it != qualities.end()) return it->second.cls;
  return q == kSpg ? QualityClass::spg : QualityClass::weight;
}

bool BenchmarkInstance::storable(const std::string& s) const {
  auto it = inventory_bounds.lower_bound(Key2{s, ""});
  return it != inventory_bounds.end() && it->first[0] == s;
}

Bounds BenchmarkInstance::inventory(const std::string& s, const std::string& t) const {
  auto it = inventory_bounds.find(Key2{s, t});
  return it == inventory_bounds.end() ? Bounds{0.0, 0.0} : it->second;
}

Bounds BenchmarkInstance::flow(const std::string& s, const std::string& t) const {
  auto it = flow_bounds.find(Key2{s, t});
  return it == flow_bounds.end() ? Bounds{0.0, kInf} : it->second;
}

std::vector<std::string> BenchmarkInstance::batches_of(const std::string& u) const {
  std::set<std::string> out;
  for (auto it = im.lower_bound(Key3{u, "", ""}); it != im.end() && (*it)[0] == u; ++it)
    out.insert((*it)[1]);
  for (auto it = om.lower_bound(Key3{u, "", ""}); it != om.end() && (*it)[0] == u; ++it)
    out.insert((*it)[1]);
  return {out.begin(), out.end()};
}

std::vector<std::string> BenchmarkInstance::inlets(const std::string& u) const {
  std::vector<std::string> out;
  for (auto it = iu.lower_bound(Key2{u, ""}); it != iu.end() && (*it)[0] == u; ++it)
    out.push_back((*it)[1]);
  return out;
}

std::vector<std::string> BenchmarkInstance::outlets(const std::string& u) const {
  std::vector<std::string> out;
  for (auto it = ou.lower_bound(Key2{u, ""}); it != ou.end() && (*it)[0] == u; ++it)
    out.push_back((*it)[1]);
  return out;
}

std::vector<std::string> BenchmarkInstance::batch_inlets(const std::string& u,
                                                         const std::string& m) const {
  std::vector<std::string> out;
  for (auto it = im.lower_bound(Key3{u, m, ""}); it != im.end() && (*it)[0] == u && (*it)[1] == m;
       ++it)
    out.push_back((*it)[2]);
  return out;
}

std::vector<std::string> BenchmarkInstance::batch_outlets(const std::string& u,
                                                          const std::string& m) const {
  std::vector<std::string> out;
  for (auto it = om.lower_bound(Key3{u, m, ""}); it != om.end() && (*it)[0] == u && (*it)[1] == m;
       ++it)
    out.push_back((*it)[2]);
  return out;
}

std::string format(const Diagnostic& d) {
  return std::string(d.severity == Severity::error ? "error" : "warning") + " [" + d.locus +
         "] " + d.message;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::error; });
}

std::size_t InstanceCounts::units() const {
  std::size_t n = 0;
  for (const auto& [k, c] : units_by_kind) n += c;
  return n;
}

std::size_t InstanceCounts::secondary_units() const {
  auto get = [&](UnitKind k) {
    auto it = units_by_kind.find(k);
    return it == units_by_kind.end() ? std::size_t{0} : it->second;
  };
  return get(UnitKind::fixed_yield) + get(UnitKind::delta_base);
}

// ---------------------------------------------------------------------------
// Bundle reader

namespace {

const std::vector<std::pair<std::string, UnitKind>> kUnitTables = {
    {"U_CDU", UnitKind::cdu},   {"U_PF", UnitKind::fixed_yield}, {"U_PD", UnitKind::delta_base},
    {"U_MIX", UnitKind::mixer}, {"U_SPL", UnitKind::splitter},   {"U_BLD", UnitKind::blender},
};

const std::vector<std::pair<std::string, QualityClass>> kQualityTables = {
    {"Q_V", QualityClass::volume},
    {"Q_W", QualityClass::weight},
    {"Q_P", QualityClass::percentage},
};

// Default file name of each table in a written bundle. Two symbols differ
// only in case, so their files get distinct stems.
std::string default_file(const std::string& table) {
  if (table == "Delta") return "Delta_step.csv";
  if (table == "delta") return "delta_yield.csv";
  return table + ".csv";
}

class BundleReader {
 public:
  explicit BundleReader(fs::path dir) : dir_(std::move(dir)) {
    auto manifest = dir_ / "manifest.csv";
    if (!fs::exists(manifest)) throw ParseError(manifest.string(), 0, "bundle has no manifest");
    Table t = read_table(manifest);
    auto tc = t.require("table");
    auto fc = t.require("file");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto& name = t.rows[i][tc];
      if (files_.count(name))
        throw ParseError(manifest.string(), t.lines[i], "table '" + name + "' listed twice");
      files_[name] = dir_ / t.rows[i][fc];
    }
  }

  BenchmarkInstance read() {
    BenchmarkInstance inst;
    read_sets(inst);
    read_incidence(inst);
    read_parameters(inst);
    read_bounds(inst);
    for (const auto& [name, file] : files_)
      if (!used_.count(name))
        throw ParseError((dir_ / "manifest.csv").string(), 0, "unknown table '" + name + "'");
    return inst;
  }

 private:
  using Row = const std::vector<std::string>&;
  using RowFn = std::function<void(Row, const fs::path&, std::size_t)>;

  void each(const std::string& name, const std::vector<std::string>& cols, const RowFn& fn,
            const std::vector<std::string>& optional_cols = {}) {
    used_.insert(name);
    auto it = files_.find(name);
    if (it == files_.end()) return;
    Table t = read_table(it->second);
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(t.require(c));
    std::vector<std::optional<std::size_t>> opt;
    for (const auto& c : optional_cols) opt.push_back(t.column(c));
    std::vector<std::string> fields;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      fields.clear();
      for (auto i : idx) fields.push_back(t.rows[r][i]);
      for (const auto& o : opt) fields.push_back(o ? t.rows[r][*o] : std::string{});
      fn(fields, t.file, t.lines[r]);
    }
  }

  [[noreturn]] void dangling(const fs::path& f, std::size_t line, const std::string& what,
                             const std::string& name, const std::string& set) {
    throw ReferenceError(f.string() + ":" + std::to_string(line) + ": " + what + " '" + name +
                         "' is not declared in " + set);
  }

  void stream(const std::string& s, const fs::path& f, std::size_t l) {
    if (!streams_.count(s)) dangling(f, l, "stream", s, "S");
  }
  void unit(const std::string& u, const fs::path& f, std::size_t l) {
    if (!units_.count(u)) dangling(f, l, "unit", u, "U");
  }
  void quality(const std::string& q, const fs::path& f, std::size_t l) {
    if (!qualities_.count(q)) dangling(f, l, "quality", q, "Q");
  }
  void period(const std::string& t, const fs::path& f, std::size_t l) {
    if (!periods_.count(t)) dangling(f, l, "period", t, "T");
  }
  void capacity(const std::string& c, const fs::path& f, std::size_t l) {
    if (!capacities_.count(c)) dangling(f, l, "capacity index", c, "C");
  }
  void batch(const std::string& m, const fs::path& f, std::size_t l) {
    if (!batches_.count(m)) dangling(f, l, "batch", m, "M");
  }

  double num(const std::string& s, const fs::path& f, std::size_t l) { return parse_number(s, f, l); }

  Bounds bounds(const std::string& lo, const std::string& hi, const fs::path& f, std::size_t l) {
    Bounds b;
    b.lo = lo.empty() ? -kInf : num(lo, f, l);
    b.hi = hi.empty() ? kInf : num(hi, f, l);
    return b;
  }

  template <class Map, class K>
  void put(Map& map, const K& key, typename Map::mapped_type value, const fs::path& f,
           std::size_t l) {
    if (!map.emplace(key, value).second) throw ParseError(f.string(), l, "duplicate row");
  }

  void read_sets(BenchmarkInstance& inst) {
    each("T", {"t"}, [&](Row r, auto& f, auto l) {
      if (periods_.count(r[0])) throw ParseError(f.string(), l, "duplicate period");
      periods_.insert(r[0]);
      inst.periods.push_back(r[0]);
    });
    each("S", {"s"}, [&](Row r, auto&, auto) {
      streams_.insert(r[0]);
      inst.streams.insert(r[0]);
    });
    each("S_P", {"s"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      inst.products.insert(r[0]);
    });
    each("S_M", {"s"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      inst.raw_materials.insert(r[0]);
    });
    for (const auto& [table, kind] : kUnitTables) {
      each(table, {"u"}, [&, kind = kind, table = table](Row r, auto& f, auto l) {
        auto [it, fresh] = inst.units.emplace(r[0], kind);
        if (!fresh && it->second != kind)
          throw UnitKindConflict(f.string() + ":" + std::to_string(l) + ": unit '" + r[0] +
                                 "' declared as " + to_string(it->second) + " and as " +
                                 table.substr(2));
        units_.insert(r[0]);
      });
    }
    each("RB", {"u"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      if (inst.units.at(r[0]) != UnitKind::blender)
        throw UnitKindConflict(f.string() + ":" + std::to_string(l) + ": proportional blender '" +
                               r[0] + "' is not in U_BLD");
      inst.proportional_blenders.insert(r[0]);
    });
    each("Q", {"q"}, [&](Row r, auto&, auto) {
      qualities_.insert(r[0]);
      Quality qual;
      qual.cls = r[0] == kSpg ? QualityClass::spg : QualityClass::weight;
      qual.unit = r[1];
      inst.qualities[r[0]] = qual;
    }, {"unit"});
    std::set<std::string> classified{kSpg};
    for (const auto& [table, cls] : kQualityTables) {
      each(table, {"q"}, [&, cls = cls](Row r, auto& f, auto l) {
        quality(r[0], f, l);
        if (!classified.insert(r[0]).second)
          throw ParseError(f.string(), l,
                           "quality '" + r[0] + "' belongs to more than one of SPG, Q_V, Q_W, Q_P");
        inst.qualities[r[0]].cls = cls;
      });
    }
    for (const auto& q : qualities_)
      if (!classified.count(q))
        throw ParseError(files_.count("Q") ? files_["Q"].string() : "Q", 0,
                         "quality '" + q + "' is in none of SPG, Q_V, Q_W, Q_P");
    each("C", {"c"}, [&](Row r, auto&, auto) {
      capacities_.insert(r[0]);
      inst.capacities.insert(r[0]);
    });
    each("CAPIN", {"c"}, [&](Row r, auto& f, auto l) {
      capacity(r[0], f, l);
      inst.capacity_in.insert(r[0]);
    });
    each("CAPOUT", {"c"}, [&](Row r, auto& f, auto l) {
      capacity(r[0], f, l);
      inst.capacity_out.insert(r[0]);
    });
  }

  void read_incidence(BenchmarkInstance& inst) {
    auto pair_table = [&](const std::string& name, std::set<Key2>& out) {
      each(name, {"u", "s"}, [&](Row r, auto& f, auto l) {
        unit(r[0], f, l);
        stream(r[1], f, l);
        out.insert(Key2{r[0], r[1]});
      });
    };
    pair_table("IU", inst.iu);
    pair_table("OU", inst.ou);
    bool declared_batches = files_.count("M") > 0;
    each("M", {"m"}, [&](Row r, auto&, auto) { batches_.insert(r[0]); });
    auto batch_table = [&](const std::string& name, std::set<Key3>& out,
                           const std::set<Key2>& unit_level, const char* unit_table) {
      each(name, {"u", "m", "s"}, [&](Row r, auto& f, auto l) {
        unit(r[0], f, l);
        stream(r[2], f, l);
        if (declared_batches) batch(r[1], f, l);
        if (!unit_level.count(Key2{r[0], r[2]}))
          throw ReferenceError(f.string() + ":" + std::to_string(l) + ": stream '" + r[2] +
                               "' of unit '" + r[0] + "' is absent from " + unit_table);
        batches_.insert(r[1]);
        out.insert(Key3{r[0], r[1], r[2]});
      });
    };
    batch_table("IM", inst.im, inst.iu, "IU");
    batch_table("OM", inst.om, inst.ou, "OU");
    each("SC", {"u", "m", "s", "s2"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      batch(r[1], f, l);
      stream(r[2], f, l);
      stream(r[3], f, l);
      inst.sc.insert(Key4{r[0], r[1], r[2], r[3]});
    });
    each("SQ", {"s", "q"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      quality(r[1], f, l);
      inst.sq.insert(Key2{r[0], r[1]});
    });
    each("FIX", {"s", "q", "FQ0"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      quality(r[1], f, l);
      put(inst.fixed, Key2{r[0], r[1]}, num(r[2], f, l), f, l);
    });
    each("QT", {"s", "s2", "q", "alpha"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      stream(r[1], f, l);
      quality(r[2], f, l);
      put(inst.transfer, Key3{r[0], r[1], r[2]}, num(r[3], f, l), f, l);
    });
    each("CRU", {"q"}, [&](Row r, auto& f, auto l) {
      quality(r[0], f, l);
      inst.crude_controlled.insert(r[0]);
    });
    each("CDUMQ", {"u", "m", "q"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      batch(r[1], f, l);
      quality(r[2], f, l);
      inst.cdu_controlled.insert(Key3{r[0], r[1], r[2]});
    });
    each("DBSQ", {"u", "m", "s", "q"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      batch(r[1], f, l);
      stream(r[2], f, l);
      quality(r[3], f, l);
      inst.delta_links.insert(Key4{r[0], r[1], r[2], r[3]});
    });
    each("VMQ", {"u", "m", "s", "q"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      stream(r[2], f, l);
      quality(r[3], f, l);
      double w = r[4].empty() ? 1.0 : num(r[4], f, l);
      put(inst.virtual_batches, Key4{r[0], r[1], r[2], r[3]}, w, f, l);
    }, {"w"});
    each("CAPS", {"c", "s"}, [&](Row r, auto& f, auto l) {
      capacity(r[0], f, l);
      stream(r[1], f, l);
      inst.capacity_streams.insert(Key2{r[0], r[1]});
    });
    each("USP", {"u", "s"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      stream(r[1], f, l);
      inst.composition_streams.insert(Key2{r[0], r[1]});
    });
  }

  void read_parameters(BenchmarkInstance& inst) {
    each("FQ_CRD", {"m", "s", "q", "value"}, [&](Row r, auto& f, auto l) {
      batch(r[0], f, l);
      stream(r[1], f, l);
      quality(r[2], f, l);
      put(inst.crude_quality, Key3{r[0], r[1], r[2]}, num(r[3], f, l), f, l);
    });
    each("FQ_CUT", {"m", "s", "s2", "q", "value"}, [&](Row r, auto& f, auto l) {
      batch(r[0], f, l);
      stream(r[1], f, l);
      stream(r[2], f, l);
      quality(r[3], f, l);
      put(inst.cut_quality, Key4{r[0], r[1], r[2], r[3]}, num(r[4], f, l), f, l);
    });
    auto ums2 = [&](const std::string& name, std::map<Key4, double>& out) {
      each(name, {"u", "m", "s", "s2", "value"}, [&](Row r, auto& f, auto l) {
        unit(r[0], f, l);
        batch(r[1], f, l);
        stream(r[2], f, l);
        stream(r[3], f, l);
        put(out, Key4{r[0], r[1], r[2], r[3]}, num(r[4], f, l), f, l);
      });
    };
    ums2("y", inst.cut_yield);
    ums2("phi", inst.swing_ratio);
    each("gamma", {"u", "m", "s", "value"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      batch(r[1], f, l);
      stream(r[2], f, l);
      put(inst.base_yield, Key3{r[0], r[1], r[2]}, num(r[3], f, l), f, l);
    });
    auto umq = [&](const std::string& name, std::map<Key3, double>& out) {
      each(name, {"u", "m", "q", "value"}, [&](Row r, auto& f, auto l) {
        unit(r[0], f, l);
        batch(r[1], f, l);
        quality(r[2], f, l);
        put(out, Key3{r[0], r[1], r[2]}, num(r[3], f, l), f, l);
      });
    };
    umq("B", inst.base_property);
    umq("Delta", inst.delta_step);
    each("delta", {"u", "m", "s", "q", "value"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      batch(r[1], f, l);
      stream(r[2], f, l);
      quality(r[3], f, l);
      put(inst.yield_sensitivity, Key4{r[0], r[1], r[2], r[3]}, num(r[4], f, l), f, l);
    });
    each("beta", {"s", "s2", "value"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      stream(r[1], f, l);
      put(inst.blend_ratio, Key2{r[0], r[1]}, num(r[2], f, l), f, l);
    });
    auto per_stream = [&](const std::string& name, std::map<std::string, double>& out) {
      each(name, {"s", "value"}, [&](Row r, auto& f, auto l) {
        stream(r[0], f, l);
        put(out, r[0], num(r[1], f, l), f, l);
      });
    };
    per_stream("L0", inst.initial_inventory);
    per_stream("cP", inst.price_product);
    per_stream("cM", inst.price_material);
    per_stream("ciP", inst.inventory_price_product);
    per_stream("ciM", inst.inventory_price_material);
  }

  void read_bounds(BenchmarkInstance& inst) {
    each("FC", {"u", "s", "lo", "hi"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      stream(r[1], f, l);
      put(inst.feed_composition, Key2{r[0], r[1]}, bounds(r[2], r[3], f, l), f, l);
    });
    each("FV", {"s", "t", "lo", "hi"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      period(r[1], f, l);
      put(inst.flow_bounds, Key2{r[0], r[1]}, bounds(r[2], r[3], f, l), f, l);
    });
    each("FVC", {"c", "t", "lo", "hi"}, [&](Row r, auto& f, auto l) {
      capacity(r[0], f, l);
      period(r[1], f, l);
      put(inst.capacity_bounds, Key2{r[0], r[1]}, bounds(r[2], r[3], f, l), f, l);
    });
    each("MFQ", {"q", "lo", "hi"}, [&](Row r, auto& f, auto l) {
      quality(r[0], f, l);
      put(inst.crude_quality_bounds, r[0], bounds(r[1], r[2], f, l), f, l);
    });
    each("FQ", {"s", "q", "lo", "hi"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      quality(r[1], f, l);
      put(inst.quality_bounds, Key2{r[0], r[1]}, bounds(r[2], r[3], f, l), f, l);
    });
    each("FQV", {"u", "m", "q", "lo", "hi"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      quality(r[2], f, l);
      put(inst.batch_quality_bounds, Key3{r[0], r[1], r[2]}, bounds(r[3], r[4], f, l), f, l);
    });
    each("FQB", {"u", "q", "lo", "hi"}, [&](Row r, auto& f, auto l) {
      unit(r[0], f, l);
      quality(r[1], f, l);
      put(inst.blend_spec, Key2{r[0], r[1]}, bounds(r[2], r[3], f, l), f, l);
    });
    each("L", {"s", "t", "lo", "hi"}, [&](Row r, auto& f, auto l) {
      stream(r[0], f, l);
      period(r[1], f, l);
      put(inst.inventory_bounds, Key2{r[0], r[1]}, bounds(r[2], r[3], f, l), f, l);
    });
  }

  fs::path dir_;
  std::map<std::string, fs::path> files_;
  std::set<std::string> used_;
  std::set<std::string> periods_, streams_, units_, qualities_, capacities_, batches_;
};

}  // namespace

BenchmarkInstance load_instance(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError(dir.string(), 0, "not a bundle directory");
  return BundleReader(dir).read();
}

// ---------------------------------------------------------------------------
// Bundle writer

void write_instance(const BenchmarkInstance& inst, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::vector<std::string>> manifest;
  using Rows = std::vector<std::vector<std::string>>;
  auto emit = [&](const std::string& table, const std::vector<std::string>& cols, Rows rows) {
    if (rows.empty()) return;
    auto file = default_file(table);
    detail::write_table(dir / file, cols, rows);
    manifest.push_back({table, file});
  };
  auto n = [](double v) { return format_number(v); };
  auto lo = [](double v) { return v == -kInf ? std::string{} : format_number(v); };
  auto hi = [](double v) { return v == kInf ? std::string{} : format_number(v); };

  Rows rows;
  for (const auto& t : inst.periods) rows.push_back({t});
  emit("T", {"t"}, std::move(rows));
  auto names = [](const std::set<std::string>& set) {
    Rows r;
    for (const auto& x : set) r.push_back({x});
    return r;
  };
  emit("S", {"s"}, names(inst.streams));
  emit("S_P", {"s"}, names(inst.products));
  emit("S_M", {"s"}, names(inst.raw_materials));
  for (const auto& [table, kind] : kUnitTables) {
    Rows r;
    for (const auto& u : inst.units_of(kind)) r.push_back({u});
    emit(table, {"u"}, std::move(r));
  }
  emit("RB", {"u"}, names(inst.proportional_blenders));
  rows.clear();
  for (const auto& [q, qual] : inst.qualities) rows.push_back({q, qual.unit});
  emit("Q", {"q", "unit"}, std::move(rows));
  for (const auto& [table, cls] : kQualityTables) {
    Rows r;
    for (const auto& [q, qual] : inst.qualities)
      if (qual.cls == cls) r.push_back({q});
    emit(table, {"q"}, std::move(r));
  }
  emit("C", {"c"}, names(inst.capacities));
  emit("CAPIN", {"c"}, names(inst.capacity_in));
  emit("CAPOUT", {"c"}, names(inst.capacity_out));

  auto tuples = [](const auto& set) {
    Rows r;
    for (const auto& k : set) r.push_back(std::vector<std::string>(k.begin(), k.end()));
    return r;
  };
  auto valued = [&](const auto& map) {
    Rows r;
    for (const auto& [k, v] : map) {
      std::vector<std::string> row(k.begin(), k.end());
      row.push_back(n(v));
      r.push_back(std::move(row));
    }
    return r;
  };
  auto ranged = [&](const auto& map) {
    Rows r;
    for (const auto& [k, b] : map) {
      std::vector<std::string> row(k.begin(), k.end());
      row.push_back(lo(b.lo));
      row.push_back(hi(b.hi));
      r.push_back(std::move(row));
    }
    return r;
  };
  emit("IU", {"u", "s"}, tuples(inst.iu));
  emit("OU", {"u", "s"}, tuples(inst.ou));
  emit("IM", {"u", "m", "s"}, tuples(inst.im));
  emit("OM", {"u", "m", "s"}, tuples(inst.om));
  emit("SC", {"u", "m", "s", "s2"}, tuples(inst.sc));
  emit("SQ", {"s", "q"}, tuples(inst.sq));
  emit("FIX", {"s", "q", "FQ0"}, valued(inst.fixed));
  emit("QT", {"s", "s2", "q", "alpha"}, valued(inst.transfer));
  emit("CRU", {"q"}, names(inst.crude_controlled));
  emit("CDUMQ", {"u", "m", "q"}, tuples(inst.cdu_controlled));
  emit("DBSQ", {"u", "m", "s", "q"}, tuples(inst.delta_links));
  emit("VMQ", {"u", "m", "s", "q", "w"}, valued(inst.virtual_batches));
  emit("CAPS", {"c", "s"}, tuples(inst.capacity_streams));
  emit("USP", {"u", "s"}, tuples(inst.composition_streams));

  emit("FQ_CRD", {"m", "s", "q", "value"}, valued(inst.crude_quality));
  emit("FQ_CUT", {"m", "s", "s2", "q", "value"}, valued(inst.cut_quality));
  emit("y", {"u", "m", "s", "s2", "value"}, valued(inst.cut_yield));
  emit("phi", {"u", "m", "s", "s2", "value"}, valued(inst.swing_ratio));
  emit("gamma", {"u", "m", "s", "value"}, valued(inst.base_yield));
  emit("B", {"u", "m", "q", "value"}, valued(inst.base_property));
  emit("Delta", {"u", "m", "q", "value"}, valued(inst.delta_step));
  emit("delta", {"u", "m", "s", "q", "value"}, valued(inst.yield_sensitivity));
  emit("beta", {"s", "s2", "value"}, valued(inst.blend_ratio));
  auto per_stream = [&](const std::map<std::string, double>& map) {
    Rows r;
    for (const auto& [s, v] : map) r.push_back({s, n(v)});
    return r;
  };
  emit("L0", {"s", "value"}, per_stream(inst.initial_inventory));
  emit("cP", {"s", "value"}, per_stream(inst.price_product));
  emit("cM", {"s", "value"}, per_stream(inst.price_material));
  emit("ciP", {"s", "value"}, per_stream(inst.inventory_price_product));
  emit("ciM", {"s", "value"}, per_stream(inst.inventory_price_material));

  emit("FC", {"u", "s", "lo", "hi"}, ranged(inst.feed_composition));
  emit("FV", {"s", "t", "lo", "hi"}, ranged(inst.flow_bounds));
  emit("FVC", {"c", "t", "lo", "hi"}, ranged(inst.capacity_bounds));
  rows.clear();
  for (const auto& [q, b] : inst.crude_quality_bounds) rows.push_back({q, lo(b.lo), hi(b.hi)});
  emit("MFQ", {"q", "lo", "hi"}, std::move(rows));
  emit("FQ", {"s", "q", "lo", "hi"}, ranged(inst.quality_bounds));
  emit("FQV", {"u", "m", "q", "lo", "hi"}, ranged(inst.batch_quality_bounds));
  emit("FQB", {"u", "q", "lo", "hi"}, ranged(inst.blend_spec));
  emit("L", {"s", "t", "lo", "hi"}, ranged(inst.inventory_bounds));

  detail::write_table(dir / "manifest.csv", {"table", "file"}, manifest);
}

// ---------------------------------------------------------------------------
// Semantic checks

std::vector<Diagnostic> validate_instance(const BenchmarkInstance& inst) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string locus, std::string msg) {
    out.push_back({Severity::error, std::move(locus), std::move(msg)});
  };
  auto warning = [&](std::string locus, std::string msg) {
    out.push_back({Severity::warning, std::move(locus), std::move(msg)});
  };
  auto join = [](const auto& key) {
    std::string s = "(";
    for (std::size_t i = 0; i < key.size(); ++i) s += (i ? "," : "") + key[i];
    return s + ")";
  };
  auto kind_of = [&](const std::string& u) -> std::optional<UnitKind> {
    auto it = inst.units.find(u);
    if (it == inst.units.end()) return std::nullopt;
    return it->second;
  };

  for (const auto& s : inst.products)
    if (inst.raw_materials.count(s)) error("S_P/S_M", "stream '" + s + "' is both product and raw material");

  for (const auto& [q, qual] : inst.qualities) {
    bool named = q == kSpg;
    if (named != (qual.cls == QualityClass::spg))
      error("Q", "quality '" + q + "' must be in exactly one of {SPG}, Q_V, Q_W, Q_P");
  }

  for (const auto& k : inst.im)
    if (!inst.iu.count(Key2{k[0], k[2]})) error("IM" + join(k), "(u,s) missing from IU");
  for (const auto& k : inst.om)
    if (!inst.ou.count(Key2{k[0], k[2]})) error("OM" + join(k), "(u,s) missing from OU");

  for (const auto& [u, kind] : inst.units) {
    bool batched = !inst.batches_of(u).empty();
    if ((kind == UnitKind::splitter || kind == UnitKind::blender) && batched)
      error("IM/OM", std::string(to_string(kind)) + " unit '" + u + "' must not have batches");
    if ((kind == UnitKind::cdu || kind == UnitKind::fixed_yield || kind == UnitKind::delta_base ||
         kind == UnitKind::mixer) &&
        !batched && (!inst.inlets(u).empty() || !inst.outlets(u).empty()))
      error("IM/OM", "unit '" + u + "' has streams but no IM/OM rows");
  }

  for (const auto& k : inst.sc) {
    const auto& [u, m, s, s2] = k;
    if (kind_of(u) != UnitKind::cdu) {
      error("SC" + join(k), "unit is not a CDU");
      continue;
    }
    if (!inst.om.count(Key3{u, m, s})) error("SC" + join(k), "receiving stream not in OM of the batch");
    if (!inst.om.count(Key3{u, m, s2})) error("SC" + join(k), "swing stream not in OM of the batch");
    if (!inst.swing_ratio.count(k)) error("SC" + join(k), "no swing ratio phi");
  }

  auto need_tracked = [&](const std::string& locus, const std::string& s, const std::string& q) {
    if (!inst.tracked(s, q)) error(locus, "(" + s + "," + q + ") is in neither SQ nor FIX");
  };
  for (const auto& [k, b] : inst.quality_bounds) need_tracked("FQ" + join(k), k[0], k[1]);
  for (const auto& [k, a] : inst.transfer) {
    need_tracked("QT" + join(k), k[0], k[2]);
    need_tracked("QT" + join(k), k[1], k[2]);
  }
  for (const auto& k : inst.delta_links) {
    const auto& [u, m, s, q] = k;
    if (kind_of(u) != UnitKind::delta_base) error("DBSQ" + join(k), "unit is not a delta-base unit");
    need_tracked("DBSQ" + join(k), s, q);
    auto d = inst.delta_step.find(Key3{u, m, q});
    if (d == inst.delta_step.end() || d->second == 0.0)
      error("DBSQ" + join(k), "missing or zero Delta step");
    if (!inst.base_property.count(Key3{u, m, q})) error("DBSQ" + join(k), "missing base property B");
  }
  for (const auto& [k, w] : inst.virtual_batches) {
    const auto& [u, m, s, q] = k;
    auto kind = kind_of(u);
    QualityClass cls = inst.quality_class(q);
    bool process = kind == UnitKind::fixed_yield || kind == UnitKind::delta_base;
    if (kind != UnitKind::mixer && !process) {
      error("VMQ" + join(k), "virtual batch on a unit that is neither mixer nor process unit");
      continue;
    }
    if (process && cls != QualityClass::percentage)
      error("VMQ" + join(k), "process units carry only percentage (Q_P) virtual batches");
    if (cls != QualityClass::percentage) {
      need_tracked("VMQ" + join(k), s, q);
      if (cls != QualityClass::weight) need_tracked("VMQ" + join(k), s, kSpg);
    }
    if (!inst.batch_quality_bounds.count(Key3{u, m, q}))
      warning("VMQ" + join(k), "no FQV window for the virtual batch");
  }
  for (const auto& k : inst.cdu_controlled) {
    if (kind_of(k[0]) != UnitKind::cdu) error("CDUMQ" + join(k), "unit is not a CDU");
    if (!inst.batch_quality_bounds.count(k)) warning("CDUMQ" + join(k), "no FQV window");
  }

  // Quality bookkeeping the emitters rely on.
  for (const auto& [u, kind] : inst.units) {
    if (kind == UnitKind::blender) {
      auto outs = inst.outlets(u);
      for (auto it = inst.blend_spec.lower_bound(Key2{u, ""});
           it != inst.blend_spec.end() && it->first[0] == u; ++it) {
        const auto& q = it->first[1];
        for (const auto& s : inst.inlets(u)) {
          need_tracked("FQB" + join(it->first), s, kSpg);
          if (q != kSpg) need_tracked("FQB" + join(it->first), s, q);
        }
      }
      if (inst.proportional_blenders.count(u))
        for (const auto& o : outs)
          for (const auto& s : inst.inlets(u))
            if (!inst.blend_ratio.count(Key2{o, s}))
              error("beta(" + o + "," + s + ")", "proportional blender '" + u + "' has no ratio");
    }
    if (kind == UnitKind::mixer) {
      for (const auto& m : inst.batches_of(u)) {
        auto outs = inst.batch_outlets(u, m);
        auto ins = inst.batch_inlets(u, m);
        for (const auto& o : outs) {
          for (auto it = inst.sq.lower_bound(Key2{o, ""}); it != inst.sq.end() && (*it)[0] == o;
               ++it) {
            const auto& q = (*it)[1];
            if (inst.is_fixed(o, q)) continue;
            QualityClass cls = inst.quality_class(q);
            if (cls == QualityClass::percentage) continue;
            for (const auto& s : ins) {
              need_tracked("mixer " + u + "/" + m, s, q);
              if (cls != QualityClass::weight) need_tracked("mixer " + u + "/" + m, s, kSpg);
            }
          }
        }
      }
    }
    if (kind == UnitKind::splitter) {
      for (const auto& s : inst.inlets(u))
        for (auto it = inst.sq.lower_bound(Key2{s, ""}); it != inst.sq.end() && (*it)[0] == s; ++it)
          for (const auto& o : inst.outlets(u)) need_tracked("splitter " + u, o, (*it)[1]);
    }
    if (kind == UnitKind::fixed_yield || kind == UnitKind::delta_base) {
      for (const auto& m : inst.batches_of(u)) {
        double feed = 0.0;
        for (const auto& s : inst.batch_inlets(u, m)) {
          auto g = inst.base_yield.find(Key3{u, m, s});
          if (g == inst.base_yield.end()) error("gamma(" + u + "," + m + "," + s + ")", "missing base yield");
          else feed += g->second;
        }
        for (const auto& s : inst.batch_outlets(u, m))
          if (!inst.base_yield.count(Key3{u, m, s}))
            error("gamma(" + u + "," + m + "," + s + ")", "missing base yield");
        if (feed == 0.0) error("gamma(" + u + "," + m + ")", "inlet base yields sum to zero");
      }
    }
    if (kind == UnitKind::cdu) {
      for (const auto& m : inst.batches_of(u)) {
        for (const auto& o : inst.batch_outlets(u, m)) {
          for (auto it = inst.sq.lower_bound(Key2{o, ""}); it != inst.sq.end() && (*it)[0] == o;
               ++it) {
            const auto& q = (*it)[1];
            if (inst.is_fixed(o, q)) continue;
            QualityClass cls = inst.quality_class(q);
            if (cls == QualityClass::percentage) continue;
            if (cls == QualityClass::volume) need_tracked("CDU " + u, o, kSpg);
            for (const auto& c : inst.batch_inlets(u, m)) {
              if (inst.cut_yield.count(Key4{u, m, o, c}) &&
                  !inst.cut_quality.count(Key4{m, o, c, q}))
                error("FQ_CUT(" + m + "," + o + "," + c + "," + q + ")", "missing cut property");
              if (cls == QualityClass::volume && inst.cut_yield.count(Key4{u, m, o, c}) &&
                  !inst.cut_quality.count(Key4{m, o, c, kSpg}))
                error("FQ_CUT(" + m + "," + o + "," + c + ",SPG)", "missing cut property");
            }
          }
        }
      }
    }
  }

  auto check_bounds = [&](const std::string& table, const auto& map) {
    for (const auto& [k, b] : map) {
      if (!b.ordered()) {
        std::string locus = table;
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, std::string>) locus += "(" + k + ")";
        else locus += join(k);
        error(locus, "lower bound exceeds upper bound");
      }
    }
  };
  check_bounds("FV", inst.flow_bounds);
  check_bounds("FVC", inst.capacity_bounds);
  check_bounds("MFQ", inst.crude_quality_bounds);
  check_bounds("FQ", inst.quality_bounds);
  check_bounds("FQV", inst.batch_quality_bounds);
  check_bounds("FQB", inst.blend_spec);
  check_bounds("L", inst.inventory_bounds);
  check_bounds("FC", inst.feed_composition);

  for (const auto& [k, b] : inst.inventory_bounds)
    if (!std::isfinite(b.hi)) error("L" + join(k), "storable stream needs a finite maximum level");

  for (const auto& c : inst.capacities) {
    auto it = inst.capacity_streams.lower_bound(Key2{c, ""});
    if (it == inst.capacity_streams.end() || (*it)[0] != c) error("CAPS", "capacity '" + c + "' has no streams");
    if (!inst.capacity_in.count(c) && !inst.capacity_out.count(c))
      warning("C", "capacity '" + c + "' is in neither CAPIN nor CAPOUT");
  }

  for (const auto& s : inst.products)
    if (!inst.price_product.count(s)) error("cP", "product '" + s + "' has no price");
  for (const auto& s : inst.raw_materials)
    if (!inst.price_material.count(s)) error("cM", "raw material '" + s + "' has no cost");

  if (!inst.composition_streams.empty() || !inst.feed_composition.empty())
    warning("USP/FC", "feed-composition data is stored but generates no constraints");

  return out;
}

InstanceCounts instance_summary(const BenchmarkInstance& inst) {
  InstanceCounts c;
  c.periods = inst.periods.size();
  c.streams = inst.streams.size();
  c.products = inst.products.size();
  c.raw_materials = inst.raw_materials.size();
  for (const auto& [u, kind] : inst.units) ++c.units_by_kind[kind];
  std::set<Key2> batches;
  for (const auto& k : inst.im) batches.insert(Key2{k[0], k[1]});
  for (const auto& k : inst.om) batches.insert(Key2{k[0], k[1]});
  c.batches = batches.size();
  c.tracked_qualities = inst.sq.size();
  c.delta_base_units = inst.units_of(UnitKind::delta_base).size();
  for (const auto& s : inst.streams)
    if (inst.storable(s)) ++c.storable_streams;
  return c;
}

}  // namespace refplan
