#include "refplan/validation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace refplan {

double PlanSolution::at(const VarKey& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw MissingVariableError("plan has no value for " + to_string(key));
  return it->second;
}

namespace {

bool planning_kind(VarKind k) {
  switch (k) {
    case VarKind::FVI:
    case VarKind::FVO:
    case VarKind::FVM:
    case VarKind::FQ:
    case VarKind::Gamma:
    case VarKind::FVLI:
    case VarKind::FVLO:
    case VarKind::L:
    case VarKind::VM:
    case VarKind::V:
    case VarKind::X:
      return true;
    default:
      return false;
  }
}

bool required_kind(VarKind k) {
  return planning_kind(k) && k != VarKind::VM && k != VarKind::V && k != VarKind::Gamma;
}

bool batched(UnitKind k) {
  return k == UnitKind::cdu || k == UnitKind::fixed_yield || k == UnitKind::delta_base ||
         k == UnitKind::mixer;
}

double lookup_or(const std::map<std::string, double>& m, const std::string& k, double dflt) {
  auto it = m.find(k);
  return it == m.end() ? dflt : it->second;
}

// Read access to a plan in instance terms.
class View {
 public:
  View(const BenchmarkInstance& inst, const PlanSolution& plan) : inst(inst), plan(plan) {}

  const BenchmarkInstance& inst;
  const PlanSolution& plan;

  double fvi(const std::string& s, const std::string& t) const { return plan.at({VarKind::FVI, {s}, t}); }
  double fvo(const std::string& s, const std::string& t) const { return plan.at({VarKind::FVO, {s}, t}); }
  double fvm(const std::string& u, const std::string& m, const std::string& s, const std::string& t) const {
    return plan.at({VarKind::FVM, {u, m, s}, t});
  }
  double fvli(const std::string& s, const std::string& t) const {
    return inst.storable(s) ? plan.at({VarKind::FVLI, {s}, t}) : 0.0;
  }
  double fvlo(const std::string& s, const std::string& t) const {
    return inst.storable(s) ? plan.at({VarKind::FVLO, {s}, t}) : 0.0;
  }
  double fq(const std::string& s, const std::string& q, const std::string& t) const {
    auto f = inst.fixed.find(Key2{s, q});
    if (f != inst.fixed.end()) return f->second;
    return plan.at({VarKind::FQ, {s, q}, t});
  }
  double param(const std::map<Key3, double>& m, const Key3& k, const char* name) const {
    auto it = m.find(k);
    if (it == m.end()) throw Error(std::string("missing ") + name + "(" + k[0] + "," + k[1] + "," + k[2] + ")");
    return it->second;
  }
  double param(const std::map<Key4, double>& m, const Key4& k, const char* name) const {
    auto it = m.find(k);
    if (it == m.end())
      throw Error(std::string("missing ") + name + "(" + k[0] + "," + k[1] + "," + k[2] + "," + k[3] + ")");
    return it->second;
  }

  // Output of stream s from CDU batch (u, m) including swing-cut shares,
  // with each crude term weighted by weight(cut, crude).
  double cut_sum(const std::string& u, const std::string& m, const std::string& s, const std::string& t,
                 const std::function<double(const std::string&, const std::string&)>& weight) const {
    double total = 0.0;
    auto crudes = inst.batch_inlets(u, m);
    auto from_cut = [&](const std::string& cut) {
      double sum = 0.0;
      for (const auto& c : crudes) {
        auto y = inst.cut_yield.find(Key4{u, m, cut, c});
        if (y != inst.cut_yield.end()) sum += y->second * weight(cut, c) * fvm(u, m, c, t);
      }
      return sum;
    };
    total += from_cut(s);
    for (const auto& k : inst.sc) {
      if (k[0] != u || k[1] != m) continue;
      double phi = param(inst.swing_ratio, k, "phi");
      if (k[2] == s) total += phi * from_cut(k[3]);
      if (k[3] == s) total -= phi * from_cut(s);
    }
    return total;
  }

  // Yield coefficient of s in delta-base batch (u, m) at the plan's feed
  // qualities.
  double calibrated_yield(const std::string& u, const std::string& m, const std::string& s,
                          const std::string& t, std::map<std::string, double>* used = nullptr) const {
    double g = param(inst.base_yield, Key3{u, m, s}, "gamma");
    for (const auto& link : inst.delta_links) {
      if (link[0] != u || link[1] != m) continue;
      auto d = inst.yield_sensitivity.find(Key4{u, m, s, link[3]});
      if (d == inst.yield_sensitivity.end()) continue;
      double step = param(inst.delta_step, Key3{u, m, link[3]}, "Delta");
      double base = param(inst.base_property, Key3{u, m, link[3]}, "B");
      double value = fq(link[2], link[3], t);
      if (used) (*used)[link[3]] = value;
      g += (value - base) * d->second / step;
    }
    return g;
  }

  std::vector<std::string> members(const std::string& u, const std::string& m) const {
    auto out = inst.batch_inlets(u, m);
    for (const auto& s : inst.batch_outlets(u, m))
      if (!std::count(out.begin(), out.end(), s)) out.push_back(s);
    std::sort(out.begin(), out.end());
    return out;
  }
};

class Checker {
 public:
  Checker(const BenchmarkInstance& inst, const PlanSolution& plan, const BuildOptions& opts,
          ValidationReport& report)
      : v(inst, plan), inst(inst), opts(opts), report(report), periods(horizon_periods(inst, opts)) {}

  void run() {
    for (const auto& t : periods) {
      bounds(t);
      balances(t);
      cdu(t);
      process_units(t);
      mixing(t);
      blending(t);
      inventory(t);
      capacity(t);
    }
  }

 private:
  View v;
  const BenchmarkInstance& inst;
  const BuildOptions& opts;
  ValidationReport& report;
  std::vector<std::string> periods;

  static std::string make_id(const std::string& family, const std::vector<std::string>& index) {
    std::string id = family + "(";
    for (std::size_t i = 0; i < index.size(); ++i) id += (i ? "," : "") + index[i];
    return id + ")";
  }

  void record(const std::string& family, const std::vector<std::string>& index, double magnitude,
              double rhs) {
    Residual r;
    r.family = family;
    r.id = make_id(family, index);
    r.magnitude = magnitude;
    r.relative = magnitude / std::max(1.0, std::abs(rhs));
    report.residuals.push_back(std::move(r));
  }

  void equal(const std::string& family, const std::vector<std::string>& index, double lhs, double rhs) {
    record(family, index, std::abs(lhs - rhs), rhs);
  }

  void window(const std::string& family, const std::vector<std::string>& index, double value, Bounds b) {
    if (std::isfinite(b.lo)) record(family + "_lo", index, std::max(0.0, b.lo - value), b.lo);
    if (std::isfinite(b.hi)) record(family + "_hi", index, std::max(0.0, value - b.hi), b.hi);
  }

  void nonneg(const VarKey& k) {
    if (!v.plan.has(k)) return;
    double x = v.plan.at(k);
    if (x < 0) record("nonneg", {to_string(k)}, -x, 0.0);
  }

  // ---------------------------------------------------------------------

  void bounds(const std::string& t) {
    for (const auto& s : inst.streams) {
      double in = v.fvi(s, t), out = v.fvo(s, t);
      if (inst.products.count(s)) window("flow", {"FVI", s, t}, in, inst.flow(s, t));
      else if (in < 0) record("nonneg", {"FVI", s, t}, -in, 0.0);
      if (inst.raw_materials.count(s)) window("flow", {"FVO", s, t}, out, inst.flow(s, t));
      else if (out < 0) record("nonneg", {"FVO", s, t}, -out, 0.0);
      if (inst.storable(s)) {
        window("level", {s, t}, v.plan.at({VarKind::L, {s}, t}), inst.inventory(s, t));
        nonneg({VarKind::FVLI, {s}, t});
        nonneg({VarKind::FVLO, {s}, t});
      }
    }
    for (const auto& k : inst.im) nonneg({VarKind::FVM, {k[0], k[1], k[2]}, t});
    for (const auto& k : inst.om) nonneg({VarKind::FVM, {k[0], k[1], k[2]}, t});
    for (const auto& k : inst.sq) {
      if (inst.is_fixed(k[0], k[1])) continue;
      auto b = inst.quality_bounds.find(k);
      double x = v.fq(k[0], k[1], t);
      if (b != inst.quality_bounds.end()) window("quality", {k[0], k[1], t}, x, b->second);
      else if (x < 0) record("nonneg", {"FQ", k[0], k[1], t}, -x, 0.0);
    }
  }

  void balances(const std::string& t) {
    for (const auto& [u, kind] : inst.units) {
      if (batched(kind)) {
        for (const auto& s : inst.inlets(u)) {
          double sum = 0.0;
          for (const auto& m : inst.batches_of(u))
            if (inst.im.count(Key3{u, m, s})) sum += v.fvm(u, m, s, t);
          equal("batch_in", {u, s, t}, v.fvi(s, t), sum);
        }
        for (const auto& s : inst.outlets(u)) {
          double sum = 0.0;
          for (const auto& m : inst.batches_of(u))
            if (inst.om.count(Key3{u, m, s})) sum += v.fvm(u, m, s, t);
          equal("batch_out", {u, s, t}, v.fvo(s, t), sum);
        }
      }
      if (kind == UnitKind::mixer) {
        for (const auto& m : inst.batches_of(u)) {
          double in = 0.0, out = 0.0;
          for (const auto& s : inst.batch_inlets(u, m)) in += v.fvm(u, m, s, t);
          for (const auto& s : inst.batch_outlets(u, m)) out += v.fvm(u, m, s, t);
          equal("mixer_balance", {u, m, t}, out, in);
        }
      }
      if (kind == UnitKind::splitter || kind == UnitKind::blender) {
        double in = 0.0, out = 0.0;
        for (const auto& s : inst.inlets(u)) in += v.fvi(s, t);
        for (const auto& s : inst.outlets(u)) out += v.fvo(s, t);
        equal("unit_balance", {u, t}, out, in);
      }
    }
  }

  // Mass-, volume- or weight-based property of a set of streams.
  struct Pool {
    double mass = 0.0, volume = 0.0, weighted = 0.0;
  };

  std::optional<double> property(const Pool& p, QualityClass cls) {
    double basis = cls == QualityClass::weight ? p.mass : p.volume;
    if (basis < kPoolEpsilon) {
      ++report.skipped_pools;
      return std::nullopt;
    }
    return (cls == QualityClass::spg ? p.mass : p.weighted) / basis;
  }

  void cdu(const std::string& t) {
    auto one = [](const std::string&, const std::string&) { return 1.0; };
    for (const auto& u : inst.units_of(UnitKind::cdu)) {
      for (const auto& m : inst.batches_of(u))
        for (const auto& s : inst.batch_outlets(u, m))
          equal("cdu_yield", {u, m, s, t}, v.fvm(u, m, s, t), v.cut_sum(u, m, s, t, one));

      for (const auto& s : inst.outlets(u)) {
        double out = v.fvo(s, t);
        if (out < kPoolEpsilon) {
          ++report.skipped_pools;
          continue;
        }
        auto sum = [&](auto weight) {
          double total = 0.0;
          for (const auto& m : inst.batches_of(u))
            if (inst.om.count(Key3{u, m, s}))
              total += v.cut_sum(u, m, s, t, [&](const std::string& cut, const std::string& c) {
                return weight(m, cut, c);
              });
          return total;
        };
        auto cut = [&](const std::string& m, const std::string& a, const std::string& c,
                       const std::string& q) { return v.param(inst.cut_quality, Key4{m, a, c, q}, "FQ_CUT"); };
        for (auto it = inst.sq.lower_bound(Key2{s, ""}); it != inst.sq.end() && (*it)[0] == s; ++it) {
          const auto& q = (*it)[1];
          if (inst.is_fixed(s, q)) continue;
          auto cls = inst.quality_class(q);
          if (cls == QualityClass::spg) {
            double volume = sum([&](auto& m, auto& a, auto& c) { return 1.0 / cut(m, a, c, kSpg); });
            if (volume < kPoolEpsilon) continue;
            equal("cdu_spg", {u, s, t}, v.fq(s, q, t), out / volume);
          } else if (cls == QualityClass::volume) {
            double volume = out / v.fq(s, kSpg, t);
            double carried = sum([&](auto& m, auto& a, auto& c) { return cut(m, a, c, q) / cut(m, a, c, kSpg); });
            equal("cdu_vol_quality", {u, s, q, t}, v.fq(s, q, t), carried / volume);
          } else if (cls == QualityClass::weight) {
            double carried = sum([&](auto& m, auto& a, auto& c) { return cut(m, a, c, q); });
            equal("cdu_wt_quality", {u, s, q, t}, v.fq(s, q, t), carried / out);
          }
        }
      }
    }

    auto crude_q = [&](const std::string& m, const std::string& s, const std::string& q) {
      return v.param(inst.crude_quality, Key3{m, s, q}, "FQ_CRD");
    };
    auto add_crude = [&](Pool& p, const std::string& u, const std::string& m, const std::string& s,
                         const std::string& q, QualityClass cls) {
      double f = v.fvm(u, m, s, t);
      p.mass += f;
      if (cls == QualityClass::weight) {
        p.weighted += f * crude_q(m, s, q);
      } else {
        double vol = f / crude_q(m, s, kSpg);
        p.volume += vol;
        if (cls == QualityClass::volume) p.weighted += vol * crude_q(m, s, q);
      }
    };
    for (const auto& k : inst.cdu_controlled) {
      const auto& [u, m, q] = k;
      auto b = inst.batch_quality_bounds.find(k);
      auto cls = inst.quality_class(q);
      if (b == inst.batch_quality_bounds.end() || cls == QualityClass::percentage) continue;
      const std::string filter = cls == QualityClass::weight ? q : std::string(kSpg);
      Pool p;
      for (const auto& s : inst.batch_inlets(u, m))
        if (inst.tracked(s, filter)) add_crude(p, u, m, s, q, cls);
      if (auto x = property(p, cls)) window("cdu_feed", {u, m, q, t}, *x, b->second);
    }
    for (const auto& q : inst.crude_controlled) {
      auto b = inst.crude_quality_bounds.find(q);
      auto cls = inst.quality_class(q);
      if (b == inst.crude_quality_bounds.end() || cls == QualityClass::percentage) continue;
      Pool p;
      for (const auto& u : inst.units_of(UnitKind::cdu))
        for (const auto& m : inst.batches_of(u))
          for (const auto& s : inst.batch_inlets(u, m)) add_crude(p, u, m, s, q, cls);
      if (auto x = property(p, cls)) window("crude", {q, t}, *x, b->second);
    }
  }

  void process_units(const std::string& t) {
    for (const auto& [u, kind] : inst.units) {
      if (kind != UnitKind::fixed_yield && kind != UnitKind::delta_base) continue;
      bool delta = kind == UnitKind::delta_base && opts.delta_base;
      for (const auto& m : inst.batches_of(u)) {
        auto ins = inst.batch_inlets(u, m);
        auto yield = [&](const std::string& s) {
          return delta ? v.calibrated_yield(u, m, s, t) : v.param(inst.base_yield, Key3{u, m, s}, "gamma");
        };
        double feed_yield = 0.0, feed = 0.0;
        for (const auto& s : ins) {
          feed_yield += yield(s);
          feed += v.fvm(u, m, s, t);
        }
        for (const auto& s : v.members(u, m)) {
          double expected = feed_yield == 0.0 ? 0.0 : yield(s) / feed_yield * feed;
          equal(delta ? "pd_yield" : "pf_yield", {u, m, s, t}, v.fvm(u, m, s, t), expected);
        }
      }
    }
    for (const auto& [k, alpha] : inst.transfer) {
      const auto& [s, s2, q] = k;
      if (!inst.tracked(s, q) || inst.is_fixed(s2, q)) continue;
      equal("transfer", {s, s2, q, t}, v.fq(s2, q, t), alpha * v.fq(s, q, t));
    }
  }

  void mixing(const std::string& t) {
    for (const auto& u : inst.units_of(UnitKind::mixer)) {
      for (const auto& m : inst.batches_of(u)) {
        auto ins = inst.batch_inlets(u, m);
        auto volume_in = [&] {
          double vol = 0.0;
          for (const auto& c : ins) vol += v.fvm(u, m, c, t) / v.fq(c, kSpg, t);
          return vol;
        };
        for (const auto& s : inst.batch_outlets(u, m)) {
          double mass = v.fvm(u, m, s, t);
          if (inst.tracked(s, kSpg)) {
            double vol = volume_in();
            if (vol < kPoolEpsilon) {
              ++report.skipped_pools;
            } else {
              equal("mixer_volume_balance", {u, m, s, t}, v.fq(s, kSpg, t), mass / vol);
            }
          }
          for (auto it = inst.sq.lower_bound(Key2{s, ""}); it != inst.sq.end() && (*it)[0] == s; ++it) {
            const auto& q = (*it)[1];
            if (inst.is_fixed(s, q)) continue;
            auto cls = inst.quality_class(q);
            if (cls == QualityClass::volume) {
              double vol = mass / v.fq(s, kSpg, t);
              if (vol < kPoolEpsilon) {
                ++report.skipped_pools;
                continue;
              }
              double carried = 0.0;
              for (const auto& c : ins) carried += v.fvm(u, m, c, t) / v.fq(c, kSpg, t) * v.fq(c, q, t);
              equal("mixer_vol_quality", {u, m, s, q, t}, v.fq(s, q, t), carried / vol);
            } else if (cls == QualityClass::weight) {
              if (mass < kPoolEpsilon) {
                ++report.skipped_pools;
                continue;
              }
              double carried = 0.0;
              for (const auto& c : ins) carried += v.fvm(u, m, c, t) * v.fq(c, q, t);
              equal("mixer_wt_quality", {u, m, s, q, t}, v.fq(s, q, t), carried / mass);
            }
          }
        }
      }
    }

    std::map<Key3, std::vector<std::pair<std::string, double>>> groups;
    for (const auto& [k, w] : inst.virtual_batches) groups[Key3{k[0], k[1], k[3]}].push_back({k[2], w});
    for (const auto& [g, members] : groups) {
      const auto& [u, m, q] = g;
      auto b = inst.batch_quality_bounds.find(g);
      if (b == inst.batch_quality_bounds.end()) continue;
      auto cls = inst.quality_class(q);
      if (cls == QualityClass::percentage) {
        double part = 0.0, total = 0.0;
        for (const auto& [s, w] : members) part += w * v.fvi(s, t);
        for (const auto& s : inst.inlets(u)) total += v.fvi(s, t);
        if (total < kPoolEpsilon) {
          ++report.skipped_pools;
          continue;
        }
        window("ratio", {u, m, q, t}, part / total, b->second);
        continue;
      }
      std::vector<std::string> streams;
      for (const auto& [s, w] : members) streams.push_back(s);
      if (auto x = blend_property(streams, q, cls, t)) window("vbatch", {u, m, q, t}, *x, b->second);
    }

    for (const auto& u : inst.units_of(UnitKind::splitter)) {
      for (const auto& s : inst.inlets(u)) {
        std::set<std::string> qs;
        for (const auto& k : inst.sq)
          if (k[0] == s) qs.insert(k[1]);
        for (const auto& [k, val] : inst.fixed)
          if (k[0] == s) qs.insert(k[1]);
        for (const auto& q : qs)
          for (const auto& o : inst.outlets(u))
            equal("split_quality", {u, s, o, q, t}, v.fq(o, q, t), v.fq(s, q, t));
      }
    }
  }

  std::optional<double> blend_property(const std::vector<std::string>& streams, const std::string& q,
                                       QualityClass cls, const std::string& t) {
    Pool p;
    for (const auto& s : streams) {
      double f = v.fvi(s, t);
      p.mass += f;
      if (cls == QualityClass::weight) {
        p.weighted += f * v.fq(s, q, t);
      } else {
        double vol = f / v.fq(s, kSpg, t);
        p.volume += vol;
        if (cls == QualityClass::volume) p.weighted += vol * v.fq(s, q, t);
      }
    }
    return property(p, cls);
  }

  void blending(const std::string& t) {
    for (const auto& u : inst.units_of(UnitKind::blender)) {
      auto ins = inst.inlets(u);
      for (auto it = inst.blend_spec.lower_bound(Key2{u, ""}); it != inst.blend_spec.end() && it->first[0] == u; ++it) {
        const auto& q = it->first[1];
        auto cls = inst.quality_class(q);
        if (cls == QualityClass::percentage) continue;
        if (auto x = blend_property(ins, q, cls, t)) window("blend", {u, q, t}, *x, it->second);
      }
      if (inst.proportional_blenders.count(u))
        for (const auto& o : inst.outlets(u))
          for (const auto& s : ins) {
            auto beta = inst.blend_ratio.find(Key2{o, s});
            if (beta == inst.blend_ratio.end()) continue;
            equal("blend_ratio", {u, o, s, t}, v.fvi(s, t), beta->second * v.fvo(o, t));
          }
    }
  }

  void inventory(const std::string& t) {
    auto pos = std::find(periods.begin(), periods.end(), t) - periods.begin();
    for (const auto& s : inst.streams) {
      double in = v.fvli(s, t), out = v.fvlo(s, t);
      equal("stream_balance", {s, t}, v.fvi(s, t) + in, v.fvo(s, t) + out);
      if (!inst.storable(s)) continue;
      double prev = pos == 0 ? lookup_or(inst.initial_inventory, s, 0.0)
                             : v.plan.at({VarKind::L, {s}, periods[pos - 1]});
      equal("inventory_level", {s, t}, v.plan.at({VarKind::L, {s}, t}), prev + in - out);
      if (!opts.inventory_binaries) continue;
      double cap = inst.inventory(s, t).hi;
      double x = v.plan.at({VarKind::X, {s}, t});
      record("integrality", {s, t}, std::min(std::abs(x), std::abs(1.0 - x)), 1.0);
      record("inventory_out_flag", {s, t}, std::max(0.0, out - cap * x), cap * x);
      record("inventory_in_flag", {s, t}, std::max(0.0, in - cap * (1.0 - x)), cap * (1.0 - x));
    }
  }

  void capacity(const std::string& t) {
    for (const auto& c : inst.capacities) {
      auto b = inst.capacity_bounds.find(Key2{c, t});
      if (b == inst.capacity_bounds.end()) continue;
      for (bool inlet : {true, false}) {
        if (!(inlet ? inst.capacity_in : inst.capacity_out).count(c)) continue;
        double sum = 0.0;
        for (auto it = inst.capacity_streams.lower_bound(Key2{c, ""});
             it != inst.capacity_streams.end() && (*it)[0] == c; ++it)
          sum += inlet ? v.fvi((*it)[1], t) : v.fvo((*it)[1], t);
        window(inlet ? "capacity_in" : "capacity_out", {c, t}, sum, b->second);
      }
    }
  }
};

}  // namespace

PlanSolution plan_from_values(const AlgebraicModel& model, const std::vector<double>& values,
                              std::string source, std::string solver) {
  PlanSolution plan;
  plan.source = std::move(source);
  plan.solver = std::move(solver);
  for (VarId j = 0; j < model.variables.size() && j < values.size(); ++j)
    if (planning_kind(model.variables[j].key.kind)) plan.values[model.variables[j].key] = values[j];
  return plan;
}

std::vector<double> plan_to_values(const AlgebraicModel& model, const PlanSolution& plan) {
  std::vector<double> x(model.variables.size(), 0.0);
  std::vector<bool> missing(x.size(), false);
  for (VarId j = 0; j < x.size(); ++j) {
    const auto& key = model.variables[j].key;
    if (plan.has(key)) {
      x[j] = plan.at(key);
    } else if (required_kind(key.kind)) {
      throw MissingVariableError("plan has no value for " + to_string(key));
    } else {
      missing[j] = true;
    }
  }
  // Auxiliary volumes and yields follow from their defining rows.
  for (int sweep = 0; sweep < 20; ++sweep) {
    bool changed = false;
    for (const auto& c : model.constraints) {
      if (!c.defines || !missing[*c.defines]) continue;
      auto v = solve_row_for(c, *c.defines, x);
      if (v && std::abs(*v - x[*c.defines]) > 1e-12 * std::max(1.0, std::abs(*v))) {
        x[*c.defines] = *v;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return x;
}

ProfitBreakdown evaluate_profit(const BenchmarkInstance& inst, const PlanSolution& plan,
                                const BuildOptions& opts) {
  View v(inst, plan);
  ProfitBreakdown p;
  for (const auto& t : horizon_periods(inst, opts)) {
    for (const auto& s : inst.products) {
      p.revenue += lookup_or(inst.price_product, s, 0.0) * v.fvi(s, t);
      if (inst.storable(s))
        p.product_inventory += lookup_or(inst.inventory_price_product, s, 0.0) * v.fvli(s, t) -
                               lookup_or(inst.inventory_price_material, s, 0.0) * v.fvlo(s, t);
    }
    for (const auto& s : inst.raw_materials) {
      p.material_cost += lookup_or(inst.price_material, s, 0.0) * v.fvo(s, t);
      if (inst.storable(s))
        p.material_inventory -= lookup_or(inst.inventory_price_material, s, 0.0) * v.fvlo(s, t) -
                                lookup_or(inst.inventory_price_product, s, 0.0) * v.fvli(s, t);
    }
  }
  return p;
}

ValidationReport check_solution(const BenchmarkInstance& inst, const PlanSolution& plan,
                                double tolerance, const BuildOptions& opts) {
  ValidationReport report;
  report.tolerance = tolerance;
  Checker(inst, plan, opts, report).run();
  for (const auto& r : report.residuals)
    if (r.relative > tolerance) report.violations.push_back(r);
  std::stable_sort(report.violations.begin(), report.violations.end(),
                   [](const Residual& a, const Residual& b) {
                     if (a.relative != b.relative) return a.relative > b.relative;
                     return a.id < b.id;
                   });
  report.profit = evaluate_profit(inst, plan, opts);
  return report;
}

CalibrationReport calibrate_yields(const BenchmarkInstance& inst, const PlanSolution& plan,
                                   const BuildOptions& opts) {
  View v(inst, plan);
  CalibrationReport report;
  for (const auto& t : horizon_periods(inst, opts)) {
    for (const auto& u : inst.units_of(UnitKind::delta_base)) {
      for (const auto& m : inst.batches_of(u)) {
        CalibrationEntry e;
        e.unit = u;
        e.batch = m;
        e.period = t;
        auto ins = inst.batch_inlets(u, m);
        double feed_yield = 0.0, feed = 0.0;
        for (const auto& s : v.members(u, m)) e.yields[s] = v.calibrated_yield(u, m, s, t, &e.feed_properties);
        for (const auto& s : ins) {
          feed_yield += e.yields[s];
          feed += v.fvm(u, m, s, t);
        }
        for (const auto& s : inst.batch_outlets(u, m)) {
          if (std::count(ins.begin(), ins.end(), s)) continue;
          FlowChange f;
          f.stream = s;
          f.fixed = v.fvm(u, m, s, t);
          f.calibrated = feed_yield == 0.0 ? 0.0 : e.yields[s] / feed_yield * feed;
          e.flows.push_back(f);
        }
        report.entries.push_back(std::move(e));
      }
    }
  }
  return report;
}

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::feed_ratio: return "feed-ratio";
    case Scenario::throughput: return "throughput";
    case Scenario::demand: return "demand";
    case Scenario::blend_property: return "blend-property";
  }
  return "?";
}

namespace {

std::optional<Scenario> scenario_of(const Residual& r) {
  auto starts = [&](const char* p) { return r.family.rfind(p, 0) == 0; };
  if (starts("ratio_") || starts("blend_ratio") || starts("cdu_feed_") || starts("crude_"))
    return Scenario::feed_ratio;
  if (starts("capacity_")) return Scenario::throughput;
  if (starts("flow_") && r.id.rfind(r.family + "(FVI,", 0) == 0) return Scenario::demand;
  if (starts("blend_") || starts("vbatch_")) return Scenario::blend_property;
  return std::nullopt;
}

// Moves calibrated batch outputs downstream. Every unit keeps the split of
// its plan: batch shares of an inlet, outlet shares of splitters and
// multi-outlet mixers and blenders, and inventory moves.
PlanSolution propagate(const BenchmarkInstance& inst, const PlanSolution& plan,
                       const CalibrationReport& calib, const BuildOptions& opts) {
  PlanSolution out = plan;
  auto periods = horizon_periods(inst, opts);
  std::map<Key3, std::map<std::string, double>> yields;  // (u, m, t) -> stream -> yield
  for (const auto& e : calib.entries) yields[Key3{e.unit, e.batch, e.period}] = e.yields;

  auto get = [&](VarKind k, std::vector<std::string> idx, const std::string& t) {
    return out.at({k, std::move(idx), t});
  };
  auto set = [&](VarKind k, std::vector<std::string> idx, const std::string& t, double x) {
    out.set({k, std::move(idx), t}, x);
  };
  View pv(inst, plan);

  for (const auto& t : periods) {
    for (std::size_t sweep = 0; sweep < inst.units.size() + 2; ++sweep) {
      double change = 0.0;
      auto assign = [&](VarKind k, std::vector<std::string> idx, double x) {
        double old = get(k, idx, t);
        change = std::max(change, std::abs(x - old) / std::max(1.0, std::abs(old)));
        set(k, std::move(idx), t, x);
      };
      for (const auto& s : inst.streams) {
        double lo = inst.storable(s) ? get(VarKind::FVLO, {s}, t) : 0.0;
        double li = inst.storable(s) ? get(VarKind::FVLI, {s}, t) : 0.0;
        assign(VarKind::FVI, {s}, get(VarKind::FVO, {s}, t) + lo - li);
      }
      for (const auto& [u, kind] : inst.units) {
        if (batched(kind)) {
          for (const auto& s : inst.inlets(u)) {
            double sum = 0.0;
            std::vector<std::string> ms;
            for (const auto& m : inst.batches_of(u))
              if (inst.im.count(Key3{u, m, s})) {
                ms.push_back(m);
                sum += pv.fvm(u, m, s, t);
              }
            double total = get(VarKind::FVI, {s}, t);
            for (const auto& m : ms) {
              double share = sum > 0 ? pv.fvm(u, m, s, t) / sum : 1.0 / static_cast<double>(ms.size());
              assign(VarKind::FVM, {u, m, s}, total * share);
            }
          }
          for (const auto& m : inst.batches_of(u)) {
            auto ins = inst.batch_inlets(u, m);
            double feed = 0.0, plan_feed = 0.0;
            for (const auto& c : ins) {
              feed += get(VarKind::FVM, {u, m, c}, t);
              plan_feed += pv.fvm(u, m, c, t);
            }
            for (const auto& s : inst.batch_outlets(u, m)) {
              if (std::count(ins.begin(), ins.end(), s)) continue;
              double x = 0.0;
              if (kind == UnitKind::cdu) {
                double total = 0.0;
                auto crudes = ins;
                auto from_cut = [&](const std::string& cut) {
                  double sum = 0.0;
                  for (const auto& c : crudes) {
                    auto y = inst.cut_yield.find(Key4{u, m, cut, c});
                    if (y != inst.cut_yield.end()) sum += y->second * get(VarKind::FVM, {u, m, c}, t);
                  }
                  return sum;
                };
                total += from_cut(s);
                for (const auto& k : inst.sc) {
                  if (k[0] != u || k[1] != m) continue;
                  double phi = inst.swing_ratio.at(k);
                  if (k[2] == s) total += phi * from_cut(k[3]);
                  if (k[3] == s) total -= phi * from_cut(s);
                }
                x = total;
              } else if (kind == UnitKind::fixed_yield || kind == UnitKind::delta_base) {
                auto cy = yields.find(Key3{u, m, t});
                auto yield = [&](const std::string& a) {
                  if (kind == UnitKind::delta_base && cy != yields.end()) return cy->second.at(a);
                  return inst.base_yield.at(Key3{u, m, a});
                };
                double fy = 0.0;
                for (const auto& c : ins) fy += yield(c);
                x = fy == 0.0 ? 0.0 : yield(s) / fy * feed;
              } else {  // mixer: outlets keep their share of the batch
                double share = plan_feed > 0 ? pv.fvm(u, m, s, t) / plan_feed
                                             : 1.0 / static_cast<double>(inst.batch_outlets(u, m).size());
                x = share * feed;
              }
              assign(VarKind::FVM, {u, m, s}, x);
            }
          }
          for (const auto& s : inst.outlets(u)) {
            double sum = 0.0;
            for (const auto& m : inst.batches_of(u))
              if (inst.om.count(Key3{u, m, s})) sum += get(VarKind::FVM, {u, m, s}, t);
            assign(VarKind::FVO, {s}, sum);
          }
        } else {
          double in = 0.0, plan_out = 0.0;
          for (const auto& s : inst.inlets(u)) in += get(VarKind::FVI, {s}, t);
          auto outs = inst.outlets(u);
          for (const auto& s : outs) plan_out += pv.fvo(s, t);
          for (const auto& s : outs) {
            double share = plan_out > 0 ? pv.fvo(s, t) / plan_out : 1.0 / static_cast<double>(outs.size());
            assign(VarKind::FVO, {s}, share * in);
          }
        }
      }
      if (change < 1e-12) break;
    }
  }
  return out;
}

}  // namespace

ScenarioReport classify_violations(const BenchmarkInstance& inst, const PlanSolution& plan,
                                   const CalibrationReport& calib, double tolerance,
                                   const BuildOptions& opts) {
  ScenarioReport report;
  report.propagated = propagate(inst, plan, calib, opts);
  auto before = check_solution(inst, plan, tolerance, opts);
  std::set<std::string> known;
  for (const auto& r : before.violations) known.insert(r.id);
  BuildOptions calibrated = opts;
  calibrated.delta_base = true;
  auto after = check_solution(inst, report.propagated, tolerance, calibrated);
  for (const auto& r : after.violations) {
    if (known.count(r.id)) continue;
    if (auto s = scenario_of(r)) report.tagged.push_back({r, *s});
    else report.unclassified.push_back(r);
  }
  return report;
}

}  // namespace refplan
