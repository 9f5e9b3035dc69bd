#include "refplan/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace refplan {

namespace {

bool batched_kind(UnitKind k) {
  return k == UnitKind::cdu || k == UnitKind::fixed_yield || k == UnitKind::delta_base ||
         k == UnitKind::mixer;
}

// Shared lookups for all emitters.
class Ctx {
 public:
  Ctx(const BenchmarkInstance& inst, const BuildOptions& opts, AlgebraicModel& model)
      : inst(inst), opts(opts), model(model), periods(horizon_periods(inst, opts)) {}

  const BenchmarkInstance& inst;
  const BuildOptions& opts;
  AlgebraicModel& model;
  std::vector<std::string> periods;

  VarId var(VarKind kind, std::vector<std::string> index, const std::string& t) const {
    return model.at(VarKey{kind, std::move(index), t});
  }
  std::optional<VarId> try_var(VarKind kind, std::vector<std::string> index,
                               const std::string& t) const {
    return model.find(VarKey{kind, std::move(index), t});
  }
  VarId fvi(const std::string& s, const std::string& t) const { return var(VarKind::FVI, {s}, t); }
  VarId fvo(const std::string& s, const std::string& t) const { return var(VarKind::FVO, {s}, t); }
  VarId fvm(const std::string& u, const std::string& m, const std::string& s,
            const std::string& t) const {
    return var(VarKind::FVM, {u, m, s}, t);
  }
  VarId fq(const std::string& s, const std::string& q, const std::string& t) const {
    auto v = try_var(VarKind::FQ, {s, q}, t);
    if (!v) throw ModelError("quality " + q + " of stream " + s + " is not tracked (SQ/FIX)");
    return *v;
  }

  bool delta_active(const std::string& u) const {
    return opts.delta_base && inst.is_unit(u, UnitKind::delta_base);
  }

  // CDU outlets whose SPG is a free variable get an outlet volume variable.
  bool has_outlet_volume(const std::string& s) const {
    return inst.sq.count(Key2{s, kSpg}) && !inst.is_fixed(s, kSpg);
  }

  void add(std::string family, std::vector<std::string> index, Expr e, Sense sense,
           std::optional<VarId> defines = std::nullopt) {
    Constraint c;
    c.family = std::move(family);
    c.index = std::move(index);
    c.expr = std::move(e);
    c.sense = sense;
    c.defines = defines;
    add_constraint(model, std::move(c));
  }

  // lo·basis <= activity <= hi·basis as two one-sided rows; infinite
  // sides are skipped.
  void window(const std::string& family, const std::vector<std::string>& index,
              const Expr& activity, const Expr& basis, Bounds b) {
    if (std::isfinite(b.lo)) {
      Expr e = activity;
      e.add(-b.lo, basis);
      add(family + "_lo", index, std::move(e), Sense::ge);
    }
    if (std::isfinite(b.hi)) {
      Expr e = activity;
      e.add(-b.hi, basis);
      add(family + "_hi", index, std::move(e), Sense::le);
    }
  }

  double param(const std::map<Key3, double>& map, const Key3& k, const char* name) const {
    auto it = map.find(k);
    if (it == map.end())
      throw ModelError(std::string("missing ") + name + "(" + k[0] + "," + k[1] + "," + k[2] + ")");
    return it->second;
  }
  double param(const std::map<Key4, double>& map, const Key4& k, const char* name) const {
    auto it = map.find(k);
    if (it == map.end())
      throw ModelError(std::string("missing ") + name + "(" + k[0] + "," + k[1] + "," + k[2] +
                       "," + k[3] + ")");
    return it->second;
  }
};

}  // namespace

std::vector<std::string> horizon_periods(const BenchmarkInstance& inst, const BuildOptions& opts) {
  if (!opts.horizon) return inst.periods;
  if (*opts.horizon > inst.periods.size())
    throw ModelError("horizon of " + std::to_string(*opts.horizon) + " periods exceeds |T| = " +
                     std::to_string(inst.periods.size()));
  return {inst.periods.begin(), inst.periods.begin() + static_cast<long>(*opts.horizon)};
}

std::string family_group(const std::string& family) {
  static const std::vector<std::pair<std::string, std::string>> prefixes = {
      {"batch_", "material_balance"},     {"mixer_balance", "material_balance"},
      {"unit_balance", "material_balance"}, {"cdu_", "cdu"},
      {"crude_", "cdu"},                  {"pf_", "process_unit"},
      {"pd_", "process_unit"},            {"transfer", "process_unit"},
      {"mixer_", "mixing"},               {"stream_volume", "mixing"},
      {"vbatch_", "mixing"},              {"ratio_", "mixing"},
      {"split_", "mixing"},               {"blend_", "blender"},
      {"stream_balance", "inventory"},    {"inventory_", "inventory"},
      {"capacity_", "capacity"},
  };
  for (const auto& [p, g] : prefixes)
    if (family.rfind(p, 0) == 0) return g;
  return "plumbing";
}

void declare_variables(const BenchmarkInstance& inst, const BuildOptions& opts,
                       AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  Bounds free{-kInf, kInf};
  Bounds nonneg{0.0, kInf};

  std::set<Key3> batch_streams;  // (u, m, s) of batched units
  for (const auto* set : {&inst.im, &inst.om})
    for (const auto& k : *set)
      if (batched_kind(inst.units.at(k[0]))) batch_streams.insert(k);

  std::set<Key2> tracked(inst.sq.begin(), inst.sq.end());
  for (const auto& [k, v] : inst.fixed) tracked.insert(k);

  std::set<std::string> volume_streams;  // V(s)
  for (const auto& [u, kind] : inst.units)
    if (kind == UnitKind::blender)
      for (const auto& s : inst.inlets(u))
        if (inst.sq.count(Key2{s, kSpg}) || inst.is_fixed(s, kSpg)) volume_streams.insert(s);
  for (const auto& [k, w] : inst.virtual_batches) {
    if (!inst.is_unit(k[0], UnitKind::mixer)) continue;
    auto cls = inst.quality_class(k[3]);
    if (cls == QualityClass::spg || cls == QualityClass::volume) volume_streams.insert(k[2]);
  }

  std::set<std::string> outlet_volume;  // V(s, "out") for CDU outlets
  for (const auto& [u, s] : inst.ou)
    if (inst.is_unit(u, UnitKind::cdu) && ctx.has_outlet_volume(s)) outlet_volume.insert(s);

  for (const auto& t : ctx.periods) {
    for (const auto& s : inst.streams) {
      Bounds in = nonneg, out = nonneg;
      if (inst.products.count(s)) in = inst.flow(s, t);
      if (inst.raw_materials.count(s)) out = inst.flow(s, t);
      add_variable(model, VarKind::FVI, {s}, t, in);
      add_variable(model, VarKind::FVO, {s}, t, out);
    }
    for (const auto& s : inst.streams) {
      if (!inst.storable(s)) continue;
      add_variable(model, VarKind::FVLI, {s}, t, nonneg);
      add_variable(model, VarKind::FVLO, {s}, t, nonneg);
      add_variable(model, VarKind::L, {s}, t, inst.inventory(s, t));
      if (opts.inventory_binaries) add_variable(model, VarKind::X, {s}, t, {0.0, 1.0}, true);
    }
    for (const auto& k : batch_streams)
      add_variable(model, VarKind::FVM, {k[0], k[1], k[2]}, t, nonneg);
    for (const auto& k : tracked) {
      auto fix = inst.fixed.find(k);
      if (fix != inst.fixed.end()) {
        auto id = add_variable(model, VarKind::FQ, {k[0], k[1]}, t, {fix->second, fix->second});
        model.variables[id].fixed = true;
        continue;
      }
      auto b = inst.quality_bounds.find(k);
      // Qualities are physical magnitudes; without a declared window they
      // are only known to be nonnegative.
      add_variable(model, VarKind::FQ, {k[0], k[1]}, t,
                   b == inst.quality_bounds.end() ? nonneg : b->second);
    }
    if (opts.delta_base)
      for (const auto& k : batch_streams)
        if (inst.is_unit(k[0], UnitKind::delta_base))
          add_variable(model, VarKind::Gamma, {k[0], k[1], k[2]}, t, free);
    for (const auto& k : batch_streams)
      if (inst.is_unit(k[0], UnitKind::mixer) && tracked.count(Key2{k[2], kSpg}))
        add_variable(model, VarKind::VM, {k[0], k[1], k[2]}, t, nonneg);
    for (const auto& s : volume_streams) add_variable(model, VarKind::V, {s}, t, nonneg);
    for (const auto& s : outlet_volume) add_variable(model, VarKind::V, {s, "out"}, t, nonneg);
  }
}

// ---------------------------------------------------------------------------

void emit_material_balance(const BenchmarkInstance& inst, const BuildOptions& opts,
                           AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  for (const auto& [u, kind] : inst.units) {
    bool has_streams = !inst.inlets(u).empty() || !inst.outlets(u).empty();
    if (batched_kind(kind) && has_streams && inst.batches_of(u).empty())
      throw ModelError("unit '" + u + "' has no IM/OM batch rows");
  }
  for (const auto& t : ctx.periods) {
    for (const auto& [u, kind] : inst.units) {
      if (batched_kind(kind)) {
        for (const auto& s : inst.inlets(u)) {
          Expr e;
          e.add(1.0, ctx.fvi(s, t));
          for (const auto& m : inst.batches_of(u))
            if (inst.im.count(Key3{u, m, s})) e.add(-1.0, ctx.fvm(u, m, s, t));
          ctx.add("batch_in", {u, s, t}, std::move(e), Sense::eq);
        }
        for (const auto& s : inst.outlets(u)) {
          Expr e;
          e.add(1.0, ctx.fvo(s, t));
          for (const auto& m : inst.batches_of(u))
            if (inst.om.count(Key3{u, m, s})) e.add(-1.0, ctx.fvm(u, m, s, t));
          ctx.add("batch_out", {u, s, t}, std::move(e), Sense::eq);
        }
      }
      if (kind == UnitKind::mixer) {
        for (const auto& m : inst.batches_of(u)) {
          Expr e;
          for (const auto& s : inst.batch_inlets(u, m)) e.add(1.0, ctx.fvm(u, m, s, t));
          for (const auto& s : inst.batch_outlets(u, m)) e.add(-1.0, ctx.fvm(u, m, s, t));
          ctx.add("mixer_balance", {u, m, t}, std::move(e), Sense::eq);
        }
      }
      if (kind == UnitKind::splitter || kind == UnitKind::blender) {
        Expr e;
        for (const auto& s : inst.inlets(u)) e.add(1.0, ctx.fvi(s, t));
        for (const auto& s : inst.outlets(u)) e.add(-1.0, ctx.fvo(s, t));
        ctx.add("unit_balance", {u, t}, std::move(e), Sense::eq);
      }
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

// Swing-cut output of stream s in batch (u, m), with every crude term
// scaled by factor(cut, crude). `cut` is the cut the crude fraction comes
// from: s itself for the base yield and the donated share, the swing cut
// for received shares.
template <class Factor>
void add_cut_terms(const Ctx& ctx, Expr& e, double sign, const std::string& u,
                   const std::string& m, const std::string& s, const std::string& t,
                   Factor factor) {
  const auto& inst = ctx.inst;
  auto crudes = inst.batch_inlets(u, m);
  auto yield = [&](const std::string& cut, const std::string& crude) -> std::optional<double> {
    auto it = inst.cut_yield.find(Key4{u, m, cut, crude});
    if (it == inst.cut_yield.end()) return std::nullopt;
    return it->second;
  };
  for (const auto& c : crudes)
    if (auto y = yield(s, c)) e.add(sign * *y * factor(s, c), ctx.fvm(u, m, c, t));
  for (const auto& sc : inst.sc) {
    if (sc[0] != u || sc[1] != m) continue;
    double phi = ctx.param(inst.swing_ratio, sc, "phi");
    if (sc[2] == s) {  // s receives swing cut sc[3]
      for (const auto& c : crudes)
        if (auto y = yield(sc[3], c))
          e.add(sign * *y * phi * factor(sc[3], c), ctx.fvm(u, m, c, t));
    }
    if (sc[3] == s) {  // s is the swing cut, donating to sc[2]
      for (const auto& c : crudes)
        if (auto y = yield(s, c)) e.add(-sign * *y * phi * factor(s, c), ctx.fvm(u, m, c, t));
    }
  }
}

}  // namespace

void emit_cdu_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                          AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  auto cdus = inst.units_of(UnitKind::cdu);
  auto cut = [&](const std::string& m, const std::string& s, const std::string& c,
                 const std::string& q) { return ctx.param(inst.cut_quality, Key4{m, s, c, q}, "FQ_CUT"); };
  auto crude = [&](const std::string& m, const std::string& s, const std::string& q) {
    return ctx.param(inst.crude_quality, Key3{m, s, q}, "FQ_CRD");
  };

  for (const auto& t : ctx.periods) {
    for (const auto& u : cdus) {
      for (const auto& m : inst.batches_of(u)) {
        for (const auto& s : inst.batch_outlets(u, m)) {
          Expr e;
          e.add(1.0, ctx.fvm(u, m, s, t));
          add_cut_terms(ctx, e, -1.0, u, m, s, t, [](auto&, auto&) { return 1.0; });
          ctx.add("cdu_yield", {u, m, s, t}, std::move(e), Sense::eq);
        }
      }

      for (const auto& s : inst.outlets(u)) {
        std::vector<std::string> batches;
        for (const auto& m : inst.batches_of(u))
          if (inst.om.count(Key3{u, m, s})) batches.push_back(m);
        // Right-hand side summed over the batches producing s.
        auto rhs = [&](auto factor) {
          Expr r;
          for (const auto& m : batches)
            add_cut_terms(ctx, r, 1.0, u, m, s, t,
                          [&](const std::string& a, const std::string& c) { return factor(m, a, c); });
          return r;
        };

        // Outlet volume: a variable when SPG is free, FVO/FQ0 when fixed.
        std::optional<Expr> volume;
        if (ctx.has_outlet_volume(s)) {
          VarId vout = ctx.var(VarKind::V, {s, "out"}, t);
          Expr def;
          def.add(1.0, vout);
          def.add(-1.0, rhs([&](auto& m, auto& a, auto& c) { return 1.0 / cut(m, a, c, kSpg); }));
          ctx.add("cdu_volume", {u, s, t}, std::move(def), Sense::eq, vout);
          VarId spg = ctx.fq(s, kSpg, t);
          Expr e;
          e.add(1.0, vout, spg);
          e.add(-1.0, ctx.fvo(s, t));
          ctx.add("cdu_spg", {u, s, t}, std::move(e), Sense::eq, spg);
          volume = Expr{};
          volume->add(1.0, vout);
        } else if (inst.is_fixed(s, kSpg)) {
          volume = Expr{};
          volume->add(1.0 / inst.fixed.at(Key2{s, kSpg}), ctx.fvo(s, t));
        }

        for (auto it = inst.sq.lower_bound(Key2{s, ""}); it != inst.sq.end() && (*it)[0] == s; ++it) {
          const auto& q = (*it)[1];
          if (inst.is_fixed(s, q)) continue;
          auto cls = inst.quality_class(q);
          if (cls == QualityClass::volume) {
            if (!volume)
              throw ModelError("CDU outlet " + s + " has volume-based quality " + q +
                               " but no specific gravity");
            VarId fq = ctx.fq(s, q, t);
            Expr e;
            for (const auto& term : volume->linear) e.add(term.coef, fq, term.var);
            e.add(-1.0, rhs([&](auto& m, auto& a, auto& c) {
              return cut(m, a, c, q) / cut(m, a, c, kSpg);
            }));
            ctx.add("cdu_vol_quality", {u, s, q, t}, std::move(e), Sense::eq, fq);
          } else if (cls == QualityClass::weight) {
            VarId fq = ctx.fq(s, q, t);
            Expr e;
            e.add(1.0, ctx.fvo(s, t), fq);
            e.add(-1.0, rhs([&](auto& m, auto& a, auto& c) { return cut(m, a, c, q); }));
            ctx.add("cdu_wt_quality", {u, s, q, t}, std::move(e), Sense::eq, fq);
          }
        }
      }
    }

    // Feed windows per CDU batch.
    for (const auto& k : inst.cdu_controlled) {
      const auto& [u, m, q] = k;
      auto b = inst.batch_quality_bounds.find(k);
      if (b == inst.batch_quality_bounds.end()) continue;
      auto cls = inst.quality_class(q);
      if (cls == QualityClass::percentage) continue;
      const std::string& filter = cls == QualityClass::weight ? q : std::string(kSpg);
      Expr activity, basis;
      for (const auto& s : inst.batch_inlets(u, m)) {
        if (!inst.tracked(s, filter)) continue;
        VarId f = ctx.fvm(u, m, s, t);
        if (cls == QualityClass::spg) {
          activity.add(1.0, f);
          basis.add(1.0 / crude(m, s, kSpg), f);
        } else if (cls == QualityClass::volume) {
          activity.add(crude(m, s, q) / crude(m, s, kSpg), f);
          basis.add(1.0 / crude(m, s, kSpg), f);
        } else {
          activity.add(crude(m, s, q), f);
          basis.add(1.0, f);
        }
      }
      ctx.window("cdu_feed", {u, m, q, t}, activity, basis, b->second);
    }

    // Plant-wide crude windows.
    for (const auto& q : inst.crude_controlled) {
      auto b = inst.crude_quality_bounds.find(q);
      if (b == inst.crude_quality_bounds.end()) continue;
      auto cls = inst.quality_class(q);
      if (cls == QualityClass::percentage) continue;
      Expr activity, basis;
      for (const auto& u : cdus) {
        for (const auto& m : inst.batches_of(u)) {
          for (const auto& s : inst.batch_inlets(u, m)) {
            VarId f = ctx.fvm(u, m, s, t);
            if (cls == QualityClass::spg) {
              activity.add(1.0, f);
              basis.add(1.0 / crude(m, s, kSpg), f);
            } else if (cls == QualityClass::volume) {
              activity.add(crude(m, s, q) / crude(m, s, kSpg), f);
              basis.add(1.0 / crude(m, s, kSpg), f);
            } else {
              activity.add(crude(m, s, q), f);
              basis.add(1.0, f);
            }
          }
        }
      }
      ctx.window("crude", {q, t}, activity, basis, b->second);
    }
  }
}

// ---------------------------------------------------------------------------

void emit_process_unit_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                                   AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  for (const auto& t : ctx.periods) {
    for (const auto& [u, kind] : inst.units) {
      if (kind != UnitKind::fixed_yield && kind != UnitKind::delta_base) continue;
      for (const auto& m : inst.batches_of(u)) {
        auto ins = inst.batch_inlets(u, m);
        std::vector<std::string> members = ins;
        for (const auto& s : inst.batch_outlets(u, m))
          if (!std::count(members.begin(), members.end(), s)) members.push_back(s);
        std::sort(members.begin(), members.end());

        if (!ctx.delta_active(u)) {
          double feed = 0.0;
          for (const auto& s : ins) feed += ctx.param(inst.base_yield, Key3{u, m, s}, "gamma");
          if (feed == 0.0) throw ModelError("inlet base yields of " + u + "/" + m + " sum to zero");
          for (const auto& s : members) {
            double g = ctx.param(inst.base_yield, Key3{u, m, s}, "gamma");
            Expr e;
            e.add(1.0, ctx.fvm(u, m, s, t));
            for (const auto& c : ins) e.add(-g / feed, ctx.fvm(u, m, c, t));
            ctx.add("pf_yield", {u, m, s, t}, std::move(e), Sense::eq);
          }
          continue;
        }

        for (const auto& s : members) {
          VarId gamma = ctx.var(VarKind::Gamma, {u, m, s}, t);
          Expr e;
          e.add(1.0, gamma);
          e.add(-ctx.param(inst.base_yield, Key3{u, m, s}, "gamma"));
          for (const auto& link : inst.delta_links) {
            if (link[0] != u || link[1] != m) continue;
            const auto& feed = link[2];
            const auto& q = link[3];
            auto d = inst.yield_sensitivity.find(Key4{u, m, s, q});
            if (d == inst.yield_sensitivity.end()) continue;
            double step = ctx.param(inst.delta_step, Key3{u, m, q}, "Delta");
            if (step == 0.0) throw ModelError("zero Delta(" + u + "," + m + "," + q + ")");
            double base = ctx.param(inst.base_property, Key3{u, m, q}, "B");
            if (!inst.tracked(feed, q))
              throw ModelError("DBSQ(" + u + "," + m + "," + feed + "," + q +
                               ") references an untracked quality");
            double k = d->second / step;
            e.add(-k, ctx.fq(feed, q, t));
            e.add(k * base);
          }
          ctx.add("pd_delta", {u, m, s, t}, std::move(e), Sense::eq, gamma);
        }
        for (const auto& s : members) {
          Expr e;
          VarId flow = ctx.fvm(u, m, s, t);
          VarId gamma = ctx.var(VarKind::Gamma, {u, m, s}, t);
          for (const auto& c : ins) {
            e.add(1.0, flow, ctx.var(VarKind::Gamma, {u, m, c}, t));
            e.add(-1.0, gamma, ctx.fvm(u, m, c, t));
          }
          ctx.add("pd_yield", {u, m, s, t}, std::move(e), Sense::eq);
        }
      }
    }

    for (const auto& [k, alpha] : inst.transfer) {
      const auto& [s, s2, q] = k;
      if (!inst.tracked(s, q) || inst.is_fixed(s2, q)) continue;
      VarId target = ctx.fq(s2, q, t);
      Expr e;
      e.add(1.0, target);
      e.add(-alpha, ctx.fq(s, q, t));
      ctx.add("transfer", {s, s2, q, t}, std::move(e), Sense::eq, target);
    }
  }
}

// ---------------------------------------------------------------------------

void emit_mixing_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                             AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  for (const auto& [k, w] : inst.virtual_batches) {
    auto kind = inst.units.at(k[0]);
    bool process = kind == UnitKind::fixed_yield || kind == UnitKind::delta_base;
    if (kind != UnitKind::mixer && !process)
      throw ModelError("VMQ entry on unit '" + k[0] + "', which is neither mixer nor process unit");
    if (process && inst.quality_class(k[3]) != QualityClass::percentage)
      throw ModelError("VMQ entry on process unit '" + k[0] + "' must use a Q_P quality");
  }

  std::set<std::string> defined_volume;
  for (const auto& t : ctx.periods) {
    defined_volume.clear();
    for (const auto& u : inst.units_of(UnitKind::mixer)) {
      for (const auto& m : inst.batches_of(u)) {
        auto ins = inst.batch_inlets(u, m);
        auto outs = inst.batch_outlets(u, m);
        for (const auto& s : ins) {
          auto vm = ctx.try_var(VarKind::VM, {u, m, s}, t);
          if (!vm) continue;
          Expr e;
          e.add(1.0, *vm, ctx.fq(s, kSpg, t));
          e.add(-1.0, ctx.fvm(u, m, s, t));
          ctx.add("mixer_volume", {u, m, s, t}, std::move(e), Sense::eq, *vm);
        }
        for (const auto& s : outs) {
          auto vm = ctx.try_var(VarKind::VM, {u, m, s}, t);
          if (!vm) continue;
          bool fixed_spg = inst.is_fixed(s, kSpg);
          VarId spg = ctx.fq(s, kSpg, t);
          Expr def;
          def.add(1.0, *vm, spg);
          def.add(-1.0, ctx.fvm(u, m, s, t));
          ctx.add("mixer_volume", {u, m, s, t}, std::move(def), Sense::eq,
                  fixed_spg ? *vm : spg);
          Expr bal;
          bal.add(1.0, *vm);
          for (const auto& c : ins) {
            auto vin = ctx.try_var(VarKind::VM, {u, m, c}, t);
            if (!vin)
              throw ModelError("mixer " + u + "/" + m + ": inlet " + c +
                               " has no specific gravity for the volume balance");
            bal.add(-1.0, *vin);
          }
          ctx.add("mixer_volume_balance", {u, m, s, t}, std::move(bal), Sense::eq,
                  fixed_spg ? std::nullopt : std::optional<VarId>(*vm));
        }
        for (const auto& s : outs) {
          for (auto it = inst.sq.lower_bound(Key2{s, ""}); it != inst.sq.end() && (*it)[0] == s;
               ++it) {
            const auto& q = (*it)[1];
            if (inst.is_fixed(s, q)) continue;
            auto cls = inst.quality_class(q);
            if (cls != QualityClass::volume && cls != QualityClass::weight) continue;
            VarKind basis = cls == QualityClass::volume ? VarKind::VM : VarKind::FVM;
            auto carrier = [&](const std::string& x) {
              auto v = ctx.try_var(basis, {u, m, x}, t);
              if (!v)
                throw ModelError("mixer " + u + "/" + m + ": stream " + x +
                                 " lacks the volume needed to pool " + q);
              return *v;
            };
            VarId fq = ctx.fq(s, q, t);
            Expr e;
            e.add(1.0, carrier(s), fq);
            for (const auto& c : ins) e.add(-1.0, carrier(c), ctx.fq(c, q, t));
            ctx.add(cls == QualityClass::volume ? "mixer_vol_quality" : "mixer_wt_quality",
                    {u, m, s, q, t}, std::move(e), Sense::eq, fq);
          }
        }
      }
    }

    // Virtual batches, grouped by (u, m, q).
    std::map<Key3, std::vector<std::pair<std::string, double>>> groups;
    for (const auto& [k, w] : inst.virtual_batches)
      groups[Key3{k[0], k[1], k[3]}].push_back({k[2], w});
    auto volume_of = [&](const std::string& s) {
      VarId v = ctx.var(VarKind::V, {s}, t);
      if (defined_volume.insert(s).second) {
        Expr e;
        e.add(1.0, v, ctx.fq(s, kSpg, t));
        e.add(-1.0, ctx.fvi(s, t));
        ctx.add("stream_volume", {s, t}, std::move(e), Sense::eq, v);
      }
      return v;
    };
    for (const auto& [g, members] : groups) {
      const auto& [u, m, q] = g;
      auto b = inst.batch_quality_bounds.find(g);
      if (b == inst.batch_quality_bounds.end()) continue;
      auto cls = inst.quality_class(q);
      Expr activity, basis;
      if (cls == QualityClass::percentage) {
        for (const auto& [s, w] : members) activity.add(w, ctx.fvi(s, t));
        for (const auto& s : inst.inlets(u)) basis.add(1.0, ctx.fvi(s, t));
        ctx.window("ratio", {u, m, q, t}, activity, basis, b->second);
        continue;
      }
      for (const auto& [s, w] : members) {
        if (cls == QualityClass::spg) {
          activity.add(1.0, ctx.fvi(s, t));
          basis.add(1.0, volume_of(s));
        } else if (cls == QualityClass::volume) {
          VarId v = volume_of(s);
          activity.add(1.0, v, ctx.fq(s, q, t));
          basis.add(1.0, v);
        } else {
          VarId f = ctx.fvi(s, t);
          activity.add(1.0, f, ctx.fq(s, q, t));
          basis.add(1.0, f);
        }
      }
      ctx.window("vbatch", {u, m, q, t}, activity, basis, b->second);
    }

    for (const auto& u : inst.units_of(UnitKind::splitter)) {
      for (const auto& s : inst.inlets(u)) {
        std::set<std::string> qs;
        for (auto it = inst.sq.lower_bound(Key2{s, ""}); it != inst.sq.end() && (*it)[0] == s; ++it)
          qs.insert((*it)[1]);
        for (auto it = inst.fixed.lower_bound(Key2{s, ""});
             it != inst.fixed.end() && it->first[0] == s; ++it)
          qs.insert(it->first[1]);
        for (const auto& q : qs) {
          for (const auto& o : inst.outlets(u)) {
            VarId target = ctx.fq(o, q, t);
            Expr e;
            e.add(1.0, target);
            e.add(-1.0, ctx.fq(s, q, t));
            ctx.add("split_quality", {u, s, o, q, t}, std::move(e), Sense::eq,
                    inst.is_fixed(o, q) ? std::nullopt : std::optional<VarId>(target));
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------

void emit_blender_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                              AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  std::set<std::string> already;  // stream_volume rows emitted by the mixing pass
  for (const auto& c : model.constraints)
    if (c.family == "stream_volume") already.insert(c.id());

  for (const auto& t : ctx.periods) {
    for (const auto& u : inst.units_of(UnitKind::blender)) {
      auto ins = inst.inlets(u);
      for (const auto& s : ins) {
        auto v = ctx.try_var(VarKind::V, {s}, t);
        if (!v) continue;
        Constraint probe;
        probe.family = "stream_volume";
        probe.index = {s, t};
        if (already.count(probe.id())) continue;
        Expr e;
        e.add(1.0, *v, ctx.fq(s, kSpg, t));
        e.add(-1.0, ctx.fvi(s, t));
        ctx.add("stream_volume", {s, t}, std::move(e), Sense::eq, *v);
        already.insert(probe.id());
      }

      for (auto it = inst.blend_spec.lower_bound(Key2{u, ""});
           it != inst.blend_spec.end() && it->first[0] == u; ++it) {
        const auto& q = it->first[1];
        auto cls = inst.quality_class(q);
        if (cls == QualityClass::percentage) continue;
        Expr activity, basis;
        for (const auto& s : ins) {
          auto volume = [&] {
            auto v = ctx.try_var(VarKind::V, {s}, t);
            if (!v)
              throw ModelError("blender " + u + ": inlet " + s + " has no specific gravity");
            return *v;
          };
          if (cls == QualityClass::spg) {
            activity.add(1.0, ctx.fvi(s, t));
            basis.add(1.0, volume());
          } else if (cls == QualityClass::volume) {
            VarId v = volume();
            activity.add(1.0, v, ctx.fq(s, q, t));
            basis.add(1.0, v);
          } else {
            VarId f = ctx.fvi(s, t);
            activity.add(1.0, f, ctx.fq(s, q, t));
            basis.add(1.0, f);
          }
        }
        ctx.window("blend", {u, q, t}, activity, basis, it->second);
      }

      if (inst.proportional_blenders.count(u)) {
        for (const auto& o : inst.outlets(u)) {
          for (const auto& s : ins) {
            auto beta = inst.blend_ratio.find(Key2{o, s});
            if (beta == inst.blend_ratio.end())
              throw ModelError("proportional blender " + u + " has no beta(" + o + "," + s + ")");
            Expr e;
            e.add(1.0, ctx.fvi(s, t));
            e.add(-beta->second, ctx.fvo(o, t));
            ctx.add("blend_ratio", {u, o, s, t}, std::move(e), Sense::eq);
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------

void emit_inventory_constraints(const BenchmarkInstance& inst, const BuildOptions& opts,
                                AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  for (std::size_t i = 0; i < ctx.periods.size(); ++i) {
    const auto& t = ctx.periods[i];
    for (const auto& s : inst.streams) {
      bool storable = inst.storable(s);
      Expr e;
      e.add(1.0, ctx.fvo(s, t));
      e.add(-1.0, ctx.fvi(s, t));
      if (storable) {
        e.add(1.0, ctx.var(VarKind::FVLO, {s}, t));
        e.add(-1.0, ctx.var(VarKind::FVLI, {s}, t));
      }
      ctx.add("stream_balance", {s, t}, std::move(e), Sense::eq);
      if (!storable) continue;

      VarId level = ctx.var(VarKind::L, {s}, t);
      VarId in = ctx.var(VarKind::FVLI, {s}, t);
      VarId out = ctx.var(VarKind::FVLO, {s}, t);
      Expr rec;
      rec.add(1.0, level);
      rec.add(-1.0, in);
      rec.add(1.0, out);
      if (i == 0) {
        auto l0 = inst.initial_inventory.find(s);
        rec.add(-(l0 == inst.initial_inventory.end() ? 0.0 : l0->second));
      } else {
        rec.add(-1.0, ctx.var(VarKind::L, {s}, ctx.periods[i - 1]));
      }
      ctx.add("inventory_level", {s, t}, std::move(rec), Sense::eq, level);

      if (!opts.inventory_binaries) continue;
      double cap = inst.inventory(s, t).hi;
      if (!std::isfinite(cap))
        throw ModelError("storable stream " + s + " has no finite maximum level in period " + t);
      VarId x = ctx.var(VarKind::X, {s}, t);
      Expr a;
      a.add(1.0, out);
      a.add(-cap, x);
      ctx.add("inventory_out_flag", {s, t}, std::move(a), Sense::le);
      Expr b;
      b.add(1.0, in);
      b.add(cap, x);
      b.add(-cap);
      ctx.add("inventory_in_flag", {s, t}, std::move(b), Sense::le);
    }
  }
}

void emit_capacity_and_bounds(const BenchmarkInstance& inst, const BuildOptions& opts,
                              AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  for (const auto& c : inst.capacities) {
    auto it = inst.capacity_streams.lower_bound(Key2{c, ""});
    if (it == inst.capacity_streams.end() || (*it)[0] != c)
      throw ModelError("capacity index '" + c + "' has no CAPS streams");
  }
  for (const auto& t : ctx.periods) {
    for (const auto& c : inst.capacities) {
      auto b = inst.capacity_bounds.find(Key2{c, t});
      if (b == inst.capacity_bounds.end()) continue;
      for (bool inlet : {true, false}) {
        if (!(inlet ? inst.capacity_in : inst.capacity_out).count(c)) continue;
        Expr sum, one;
        for (auto it = inst.capacity_streams.lower_bound(Key2{c, ""});
             it != inst.capacity_streams.end() && (*it)[0] == c; ++it)
          sum.add(1.0, inlet ? ctx.fvi((*it)[1], t) : ctx.fvo((*it)[1], t));
        one.add(1.0);
        ctx.window(inlet ? "capacity_in" : "capacity_out", {c, t}, sum, one, b->second);
      }
    }
  }
}

void emit_objective(const BenchmarkInstance& inst, const BuildOptions& opts,
                    AlgebraicModel& model) {
  Ctx ctx(inst, opts, model);
  auto coef = [](const std::map<std::string, double>& m, const std::string& s) {
    auto it = m.find(s);
    return it == m.end() ? 0.0 : it->second;
  };
  for (const auto& s : inst.products)
    if (!inst.price_product.count(s)) throw ModelError("product '" + s + "' has no price cP");
  for (const auto& s : inst.raw_materials)
    if (!inst.price_material.count(s)) throw ModelError("raw material '" + s + "' has no cost cM");

  Expr obj;
  for (const auto& t : ctx.periods) {
    for (const auto& s : inst.products) {
      obj.add(inst.price_product.at(s), ctx.fvi(s, t));
      if (inst.storable(s)) {
        obj.add(coef(inst.inventory_price_product, s), ctx.var(VarKind::FVLI, {s}, t));
        obj.add(-coef(inst.inventory_price_material, s), ctx.var(VarKind::FVLO, {s}, t));
      }
    }
    for (const auto& s : inst.raw_materials) {
      obj.add(-inst.price_material.at(s), ctx.fvo(s, t));
      if (inst.storable(s)) {
        obj.add(-coef(inst.inventory_price_material, s), ctx.var(VarKind::FVLO, {s}, t));
        obj.add(coef(inst.inventory_price_product, s), ctx.var(VarKind::FVLI, {s}, t));
      }
    }
  }
  model.objective = std::move(obj);
}

AlgebraicModel build_model(const BenchmarkInstance& inst, const BuildOptions& opts) {
  AlgebraicModel model;
  declare_variables(inst, opts, model);
  emit_material_balance(inst, opts, model);
  emit_cdu_constraints(inst, opts, model);
  emit_process_unit_constraints(inst, opts, model);
  emit_mixing_constraints(inst, opts, model);
  emit_blender_constraints(inst, opts, model);
  emit_inventory_constraints(inst, opts, model);
  emit_capacity_and_bounds(inst, opts, model);
  emit_objective(inst, opts, model);
  return canonicalize(model);
}

}  // namespace refplan
