#include "refplan/superstructure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <deque>
#include <set>

#include <json.hpp>

#include "table.hpp"

namespace refplan {

const UnitNode* Network::unit(const std::string& name) const {
  auto it = std::lower_bound(units.begin(), units.end(), name,
                             [](const UnitNode& n, const std::string& v) { return n.name < v; });
  return it != units.end() && it->name == name ? &*it : nullptr;
}

const StreamRecord* Network::stream(const std::string& name) const {
  auto it = std::lower_bound(streams.begin(), streams.end(), name,
                             [](const StreamRecord& r, const std::string& v) { return r.name < v; });
  return it != streams.end() && it->name == name ? &*it : nullptr;
}

Network build_network(const BenchmarkInstance& inst) {
  Network net;
  for (const auto& [name, kind] : inst.units) {
    UnitNode node;
    node.name = name;
    node.kind = kind;
    node.inlets = inst.inlets(name);
    node.outlets = inst.outlets(name);
    for (const auto& m : inst.batches_of(name))
      node.batches.push_back({m, inst.batch_inlets(name, m), inst.batch_outlets(name, m)});
    net.units.push_back(std::move(node));
  }

  std::map<std::string, StreamRecord> records;
  for (const auto& s : inst.streams) {
    auto& r = records[s];
    r.name = s;
    r.raw_material = inst.raw_materials.count(s) > 0;
    r.product = inst.products.count(s) > 0;
    r.storable = inst.storable(s);
  }
  auto attach = [&](const std::set<Key2>& unit_level, const std::set<Key3>& batch_level,
                    auto member) {
    for (const auto& [u, s] : unit_level) {
      bool batched = false;
      for (const auto& k : batch_level) {
        if (k[0] == u && k[2] == s) {
          (records[s].*member).push_back({u, k[1]});
          batched = true;
        }
      }
      if (!batched) (records[s].*member).push_back({u, ""});
    }
  };
  attach(inst.ou, inst.om, &StreamRecord::producers);
  attach(inst.iu, inst.im, &StreamRecord::consumers);

  for (auto& [s, r] : records) {
    std::sort(r.producers.begin(), r.producers.end());
    std::sort(r.consumers.begin(), r.consumers.end());
    if (r.producers.empty() && !r.raw_material)
      throw TopologyError("orphan stream '" + s + "': no producing unit and not a raw material");
    if (r.consumers.empty() && !r.product)
      throw TopologyError("sink-less stream '" + s + "': no consuming unit and not a product");
    net.streams.push_back(std::move(r));
  }
  return net;
}

std::vector<Diagnostic> check_topology(const Network& net) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string locus, std::string msg) {
    out.push_back({Severity::error, std::move(locus), std::move(msg)});
  };
  auto warning = [&](std::string locus, std::string msg) {
    out.push_back({Severity::warning, std::move(locus), std::move(msg)});
  };

  for (const auto& r : net.streams) {
    if (r.producers.empty() && !r.raw_material) error("stream " + r.name, "orphan stream");
    if (r.consumers.empty() && !r.product) error("stream " + r.name, "no consumer");
    std::set<std::string> made, used;
    for (const auto& p : r.producers) made.insert(p.unit);
    for (const auto& p : r.consumers) used.insert(p.unit);
    for (const auto& u : made)
      if (used.count(u)) warning("stream " + r.name, "self-recycle on unit '" + u + "'");
  }

  for (const auto& u : net.units) {
    if (u.inlets.empty()) warning("unit " + u.name, "unit has no inlet streams");
    if ((u.kind == UnitKind::splitter || u.kind == UnitKind::blender) && !u.batches.empty())
      error("unit " + u.name, std::string(to_string(u.kind)) + " unit must not have batches");
    if (u.kind == UnitKind::blender && u.outlets.size() != 1)
      error("unit " + u.name, "blender must produce exactly one final product, found " +
                                  std::to_string(u.outlets.size()));
  }

  // Reachability from raw materials.
  std::set<std::string> reached_streams, reached_units;
  std::deque<std::string> queue;
  for (const auto& r : net.streams)
    if (r.raw_material) {
      reached_streams.insert(r.name);
      queue.push_back(r.name);
    }
  while (!queue.empty()) {
    auto s = queue.front();
    queue.pop_front();
    for (const auto& c : net.stream(s)->consumers) {
      if (!reached_units.insert(c.unit).second) continue;
      for (const auto& o : net.unit(c.unit)->outlets)
        if (reached_streams.insert(o).second) queue.push_back(o);
    }
  }
  for (const auto& u : net.units)
    if (!reached_units.count(u.name) && !u.inlets.empty())
      error("unit " + u.name, "unreachable from any raw material");
  return out;
}

namespace {

// Unit-level edges: weight = number of streams produced by one unit and
// consumed by the other (self-loops ignored).
std::map<std::pair<std::size_t, std::size_t>, double> unit_edges(const Network& net) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < net.units.size(); ++i) index[net.units[i].name] = i;
  std::map<std::pair<std::size_t, std::size_t>, double> edges;
  for (const auto& r : net.streams) {
    std::set<std::size_t> from, to;
    for (const auto& p : r.producers) from.insert(index.at(p.unit));
    for (const auto& p : r.consumers) to.insert(index.at(p.unit));
    for (auto a : from)
      for (auto b : to)
        if (a != b) edges[{std::min(a, b), std::max(a, b)}] += 1.0;
  }
  return edges;
}

}  // namespace

Partition spatial_partition(const Network& net, std::size_t k) {
  std::size_t n = net.units.size();
  if (k == 0 || k > n)
    throw Error("spatial_partition: k must be in [1, " + std::to_string(n) + "], got " +
                std::to_string(k));

  auto edges = unit_edges(net);
  double total = 0.0;
  for (const auto& [e, w] : edges) total += w;

  // Blocks as sorted member lists; e[i][j] = weight between blocks.
  std::vector<std::vector<std::size_t>> blocks(n);
  std::vector<std::vector<double>> between(n, std::vector<double>(n, 0.0));
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) blocks[i] = {i};
  for (const auto& [e, w] : edges) {
    between[e.first][e.second] += w;
    between[e.second][e.first] += w;
    degree[e.first] += w;
    degree[e.second] += w;
  }
  std::vector<bool> alive(n, true);
  std::size_t count = n;
  auto first_name = [&](std::size_t b) -> const std::string& {
    return net.units[blocks[b].front()].name;
  };

  while (count > k) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bi = n, bj = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        double gain = 0.0;
        if (total > 0.0)
          gain = 2.0 * (between[i][j] / (2.0 * total) -
                        (degree[i] / (2.0 * total)) * (degree[j] / (2.0 * total)));
        bool better = gain > best + 1e-12;
        if (!better && std::abs(gain - best) <= 1e-12) {
          auto cand = std::make_pair(first_name(i), first_name(j));
          auto cur = std::make_pair(first_name(bi), first_name(bj));
          better = cand < cur;
        }
        if (better) {
          best = gain;
          bi = i;
          bj = j;
        }
      }
    }
    // Merge bj into bi.
    blocks[bi].insert(blocks[bi].end(), blocks[bj].begin(), blocks[bj].end());
    std::sort(blocks[bi].begin(), blocks[bi].end());
    blocks[bj].clear();
    alive[bj] = false;
    degree[bi] += degree[bj];
    for (std::size_t x = 0; x < n; ++x) {
      between[bi][x] += between[bj][x];
      between[x][bi] = between[bi][x];
      between[bj][x] = between[x][bj] = 0.0;
    }
    between[bi][bi] = 0.0;
    --count;
  }

  Partition part;
  std::vector<std::size_t> block_of(n, 0);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) order.push_back(i);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return first_name(a) < first_name(b); });
  for (std::size_t b = 0; b < order.size(); ++b) {
    std::vector<std::string> names;
    for (auto u : blocks[order[b]]) {
      names.push_back(net.units[u].name);
      block_of[u] = b;
    }
    std::sort(names.begin(), names.end());
    part.blocks.push_back(std::move(names));
  }

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[net.units[i].name] = i;
  for (const auto& r : net.streams) {
    std::set<std::size_t> touched;
    for (const auto& p : r.producers) touched.insert(block_of[index.at(p.unit)]);
    if (touched.empty()) continue;
    bool consumed = false;
    for (const auto& p : r.consumers) {
      touched.insert(block_of[index.at(p.unit)]);
      consumed = true;
    }
    if (consumed && touched.size() > 1) part.cut_streams.push_back(r.name);
  }
  return part;
}

std::string network_to_json(const Network& net) {
  using nlohmann::json;
  json nodes = json::array();
  for (const auto& u : net.units) {
    json batches = json::array();
    for (const auto& b : u.batches)
      batches.push_back({{"name", b.name}, {"inlets", b.inlets}, {"outlets", b.outlets}});
    nodes.push_back({{"id", u.name}, {"kind", to_string(u.kind)}, {"batches", batches}});
  }
  json streams = json::array();
  json edges = json::array();
  for (const auto& r : net.streams) {
    std::string role = r.raw_material ? "raw_material" : r.product ? "product" : "intermediate";
    auto ports = [](const std::vector<Port>& ps) {
      json a = json::array();
      for (const auto& p : ps) a.push_back({{"unit", p.unit}, {"batch", p.batch}});
      return a;
    };
    streams.push_back({{"id", r.name},
                       {"role", role},
                       {"storable", r.storable},
                       {"producers", ports(r.producers)},
                       {"consumers", ports(r.consumers)}});
    std::set<std::string> from, to;
    for (const auto& p : r.producers) from.insert(p.unit);
    for (const auto& p : r.consumers) to.insert(p.unit);
    if (from.empty()) from.insert("source");
    if (to.empty()) to.insert("sink");
    for (const auto& a : from)
      for (const auto& b : to)
        edges.push_back({{"from", a}, {"to", b}, {"stream", r.name}, {"role", role}});
  }
  json doc = {{"nodes", nodes}, {"streams", streams}, {"edges", edges}};
  return doc.dump(2) + "\n";
}

void write_network_json(const Network& net, const std::filesystem::path& file) {
  detail::write_text_atomic(file, network_to_json(net));
}

}  // namespace refplan
