#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "refplan/schema.hpp"

namespace refplan {

/// Where a stream attaches to a unit. `batch` is empty for unit-level
/// membership (splitters, blenders).
struct Port {
  std::string unit;
  std::string batch;
  friend auto operator<=>(const Port&, const Port&) = default;
};

struct StreamRecord {
  std::string name;
  std::vector<Port> producers;  // OU, refined to OM batches where present
  std::vector<Port> consumers;  // IU, refined to IM batches where present
  bool raw_material = false;
  bool product = false;
  bool storable = false;

  friend bool operator==(const StreamRecord&, const StreamRecord&) = default;
};

struct BatchGroup {
  std::string name;
  std::vector<std::string> inlets;
  std::vector<std::string> outlets;
  friend bool operator==(const BatchGroup&, const BatchGroup&) = default;
};

struct UnitNode {
  std::string name;
  UnitKind kind = UnitKind::mixer;
  std::vector<std::string> inlets;
  std::vector<std::string> outlets;
  std::vector<BatchGroup> batches;
  friend bool operator==(const UnitNode&, const UnitNode&) = default;
};

/// Port-stream topology of an instance. Units and streams are sorted by name.
struct Network {
  std::vector<UnitNode> units;
  std::vector<StreamRecord> streams;

  const UnitNode* unit(const std::string& name) const;
  const StreamRecord* stream(const std::string& name) const;

  friend bool operator==(const Network&, const Network&) = default;
};

/// Thrown for streams that have no producer (and are not raw materials) or
/// no consumer (and are not products).
class TopologyError : public Error {
 public:
  using Error::Error;
};

Network build_network(const BenchmarkInstance& inst);

std::vector<Diagnostic> check_topology(const Network& net);

struct Partition {
  std::vector<std::vector<std::string>> blocks;  // unit names, each block sorted
  std::vector<std::string> cut_streams;          // streams linking units of different blocks
};

/// Greedy modularity agglomeration of the unit graph (units linked by the
/// streams one produces and another consumes) down to exactly k blocks.
Partition spatial_partition(const Network& net, std::size_t k);

/// Node list plus stream edge list as JSON, for graph viewers.
std::string network_to_json(const Network& net);
void write_network_json(const Network& net, const std::filesystem::path& file);

}  // namespace refplan
