#pragma once

// Filtered breadth-first lineage traversal over the stored graph. Each level
// looks up the frontier's incoming edges through the edge transpose table
// (rows ":outNode|<id>") and resolves their ancestors from the edge table,
// walking from descendants toward ancestors.
//
// Scan cost: one node-table scan for the start set, then two scans per
// expanded level (transpose + edge), plus one node-table scan per level when
// a node filter is set. So scans <= 1 + 2*depth, or 1 + 3*depth with a node
// filter.

#include "provdb/kv_store.hpp"
#include "provdb/prov_model.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace provdb {

struct TraversalQuery {
  std::vector<std::string> start_nodes;
  std::uint32_t depth = 0;
  // Only edges of these types are followed and reported.
  std::optional<std::set<EdgeType>> edge_filter;
  // Gate on frontier admission for nodes discovered at depth >= 1. A node
  // that fails it still appears in its discovery row but is not expanded.
  std::function<bool(const ProvNode&)> node_filter;
};

struct TraversalRow {
  std::uint32_t depth = 0;
  std::string node_id;  // depth 0 only
  std::string in_node;  // depth >= 1
  std::string out_node; // depth >= 1

  static TraversalRow start(std::string id) { return {0, std::move(id), {}, {}}; }
  static TraversalRow hop(std::uint32_t depth, std::string in, std::string out) {
    return {depth, {}, std::move(in), std::move(out)};
  }

  friend bool operator==(const TraversalRow&, const TraversalRow&) = default;
  friend auto operator<=>(const TraversalRow&, const TraversalRow&) = default;
};

struct TraversalResult {
  // Ordered by depth, then lexicographically.
  std::vector<TraversalRow> rows;
  std::uint64_t scans_performed = 0;
  // Levels whose frontier was looked up in the store.
  std::uint32_t levels_expanded = 0;
  std::vector<std::string> missing_starts;

  bool start_not_found() const noexcept { return !missing_starts.empty(); }
};

// Throws QueryError for an empty start set. Unknown start ids are reported
// in missing_starts.
TraversalResult bfs(const Store& store, const TraversalQuery& query);

// Entity ancestors of `output_node` reachable over Generation, Usage and
// Derivation edges within max_depth hops. Throws QueryError("start not
// found: <id>") for an unknown node.
std::set<std::string> lineage_inputs(const Store& store, const std::string& output_node,
                                     std::uint32_t max_depth);

// (depthID|0,EN6,)     1,
// (depthID|1,inNode|AC2,)     outNode|EN6,
std::string format_row(const TraversalRow& row);
std::string format_result(const TraversalResult& result);
// Header "depth,in_node,out_node"; a depth-0 row puts the start id in
// out_node and leaves in_node empty.
std::string format_csv(const TraversalResult& result);

}  // namespace provdb
