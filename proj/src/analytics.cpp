#include "provdb/analytics.hpp"

#include "provdb/d4m_codec.hpp"
#include "provdb/error.hpp"

#include <algorithm>
#include <map>
#include <span>

namespace provdb {

namespace {


std::vector<std::string> sorted_unique(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Groups row-sorted entries by row.
template <typename F>
void for_each_row(const std::vector<KvEntry>& entries, F&& f) {
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i;
    while (j < entries.size() && entries[j].row == entries[i].row) ++j;
    f(std::span<const KvEntry>{entries.data() + i, j - i});
    i = j;
  }
}

}  // namespace

TraversalResult bfs(const Store& store, const TraversalQuery& query) {
  if (query.start_nodes.empty()) throw QueryError("empty start set");
  TraversalResult result;

  const auto starts = sorted_unique(query.start_nodes);
  const auto start_rows = store.scan_rows(TableId::Node, starts);
  ++result.scans_performed;

  std::set<std::string, std::less<>> visited;
  std::vector<std::string> frontier;
  for (const auto& id : starts) {
    const bool found = std::any_of(start_rows.begin(), start_rows.end(),
                                   [&](const KvEntry& e) { return e.row == id; });
    if (!found) {
      result.missing_starts.push_back(id);
      continue;
    }
    result.rows.push_back(TraversalRow::start(id));
    visited.insert(id);
    frontier.push_back(id);
  }

  for (std::uint32_t level = 1; level <= query.depth && !frontier.empty(); ++level) {
    ++result.levels_expanded;

    std::vector<std::string> keys;
    keys.reserve(frontier.size());
    for (const auto& id : frontier) keys.push_back(out_node_column(id));
    const auto incoming = store.scan_rows(TableId::EdgeTranspose, keys);
    ++result.scans_performed;

    std::vector<std::string> edge_ids;
    edge_ids.reserve(incoming.size());
    for (const auto& e : incoming) edge_ids.push_back(e.col);
    frontier.clear();
    if (edge_ids.empty()) break;

    const auto edge_entries = store.scan_rows(TableId::Edge, edge_ids);
    ++result.scans_performed;

    std::set<std::pair<std::string, std::string>> hops;
    std::vector<std::string> discovered;
    for_each_row(edge_entries, [&](std::span<const KvEntry> rows) {
      const auto edge = decode_edge_entries(rows);
      if (query.edge_filter && !query.edge_filter->contains(edge.type)) return;
      hops.emplace(edge.in_node, edge.out_node);
      if (!visited.contains(edge.in_node)) discovered.push_back(edge.in_node);
    });
    for (const auto& [in, out] : hops) result.rows.push_back(TraversalRow::hop(level, in, out));

    discovered = sorted_unique(std::move(discovered));
    visited.insert(discovered.begin(), discovered.end());
    if (query.node_filter && !discovered.empty()) {
      const auto node_entries = store.scan_rows(TableId::Node, discovered);
      ++result.scans_performed;
      for_each_row(node_entries, [&](std::span<const KvEntry> rows) {
        const auto node = decode_node_entries(rows);
        if (query.node_filter(node)) frontier.push_back(node.id);
      });
    } else {
      frontier = std::move(discovered);
    }
  }

  std::sort(result.rows.begin(), result.rows.end());
  return result;
}

std::set<std::string> lineage_inputs(const Store& store, const std::string& output_node,
                                     std::uint32_t max_depth) {
  TraversalQuery query;
  query.start_nodes = {output_node};
  query.depth = max_depth;
  query.edge_filter = std::set<EdgeType>{EdgeType::Generation, EdgeType::Usage,
                                         EdgeType::Derivation};
  const auto result = bfs(store, query);
  if (result.start_not_found()) throw QueryError("start not found: " + output_node);

  std::vector<std::string> ancestors;
  for (const auto& row : result.rows) {
    if (row.depth > 0 && row.in_node != output_node) ancestors.push_back(row.in_node);
  }
  ancestors = sorted_unique(std::move(ancestors));
  std::set<std::string> inputs;
  if (ancestors.empty()) return inputs;

  const auto node_entries = store.scan_rows(TableId::Node, ancestors);
  for_each_row(node_entries, [&](std::span<const KvEntry> rows) {
    const auto node = decode_node_entries(rows);
    if (node.kind == NodeKind::Entity) inputs.insert(node.id);
  });
  return inputs;
}

std::string format_row(const TraversalRow& row) {
  if (row.depth == 0) return "(depthID|0," + row.node_id + ",)     1,";
  return "(depthID|" + std::to_string(row.depth) + ",inNode|" + row.in_node +
         ",)     outNode|" + row.out_node + ",";
}

std::string format_result(const TraversalResult& result) {
  std::string out;
  for (const auto& row : result.rows) out.append(format_row(row)).append(1, '\n');
  return out;
}

std::string format_csv(const TraversalResult& result) {
  std::string out = "depth,in_node,out_node\n";
  for (const auto& row : result.rows) {
    out += std::to_string(row.depth);
    out += ',';
    if (row.depth == 0) {
      out += ',';
      out += row.node_id;
    } else {
      out += row.in_node;
      out += ',';
      out += row.out_node;
    }
    out += '\n';
  }
  return out;
}

}  // namespace provdb
