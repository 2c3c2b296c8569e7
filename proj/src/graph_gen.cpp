#include "provdb/graph_gen.hpp"

#include "provdb/error.hpp"
#include "provdb/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace provdb {

namespace {

std::string_view node_prefix(NodeKind kind) {
  switch (kind) {
    case NodeKind::Entity: return "EN";
    case NodeKind::Activity: return "AC";
    case NodeKind::Agent: return "AG";
  }
  return "";
}

// Relations in which a node of the given kind is the descendant end.
std::span<const EdgeType> relations_into(NodeKind kind) {
  static constexpr EdgeType entity[] = {EdgeType::Generation, EdgeType::Derivation,
                                        EdgeType::Attribution};
  static constexpr EdgeType activity[] = {EdgeType::Usage, EdgeType::Communication,
                                          EdgeType::Association};
  static constexpr EdgeType agent[] = {EdgeType::Delegation};
  switch (kind) {
    case NodeKind::Entity: return entity;
    case NodeKind::Activity: return activity;
    case NodeKind::Agent: return agent;
  }
  return {};
}

NodeKind draw_kind(SeededRng& rng, const KindWeights& w) {
  const std::uint64_t total = std::uint64_t{w.entity} + w.activity + w.agent;
  const auto x = rng.below(total);
  if (x < w.entity) return NodeKind::Entity;
  if (x < std::uint64_t{w.entity} + w.activity) return NodeKind::Activity;
  return NodeKind::Agent;
}

}  // namespace

void check_config(const GenConfig& config) {
  if (config.num_nodes < 1) throw std::invalid_argument("num_nodes must be >= 1");
  if (config.max_edges_per_node < 1) throw std::invalid_argument("max_edges_per_node must be >= 1");
  const auto& w = config.kind_weights;
  if (std::uint64_t{w.entity} + w.activity + w.agent == 0) {
    throw std::invalid_argument("kind_weights must not all be zero");
  }
}

ProvGraph generate(const GenConfig& config) {
  check_config(config);
  SeededRng rng{config.seed};
  ProvGraph graph;

  std::array<std::vector<std::string>, 3> by_kind;  // ids of earlier nodes per kind
  std::array<std::uint64_t, kAllEdgeTypes.size()> edge_seq{};
  std::vector<std::pair<EdgeType, std::string>> picked;

  for (std::uint64_t i = 0; i < config.num_nodes; ++i) {
    const auto kind = draw_kind(rng, config.kind_weights);
    auto& same_kind = by_kind[static_cast<std::size_t>(kind)];
    std::string id{node_prefix(kind)};
    id += std::to_string(same_kind.size());

    if (i > 0) {
      const auto relations = relations_into(kind);
      const auto wanted = rng.between(0, config.max_edges_per_node);
      picked.clear();
      for (std::uint64_t e = 0; e < wanted; ++e) {
        const auto type = relations[rng.below(relations.size())];
        const auto& pool = by_kind[static_cast<std::size_t>(endpoint_kinds(type).in)];
        if (pool.empty()) continue;
        const auto& ancestor = pool[rng.below(pool.size())];
        const bool repeat = std::any_of(picked.begin(), picked.end(), [&](const auto& p) {
          return p.first == type && p.second == ancestor;
        });
        if (repeat) continue;
        picked.emplace_back(type, ancestor);
      }
      // Edges reference the new node, so it is added first.
      graph.add_node(ProvNode{id, kind, {}});
      for (const auto& [type, ancestor] : picked) {
        auto& seq = edge_seq[static_cast<std::size_t>(type)];
        graph.add_edge(ProvEdge{make_edge_id(type, seq++), type, ancestor, id});
      }
    } else {
      graph.add_node(ProvNode{id, kind, {}});
    }
    same_kind.push_back(std::move(id));
  }
  return graph;
}

std::size_t graph_depth(const ProvGraph& graph, std::span<const std::string> start) {
  const auto& nodes = graph.nodes();
  StringMap<std::size_t> index;
  index.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i].id, i);

  // parents[v] = ancestors one hop away; children drive the topological order.
  std::vector<std::vector<std::size_t>> parents(nodes.size()), children(nodes.size());
  for (const auto& edge : graph.edges()) {
    auto in = index.find(edge.in_node);
    auto out = index.find(edge.out_node);
    if (in == index.end()) throw LookupError("unknown node id '" + edge.in_node + "'");
    if (out == index.end()) throw LookupError("unknown node id '" + edge.out_node + "'");
    parents[out->second].push_back(in->second);
    children[in->second].push_back(out->second);
  }

  std::vector<std::size_t> longest(nodes.size(), 0);
  std::vector<std::size_t> waiting(nodes.size());
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    waiting[v] = parents[v].size();
    if (waiting[v] == 0) ready.push_back(v);
  }
  std::size_t done = 0;
  while (!ready.empty()) {
    const auto v = ready.back();
    ready.pop_back();
    ++done;
    for (auto c : children[v]) {
      longest[c] = std::max(longest[c], longest[v] + 1);
      if (--waiting[c] == 0) ready.push_back(c);
    }
  }
  if (done != nodes.size()) throw std::invalid_argument("graph has a cycle");

  std::size_t depth = 0;
  for (const auto& s : start) {
    auto it = index.find(s);
    if (it == index.end()) throw LookupError("unknown start node '" + s + "'");
    depth = std::max(depth, longest[it->second]);
  }
  return depth;
}

}  // namespace provdb
