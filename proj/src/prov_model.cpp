#include "provdb/prov_model.hpp"

#include "provdb/error.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace provdb {

namespace {

struct EdgeTypeInfo {
  EdgeType type;
  std::string_view rendered;
  std::string_view prefix;
  std::string_view name;
  EndpointKinds ends;
};

constexpr std::array<EdgeTypeInfo, 7> kEdgeTypeTable{{
    {EdgeType::Generation, "PROV_GENERATION", "wgb", "Generation",
     {NodeKind::Activity, NodeKind::Entity}},
    {EdgeType::Usage, "PROV_USAGE", "used", "Usage", {NodeKind::Entity, NodeKind::Activity}},
    {EdgeType::Communication, "PROV_COMMUNICATION", "wib", "Communication",
     {NodeKind::Activity, NodeKind::Activity}},
    {EdgeType::Derivation, "PROV_DERIVATION", "wdf", "Derivation",
     {NodeKind::Entity, NodeKind::Entity}},
    {EdgeType::Association, "PROV_ASSOCIATION", "waw", "Association",
     {NodeKind::Agent, NodeKind::Activity}},
    {EdgeType::Attribution, "PROV_ATTRIBUTION", "wat", "Attribution",
     {NodeKind::Agent, NodeKind::Entity}},
    {EdgeType::Delegation, "PROV_DELEGATION", "aobo", "Delegation",
     {NodeKind::Agent, NodeKind::Agent}},
}};

const EdgeTypeInfo& info(EdgeType type) { return kEdgeTypeTable[static_cast<std::size_t>(type)]; }

bool has_structural_char(std::string_view s) {
  return s.find_first_of("\t\n\r|:") != std::string_view::npos;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view render(NodeKind kind) {
  switch (kind) {
    case NodeKind::Entity: return "PROV_ENTITY";
    case NodeKind::Activity: return "PROV_ACTIVITY";
    case NodeKind::Agent: return "PROV_AGENT";
  }
  return "";
}

std::string_view display_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Entity: return "Entity";
    case NodeKind::Activity: return "Activity";
    case NodeKind::Agent: return "Agent";
  }
  return "";
}

std::optional<NodeKind> parse_node_kind(std::string_view rendered) {
  for (NodeKind k : kAllNodeKinds) {
    if (render(k) == rendered) return k;
  }
  return std::nullopt;
}

std::string_view render(EdgeType type) { return info(type).rendered; }
std::string_view id_prefix(EdgeType type) { return info(type).prefix; }
std::string_view display_name(EdgeType type) { return info(type).name; }
EndpointKinds endpoint_kinds(EdgeType type) { return info(type).ends; }

std::optional<EdgeType> parse_edge_type(std::string_view rendered) {
  for (const auto& e : kEdgeTypeTable) {
    if (e.rendered == rendered) return e.type;
  }
  return std::nullopt;
}

std::optional<EdgeType> edge_type_from_prefix(std::string_view prefix) {
  for (const auto& e : kEdgeTypeTable) {
    if (e.prefix == prefix) return e.type;
  }
  return std::nullopt;
}

std::optional<EdgeType> edge_type_from_name(std::string_view name) {
  for (const auto& e : kEdgeTypeTable) {
    if (iequals(e.name, name)) return e.type;
  }
  return std::nullopt;
}

std::string make_edge_id(EdgeType type, std::uint64_t seq) {
  std::string id{id_prefix(type)};
  id += '-';
  id += std::to_string(seq);
  return id;
}

bool is_valid_node_id(std::string_view id) { return !id.empty() && !has_structural_char(id); }

bool is_valid_attribute_name(std::string_view name) {
  return !name.empty() && name != "type" && !has_structural_char(name);
}

bool is_valid_attribute_value(std::string_view value) {
  return value.find_first_of("\t\n\r") == std::string_view::npos;
}

bool is_valid_edge_id(std::string_view id, EdgeType type) {
  const auto prefix = id_prefix(type);
  if (id.size() <= prefix.size() + 1 || id.substr(0, prefix.size()) != prefix ||
      id[prefix.size()] != '-') {
    return false;
  }
  const auto digits = id.substr(prefix.size() + 1);
  return std::all_of(digits.begin(), digits.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

Verdict validate_node(const ProvNode& node) {
  if (!is_valid_node_id(node.id)) return Verdict::violation("invalid node id '" + node.id + "'");
  for (const auto& [name, value] : node.attributes) {
    if (!is_valid_attribute_name(name)) {
      return Verdict::violation("node " + node.id + ": invalid attribute name '" + name + "'");
    }
    if (!is_valid_attribute_value(value)) {
      return Verdict::violation("node " + node.id + ": invalid value for attribute " + name);
    }
  }
  return Verdict::ok();
}

Verdict validate_edge(const ProvEdge& edge, const KindLookup& kind_of) {
  const auto in_kind = kind_of(edge.in_node);
  if (!in_kind) throw LookupError("unknown node id '" + edge.in_node + "'");
  const auto out_kind = kind_of(edge.out_node);
  if (!out_kind) throw LookupError("unknown node id '" + edge.out_node + "'");

  if (edge.in_node == edge.out_node) {
    return Verdict::violation("edge " + edge.id + " is a self-loop on " + edge.in_node);
  }
  const auto ends = endpoint_kinds(edge.type);
  if (*in_kind != ends.in || *out_kind != ends.out) {
    std::string msg{display_name(edge.type)};
    msg += " requires ";
    msg += display_name(ends.in);
    msg += "→";
    msg += display_name(ends.out);
    return Verdict::violation(std::move(msg));
  }
  return Verdict::ok();
}

void ProvGraph::add_node(ProvNode node) {
  if (node_index_.contains(node.id)) throw std::invalid_argument("duplicate node id " + node.id);
  node_index_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
}

void ProvGraph::add_edge(ProvEdge edge) {
  if (edge_index_.contains(edge.id)) throw std::invalid_argument("duplicate edge id " + edge.id);
  edge_index_.emplace(edge.id, edges_.size());
  edges_.push_back(std::move(edge));
}

const ProvNode* ProvGraph::find_node(std::string_view id) const {
  auto it = node_index_.find(id);
  return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

const ProvEdge* ProvGraph::find_edge(std::string_view id) const {
  auto it = edge_index_.find(id);
  return it == edge_index_.end() ? nullptr : &edges_[it->second];
}

std::optional<NodeKind> ProvGraph::kind_of(std::string_view id) const {
  if (const auto* n = find_node(id)) return n->kind;
  return std::nullopt;
}

KindLookup ProvGraph::kind_lookup() const {
  return [this](std::string_view id) { return kind_of(id); };
}

std::size_t component_count(const ProvGraph& graph) {
  return graph.nodes().size() + graph.edges().size();
}

Verdict validate_graph(const ProvGraph& graph) {
  for (const auto& node : graph.nodes()) {
    if (auto v = validate_node(node); !v) return v;
  }
  for (const auto& edge : graph.edges()) {
    if (!is_valid_edge_id(edge.id, edge.type)) {
      return Verdict::violation("edge id '" + edge.id + "' does not match prefix " +
                                std::string{id_prefix(edge.type)});
    }
    for (const auto* end : {&edge.in_node, &edge.out_node}) {
      if (!graph.find_node(*end)) {
        return Verdict::violation("edge " + edge.id + " references absent node " + *end);
      }
    }
    if (auto v = validate_edge(edge, graph.kind_lookup()); !v) {
      return Verdict::violation("edge " + edge.id + ": " + v.message());
    }
  }

  // Kahn's algorithm over descendant -> ancestor arcs.
  const auto& nodes = graph.nodes();
  StringMap<std::size_t> index;
  index.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i].id, i);

  std::vector<std::vector<std::size_t>> ancestors(nodes.size());
  std::vector<std::size_t> pending(nodes.size(), 0);
  for (const auto& edge : graph.edges()) {
    const auto from = index.find(edge.out_node)->second;
    const auto to = index.find(edge.in_node)->second;
    ancestors[from].push_back(to);
    ++pending[to];
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (pending[i] == 0) ready.push_back(i);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const auto v = ready.back();
    ready.pop_back();
    ++visited;
    for (auto a : ancestors[v]) {
      if (--pending[a] == 0) ready.push_back(a);
    }
  }
  if (visited != nodes.size()) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (pending[i] != 0) return Verdict::violation("cycle through node " + nodes[i].id);
    }
  }
  return Verdict::ok();
}

}  // namespace provdb
