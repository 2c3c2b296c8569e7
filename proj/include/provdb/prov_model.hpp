#pragma once

// Provenance graph data model: a subset of W3C PROV-DM (entities, activities,
// agents and the seven core relations) plus the validity rules every other
// module relies on.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace provdb {

enum class NodeKind : std::uint8_t { Entity, Activity, Agent };

inline constexpr std::array<NodeKind, 3> kAllNodeKinds{NodeKind::Entity, NodeKind::Activity,
                                                       NodeKind::Agent};

// "PROV_ENTITY", "PROV_ACTIVITY", "PROV_AGENT".
std::string_view render(NodeKind kind);
// "Entity", "Activity", "Agent".
std::string_view display_name(NodeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view rendered);

enum class EdgeType : std::uint8_t {
  Generation,
  Usage,
  Communication,
  Derivation,
  Association,
  Attribution,
  Delegation,
};

inline constexpr std::array<EdgeType, 7> kAllEdgeTypes{
    EdgeType::Generation,  EdgeType::Usage,       EdgeType::Communication, EdgeType::Derivation,
    EdgeType::Association, EdgeType::Attribution, EdgeType::Delegation};

// "PROV_GENERATION", "PROV_USAGE", ...
std::string_view render(EdgeType type);
// Edge id prefix: "wgb", "used", "wib", "wdf", "waw", "wat", "aobo".
std::string_view id_prefix(EdgeType type);
// "Generation", "Usage", ...
std::string_view display_name(EdgeType type);
std::optional<EdgeType> parse_edge_type(std::string_view rendered);
std::optional<EdgeType> edge_type_from_prefix(std::string_view prefix);
// Case-insensitive display name, e.g. "usage" or "Generation".
std::optional<EdgeType> edge_type_from_name(std::string_view name);

// Permitted endpoint kinds of a relation. `in` is the ancestor (cause) end,
// `out` the descendant (effect) end.
struct EndpointKinds {
  NodeKind in;
  NodeKind out;
};
EndpointKinds endpoint_kinds(EdgeType type);

std::string make_edge_id(EdgeType type, std::uint64_t seq);

// Node ids are non-empty and free of the separators the key-value encoding
// uses: tab, newline, '|' and ':'.
bool is_valid_node_id(std::string_view id);
bool is_valid_attribute_name(std::string_view name);
bool is_valid_attribute_value(std::string_view value);
// "<prefix-of-type>-<digits>".
bool is_valid_edge_id(std::string_view id, EdgeType type);

struct ProvNode {
  std::string id;
  NodeKind kind = NodeKind::Entity;
  // Attribute name -> value. The name "type" is reserved for the kind.
  std::map<std::string, std::string> attributes;

  friend bool operator==(const ProvNode&, const ProvNode&) = default;
};

struct ProvEdge {
  std::string id;
  EdgeType type = EdgeType::Generation;
  std::string in_node;
  std::string out_node;

  friend bool operator==(const ProvEdge&, const ProvEdge&) = default;
};

// One graph component, the unit of ingest accounting.
using Component = std::variant<ProvNode, ProvEdge>;

class Verdict {
 public:
  static Verdict ok() { return Verdict{true, {}}; }
  static Verdict violation(std::string message) { return Verdict{false, std::move(message)}; }

  bool is_ok() const noexcept { return ok_; }
  explicit operator bool() const noexcept { return ok_; }
  const std::string& message() const noexcept { return message_; }

 private:
  Verdict(bool ok, std::string message) : ok_(ok), message_(std::move(message)) {}

  bool ok_;
  std::string message_;
};

using KindLookup = std::function<std::optional<NodeKind>(std::string_view)>;

Verdict validate_node(const ProvNode& node);

// Checks the endpoint-kind table and the no-self-loop rule. Throws
// LookupError naming the first endpoint `kind_of` cannot resolve.
Verdict validate_edge(const ProvEdge& edge, const KindLookup& kind_of);

struct TransparentStringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

template <typename V>
using StringMap = std::unordered_map<std::string, V, TransparentStringHash, std::equal_to<>>;

// Nodes and edges keyed by id, iterated in insertion order. Construction does
// not enforce validity; use validate_graph.
class ProvGraph {
 public:
  // Throws std::invalid_argument on a duplicate id.
  void add_node(ProvNode node);
  void add_edge(ProvEdge edge);

  const std::vector<ProvNode>& nodes() const noexcept { return nodes_; }
  const std::vector<ProvEdge>& edges() const noexcept { return edges_; }

  const ProvNode* find_node(std::string_view id) const;
  const ProvEdge* find_edge(std::string_view id) const;
  std::optional<NodeKind> kind_of(std::string_view id) const;
  KindLookup kind_lookup() const;

 private:
  std::vector<ProvNode> nodes_;
  std::vector<ProvEdge> edges_;
  StringMap<std::size_t> node_index_;
  StringMap<std::size_t> edge_index_;
};

std::size_t component_count(const ProvGraph& graph);

// ok iff every node and edge is valid, every endpoint resolves, and the graph
// oriented descendant -> ancestor has no cycle. Reports the first violation.
Verdict validate_graph(const ProvGraph& graph);

}  // namespace provdb
