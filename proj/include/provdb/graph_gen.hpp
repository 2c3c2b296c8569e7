#pragma once

#include "provdb/prov_model.hpp"

#include <cstdint>
#include <span>
#include <string>

namespace provdb {

// Relative odds of drawing each node kind.
struct KindWeights {
  std::uint32_t entity = 6;
  std::uint32_t activity = 3;
  std::uint32_t agent = 1;
};

struct GenConfig {
  std::uint64_t num_nodes = 1;
  std::uint32_t max_edges_per_node = 1;
  std::uint64_t seed = 0;
  KindWeights kind_weights{};
};

// Throws std::invalid_argument when a GenConfig invariant is violated.
void check_config(const GenConfig& config);

// Random valid provenance graph. Nodes are created in order with kinds drawn
// from kind_weights and ids "EN<k>", "AC<k>", "AG<k>". Each new node draws
// k in [0, max_edges_per_node] relations in which it is the descendant; the
// ancestor is a uniformly chosen earlier node of the kind the relation needs.
// Pure function of the config.
ProvGraph generate(const GenConfig& config);

// Longest backward path (descendant -> ancestor hops) starting at any of
// `start`. Throws LookupError for an unknown start id and
// std::invalid_argument if the graph has a cycle.
std::size_t graph_depth(const ProvGraph& graph, std::span<const std::string> start);

}  // namespace provdb
