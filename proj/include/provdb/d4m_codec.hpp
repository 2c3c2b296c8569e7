#pragma once

// Exploded-schema encoding of provenance graph components as sorted-store
// triples, and the tab-separated batch file format carrying them.
//
// Node rows:  <id>  :type|<KIND>            1
//             <id>  :<attr>|<value>          1
// Edge rows:  <id>  :inNode|<in>             1
//             <id>  :inType|<TYPE>|<in>      1
//             <id>  :outNode|<out>           1
//             <id>  :outType|<TYPE>|<out>    1
//             <id>  :type|<TYPE>             1
// The edge transpose table holds each edge row with row and column swapped.

#include "provdb/prov_model.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace provdb {

struct KvEntry {
  std::string row;
  std::string col;
  std::string val;

  friend bool operator==(const KvEntry&, const KvEntry&) = default;
  friend auto operator<=>(const KvEntry&, const KvEntry&) = default;
};

inline constexpr std::string_view kPresent = "1";

enum class TableId : std::uint8_t { Node, Edge, EdgeTranspose };

inline constexpr std::array<TableId, 3> kAllTables{TableId::Node, TableId::Edge,
                                                   TableId::EdgeTranspose};

// "node", "edge", "edgeT": used in batch and snapshot file names.
std::string_view table_name(TableId table);
std::optional<TableId> parse_table_name(std::string_view name);

// True when row and col are non-empty and no field holds a tab or newline.
bool is_valid_entry(const KvEntry& entry);

// Column helpers shared with the traversal code.
std::string type_column(std::string_view rendered_type);
std::string in_node_column(std::string_view node_id);
std::string out_node_column(std::string_view node_id);

std::vector<KvEntry> encode_node(const ProvNode& node);

struct EdgeEncoding {
  std::vector<KvEntry> edge_entries;
  std::vector<KvEntry> transpose_entries;
};

EdgeEncoding encode_edge(const ProvEdge& edge);

KvEntry transpose(const KvEntry& entry);

// Inverse of encode_node. Entries may arrive in any column order.
ProvNode decode_node_entries(std::span<const KvEntry> entries);
// Inverse of encode_edge's edge_entries; cross-checks the :inType/:outType
// columns against :type and the endpoints.
ProvEdge decode_edge_entries(std::span<const KvEntry> entries);

// Emits row TAB col TAB val LF per entry. Returns bytes written; throws
// IoError when the stream fails.
std::uint64_t write_tsv(std::span<const KvEntry> entries, std::ostream& sink);
std::string to_tsv(std::span<const KvEntry> entries);

// Throws CodecError carrying the 1-based line number of the first bad line.
std::vector<KvEntry> parse_tsv(std::string_view text);
std::vector<KvEntry> parse_tsv(std::istream& source);

// "batch-000042-edgeT.tsv"
std::string batch_file_name(std::uint64_t seq, TableId table);

}  // namespace provdb
