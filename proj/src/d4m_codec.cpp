#include "provdb/d4m_codec.hpp"

#include "provdb/error.hpp"

#include <cstdio>
#include <iterator>
#include <istream>
#include <ostream>

namespace provdb {

namespace {

constexpr std::string_view kTypeCol = ":type|";
constexpr std::string_view kInNodeCol = ":inNode|";
constexpr std::string_view kInTypeCol = ":inType|";
constexpr std::string_view kOutNodeCol = ":outNode|";
constexpr std::string_view kOutTypeCol = ":outType|";

bool bad_field(std::string_view s) { return s.find_first_of("\t\n") != std::string_view::npos; }

std::string cat(std::string_view a, std::string_view b) {
  std::string s;
  s.reserve(a.size() + b.size());
  s.append(a).append(b);
  return s;
}

std::string_view common_row(std::span<const KvEntry> entries) {
  if (entries.empty()) throw CodecError("empty entry set");
  const std::string_view row = entries.front().row;
  for (const auto& e : entries) {
    if (e.row != row) throw CodecError("mixed rows '" + std::string{row} + "' and '" + e.row + "'");
  }
  return row;
}

// Splits ":name|value" into (name, value).
std::pair<std::string_view, std::string_view> split_column(std::string_view col) {
  if (col.empty() || col.front() != ':') throw CodecError("malformed column '" + std::string{col} + "'");
  const auto bar = col.find('|');
  if (bar == std::string_view::npos) {
    throw CodecError("malformed column '" + std::string{col} + "': no '|'");
  }
  return {col.substr(1, bar - 1), col.substr(bar + 1)};
}

void set_once(std::optional<std::string>& slot, std::string_view value, std::string_view what) {
  if (slot) throw CodecError("duplicate " + std::string{what} + " column");
  slot.emplace(value);
}

}  // namespace

std::string_view table_name(TableId table) {
  switch (table) {
    case TableId::Node: return "node";
    case TableId::Edge: return "edge";
    case TableId::EdgeTranspose: return "edgeT";
  }
  return "";
}

std::optional<TableId> parse_table_name(std::string_view name) {
  for (auto t : kAllTables) {
    if (table_name(t) == name) return t;
  }
  return std::nullopt;
}

bool is_valid_entry(const KvEntry& e) {
  return !e.row.empty() && !e.col.empty() && !bad_field(e.row) && !bad_field(e.col) &&
         !bad_field(e.val);
}

std::string type_column(std::string_view rendered_type) { return cat(kTypeCol, rendered_type); }
std::string in_node_column(std::string_view node_id) { return cat(kInNodeCol, node_id); }
std::string out_node_column(std::string_view node_id) { return cat(kOutNodeCol, node_id); }

std::vector<KvEntry> encode_node(const ProvNode& node) {
  std::vector<KvEntry> out;
  out.reserve(1 + node.attributes.size());
  out.push_back({node.id, type_column(render(node.kind)), std::string{kPresent}});
  for (const auto& [name, value] : node.attributes) {
    std::string col;
    col.reserve(name.size() + value.size() + 2);
    col.append(":").append(name).append("|").append(value);
    out.push_back({node.id, std::move(col), std::string{kPresent}});
  }
  return out;
}

EdgeEncoding encode_edge(const ProvEdge& edge) {
  const auto type = render(edge.type);
  EdgeEncoding enc;
  enc.edge_entries.reserve(5);
  auto add = [&](std::string col) {
    enc.edge_entries.push_back({edge.id, std::move(col), std::string{kPresent}});
  };
  add(in_node_column(edge.in_node));
  add(cat(kInTypeCol, type) + "|" + edge.in_node);
  add(out_node_column(edge.out_node));
  add(cat(kOutTypeCol, type) + "|" + edge.out_node);
  add(type_column(type));

  enc.transpose_entries.reserve(enc.edge_entries.size());
  for (const auto& e : enc.edge_entries) enc.transpose_entries.push_back(transpose(e));
  return enc;
}

KvEntry transpose(const KvEntry& entry) { return {entry.col, entry.row, entry.val}; }

ProvNode decode_node_entries(std::span<const KvEntry> entries) {
  ProvNode node;
  node.id = std::string{common_row(entries)};
  std::optional<NodeKind> kind;
  for (const auto& e : entries) {
    const auto [name, value] = split_column(e.col);
    if (name == "type") {
      if (kind) throw CodecError("node " + node.id + ": duplicate type column");
      kind = parse_node_kind(value);
      if (!kind) throw CodecError("node " + node.id + ": unknown kind '" + std::string{value} + "'");
    } else if (!node.attributes.emplace(name, value).second) {
      throw CodecError("node " + node.id + ": duplicate attribute '" + std::string{name} + "'");
    }
  }
  if (!kind) throw CodecError("node " + node.id + ": missing type column");
  node.kind = *kind;
  return node;
}

ProvEdge decode_edge_entries(std::span<const KvEntry> entries) {
  ProvEdge edge;
  edge.id = std::string{common_row(entries)};
  std::optional<std::string> in, out, type, in_type, out_type;
  for (const auto& e : entries) {
    const auto [name, value] = split_column(e.col);
    if (name == "inNode") {
      set_once(in, value, "inNode");
    } else if (name == "outNode") {
      set_once(out, value, "outNode");
    } else if (name == "type") {
      set_once(type, value, "type");
    } else if (name == "inType") {
      set_once(in_type, value, "inType");
    } else if (name == "outType") {
      set_once(out_type, value, "outType");
    } else {
      throw CodecError("edge " + edge.id + ": unknown column '" + e.col + "'");
    }
  }
  if (!in) throw CodecError("edge " + edge.id + ": missing :inNode column");
  if (!out) throw CodecError("edge " + edge.id + ": missing :outNode column");
  if (!type) throw CodecError("edge " + edge.id + ": missing :type column");
  const auto parsed = parse_edge_type(*type);
  if (!parsed) throw CodecError("edge " + edge.id + ": unknown edge type '" + *type + "'");
  if (in_type && *in_type != *type + "|" + *in) {
    throw CodecError("edge " + edge.id + ": :inType disagrees with :type/:inNode");
  }
  if (out_type && *out_type != *type + "|" + *out) {
    throw CodecError("edge " + edge.id + ": :outType disagrees with :type/:outNode");
  }
  edge.type = *parsed;
  edge.in_node = std::move(*in);
  edge.out_node = std::move(*out);
  return edge;
}

std::uint64_t write_tsv(std::span<const KvEntry> entries, std::ostream& sink) {
  std::uint64_t bytes = 0;
  for (const auto& e : entries) {
    sink.write(e.row.data(), static_cast<std::streamsize>(e.row.size()));
    sink.put('\t');
    sink.write(e.col.data(), static_cast<std::streamsize>(e.col.size()));
    sink.put('\t');
    sink.write(e.val.data(), static_cast<std::streamsize>(e.val.size()));
    sink.put('\n');
    bytes += e.row.size() + e.col.size() + e.val.size() + 3;
  }
  if (!sink) throw IoError("TSV sink write failed");
  return bytes;
}

std::string to_tsv(std::span<const KvEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    out.append(e.row).append(1, '\t').append(e.col).append(1, '\t').append(e.val).append(1, '\n');
  }
  return out;
}

std::vector<KvEntry> parse_tsv(std::string_view text) {
  std::vector<KvEntry> entries;
  std::uint64_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      std::size_t fields = 1;
      for (char c : line) fields += c == '\t';
      throw CodecError("expected 3 tab-separated fields, got " + std::to_string(fields), line_no);
    }
    KvEntry e{std::string{line.substr(0, t1)}, std::string{line.substr(t1 + 1, t2 - t1 - 1)},
              std::string{line.substr(t2 + 1)}};
    if (e.row.empty()) throw CodecError("empty row", line_no);
    if (e.col.empty()) throw CodecError("empty column", line_no);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<KvEntry> parse_tsv(std::istream& source) {
  std::string text{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  if (source.bad()) throw IoError("TSV source read failed");
  return parse_tsv(std::string_view{text});
}

std::string batch_file_name(std::uint64_t seq, TableId table) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "batch-%06llu-%s.tsv", static_cast<unsigned long long>(seq),
                std::string{table_name(table)}.c_str());
  return buf;
}

}  // namespace provdb
