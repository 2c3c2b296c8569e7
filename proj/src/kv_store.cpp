#include "provdb/kv_store.hpp"

#include "provdb/error.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

namespace provdb {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestHeader = "provdb-snapshot v1";
constexpr const char* kManifest = "MANIFEST";
constexpr const char* kStaging = ".staging";
constexpr const char* kCommitMark = "COMMIT";

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw SnapshotError("cannot read " + path.string());
  return std::move(buf).str();
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw StoreError("cannot write " + path.string());
}

// Returns true when the column is new to the row.
template <class Row, class Col, class Val>
bool upsert(Row& cols, Col&& col, Val&& val) {
  auto it = cols.lower_bound(col);
  if (it != cols.end() && it->first == col) {
    it->second = std::forward<Val>(val);
    return false;
  }
  cols.emplace_hint(it, std::forward<Col>(col), std::forward<Val>(val));
  return true;
}

std::string table_file(TableId t) { return std::string{table_name(t)} + ".tsv"; }

}  // namespace

void IngestStats::update_rate() {
  components_per_sec = wall_time > 0.0 ? static_cast<double>(components) / wall_time : 0.0;
}

IngestStats& IngestStats::operator+=(const IngestStats& other) {
  entries_written += other.entries_written;
  for (std::size_t i = 0; i < entries_by_table.size(); ++i) {
    entries_by_table[i] += other.entries_by_table[i];
  }
  batches += other.batches;
  components += other.components;
  wall_time += other.wall_time;
  update_rate();
  return *this;
}

Store::Store() = default;

Store::Store(fs::path root) : root_(std::move(root)) {
  if (root_.empty()) return;
  recover_staging();
  load_snapshot();
}

std::size_t Store::put_batch(TableId id, std::span<const KvEntry> entries) {
  for (const auto& e : entries) {
    if (!is_valid_entry(e)) throw StoreError("invalid entry for row '" + e.row + "'");
  }
  // Key order keeps successive tree walks on warm paths; stable, so the last
  // write to a cell still wins.
  std::vector<const KvEntry*> order;
  order.reserve(entries.size());
  for (const auto& e : entries) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](const KvEntry* a, const KvEntry* b) {
    if (int c = a->row.compare(b->row); c != 0) return c < 0;
    return a->col < b->col;
  });

  std::unique_lock lock(mutex_);
  if (writes_closed_) throw StoreError("write queue closed");
  auto& t = table(id);
  auto row_it = t.rows.end();
  for (const KvEntry* e : order) {
    if (row_it == t.rows.end() || row_it->first != e->row) {
      row_it = t.rows.lower_bound(e->row);
      if (row_it == t.rows.end() || row_it->first != e->row) {
        row_it = t.rows.emplace_hint(row_it, e->row, Row{});
      }
    }
    if (upsert(row_it->second, e->col, e->val)) ++t.entries;
  }
  return entries.size();
}

void Store::append_row(std::vector<KvEntry>& out, const std::string& row, const Row& cols) {
  for (const auto& [col, val] : cols) out.push_back({row, col, val});
}

std::vector<KvEntry> Store::scan_row(TableId id, std::string_view row) const {
  scans_.fetch_add(1, std::memory_order_relaxed);
  std::shared_lock lock(mutex_);
  std::vector<KvEntry> out;
  const auto& t = table(id);
  if (auto it = t.rows.find(row); it != t.rows.end()) append_row(out, it->first, it->second);
  return out;
}

std::vector<KvEntry> Store::scan_prefix(TableId id, std::string_view prefix) const {
  scans_.fetch_add(1, std::memory_order_relaxed);
  std::shared_lock lock(mutex_);
  std::vector<KvEntry> out;
  const auto& t = table(id);
  for (auto it = t.rows.lower_bound(prefix);
       it != t.rows.end() && std::string_view{it->first}.starts_with(prefix); ++it) {
    append_row(out, it->first, it->second);
  }
  return out;
}

std::vector<KvEntry> Store::scan_rows(TableId id, std::span<const std::string> rows) const {
  scans_.fetch_add(1, std::memory_order_relaxed);
  std::vector<std::string_view> keys(rows.begin(), rows.end());
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::shared_lock lock(mutex_);
  std::vector<KvEntry> out;
  const auto& t = table(id);
  for (auto key : keys) {
    if (auto it = t.rows.find(key); it != t.rows.end()) append_row(out, it->first, it->second);
  }
  return out;
}

TableStats Store::table_stats(TableId id) const {
  std::shared_lock lock(mutex_);
  const auto& t = table(id);
  return {t.entries, t.rows.size()};
}

std::string Store::dump(TableId id) const {
  std::shared_lock lock(mutex_);
  return dump_unlocked(id);
}

std::string Store::dump_unlocked(TableId id) const {
  std::string out;
  for (const auto& [row, cols] : table(id).rows) {
    for (const auto& [col, val] : cols) {
      out.append(row).append(1, '\t').append(col).append(1, '\t').append(val).append(1, '\n');
    }
  }
  return out;
}

void Store::close_writes() {
  std::unique_lock lock(mutex_);
  writes_closed_ = true;
}

void Store::flush() {
  if (root_.empty()) throw StoreError("no persistence path");
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw StoreError("cannot create " + root_.string() + ": " + ec.message());

  const fs::path staging = root_ / kStaging;
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) throw StoreError("cannot create " + staging.string() + ": " + ec.message());

  std::array<std::string, 3> texts;
  std::array<TableStats, 3> stats;
  {
    std::shared_lock lock(mutex_);
    for (auto t : kAllTables) {
      const auto i = static_cast<std::size_t>(t);
      texts[i] = dump_unlocked(t);
      stats[i] = {table(t).entries, table(t).rows.size()};
    }
  }

  std::string manifest{kManifestHeader};
  manifest += '\n';
  for (auto t : kAllTables) {
    const auto& text = texts[static_cast<std::size_t>(t)];
    const auto& st = stats[static_cast<std::size_t>(t)];
    write_file(staging / table_file(t), text);
    char line[128];
    std::snprintf(line, sizeof line, "%s %" PRIu64 " %" PRIu64 " %016" PRIx64 "\n",
                  std::string{table_name(t)}.c_str(), st.entries, st.rows, fnv1a64(text));
    manifest += line;
  }
  write_file(staging / kManifest, manifest);
  if (flush_hook_) flush_hook_(FlushStage::Staged);

  // The commit mark appears atomically via rename.
  write_file(staging / "COMMIT.tmp", "");
  fs::rename(staging / "COMMIT.tmp", staging / kCommitMark, ec);
  if (ec) throw StoreError("cannot commit snapshot: " + ec.message());
  if (flush_hook_) flush_hook_(FlushStage::Committed);

  recover_staging();
}

void Store::recover_staging() {
  const fs::path staging = root_ / kStaging;
  std::error_code ec;
  if (!fs::exists(staging, ec)) return;
  if (!fs::exists(staging / kCommitMark, ec)) {
    fs::remove_all(staging, ec);
    return;
  }
  // Roll forward: move whatever is still staged, MANIFEST last.
  bool moved_one = false;
  for (auto t : kAllTables) {
    const auto src = staging / table_file(t);
    if (!fs::exists(src, ec)) continue;
    fs::rename(src, root_ / table_file(t), ec);
    if (ec) throw StoreError("cannot install " + src.string() + ": " + ec.message());
    if (!moved_one && flush_hook_) {
      moved_one = true;
      flush_hook_(FlushStage::PartiallyInstalled);
    }
  }
  if (fs::exists(staging / kManifest, ec)) {
    fs::rename(staging / kManifest, root_ / kManifest, ec);
    if (ec) throw StoreError("cannot install MANIFEST: " + ec.message());
  }
  fs::remove_all(staging, ec);
}

void Store::load_snapshot() {
  std::error_code ec;
  const fs::path manifest_path = root_ / kManifest;
  if (!fs::exists(manifest_path, ec)) {
    for (auto t : kAllTables) {
      if (fs::exists(root_ / table_file(t), ec)) {
        throw SnapshotError("corrupt snapshot: " + table_file(t) + " present without MANIFEST");
      }
    }
    return;
  }

  std::istringstream manifest(read_file(manifest_path));
  std::string header;
  std::getline(manifest, header);
  if (header != kManifestHeader) {
    throw SnapshotError("corrupt snapshot: unsupported MANIFEST header '" + header + "'");
  }

  std::array<Table, 3> loaded;
  std::array<bool, 3> seen{};
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, checksum_hex;
    std::uint64_t entries = 0, rows = 0;
    if (!(fields >> name >> entries >> rows >> checksum_hex)) {
      throw SnapshotError("corrupt snapshot: bad MANIFEST line '" + line + "'");
    }
    const auto id = parse_table_name(name);
    if (!id) throw SnapshotError("corrupt snapshot: unknown table '" + name + "'");
    const auto text = read_file(root_ / table_file(*id));

    char actual[17];
    std::snprintf(actual, sizeof actual, "%016" PRIx64, fnv1a64(text));
    if (checksum_hex != actual) {
      throw SnapshotError("corrupt snapshot: checksum mismatch for " + table_file(*id));
    }
    std::vector<KvEntry> parsed;
    try {
      parsed = parse_tsv(std::string_view{text});
    } catch (const CodecError& e) {
      throw SnapshotError("corrupt snapshot: " + table_file(*id) + ": " + e.what());
    }
    auto& t = loaded[static_cast<std::size_t>(*id)];
    for (auto& e : parsed) {
      auto& cols = t.rows[e.row];
      if (upsert(cols, std::move(e.col), std::move(e.val))) ++t.entries;
    }
    if (t.entries != entries || t.rows.size() != rows) {
      throw SnapshotError("corrupt snapshot: " + table_file(*id) + " holds " +
                          std::to_string(t.entries) + " entries, MANIFEST says " +
                          std::to_string(entries));
    }
    seen[static_cast<std::size_t>(*id)] = true;
  }
  for (auto t : kAllTables) {
    if (!seen[static_cast<std::size_t>(t)]) {
      throw SnapshotError("corrupt snapshot: MANIFEST lacks table " + std::string{table_name(t)});
    }
  }
  tables_ = std::move(loaded);
}

}  // namespace provdb
