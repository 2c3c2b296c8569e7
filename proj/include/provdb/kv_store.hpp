#pragma once

// Embedded sorted key-value store holding the node, edge and edge-transpose
// tables. Each table is an ordered map keyed by (row, col) bytes. One writer,
// any number of concurrent readers; a put_batch is atomic to readers.
//
// Snapshot layout under the store root:
//   MANIFEST        "provdb-snapshot v1" then one line per table:
//                   <table> <entries> <rows> <fnv1a64-hex of the table file>
//   <table>.tsv     sorted entries in the batch TSV format
// flush() stages a full snapshot in <root>/.staging, marks it committed,
// then moves it into place. Opening a store finishes a committed staging
// directory and discards an uncommitted one, so a crash mid-flush leaves
// either the previous or the new snapshot.

#include "provdb/d4m_codec.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace provdb {

struct TableStats {
  std::uint64_t entries = 0;
  std::uint64_t rows = 0;

  friend bool operator==(const TableStats&, const TableStats&) = default;
};

struct IngestStats {
  std::uint64_t entries_written = 0;
  std::array<std::uint64_t, 3> entries_by_table{};  // indexed by TableId
  std::uint64_t batches = 0;
  std::uint64_t components = 0;
  double wall_time = 0.0;  // seconds
  double components_per_sec = 0.0;

  // Recomputes components_per_sec from components and wall_time.
  void update_rate();
  IngestStats& operator+=(const IngestStats& other);
};

// Points in flush() at which a test hook may throw to simulate a crash.
enum class FlushStage { Staged, Committed, PartiallyInstalled };

class Store {
 public:
  // In-memory store; flush() is rejected.
  Store();
  // Loads the snapshot under root if present, else starts empty. Throws
  // SnapshotError for an unreadable or corrupt snapshot.
  explicit Store(std::filesystem::path root);

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const std::filesystem::path& root() const noexcept { return root_; }

  // Applies all entries or none. Throws StoreError for invalid entries or
  // after close_writes(). Duplicate (row, col) keeps the last value.
  std::size_t put_batch(TableId table, std::span<const KvEntry> entries);

  std::vector<KvEntry> scan_row(TableId table, std::string_view row) const;
  std::vector<KvEntry> scan_prefix(TableId table, std::string_view row_prefix) const;
  // Multi-range lookup served as a single scan, like a batch scanner.
  // Output is sorted by (row, col).
  std::vector<KvEntry> scan_rows(TableId table, std::span<const std::string> rows) const;

  TableStats table_stats(TableId table) const;
  // The table as sorted TSV text.
  std::string dump(TableId table) const;

  void flush();
  void close_writes();

  // Number of scan calls served since construction.
  std::uint64_t scan_count() const noexcept { return scans_.load(std::memory_order_relaxed); }

  void set_flush_hook(std::function<void(FlushStage)> hook) { flush_hook_ = std::move(hook); }

 private:
  using Row = std::map<std::string, std::string, std::less<>>;
  struct Table {
    std::map<std::string, Row, std::less<>> rows;
    std::uint64_t entries = 0;
  };

  static void append_row(std::vector<KvEntry>& out, const std::string& row, const Row& cols);
  std::string dump_unlocked(TableId table) const;
  void load_snapshot();
  void recover_staging();
  const Table& table(TableId id) const { return tables_[static_cast<std::size_t>(id)]; }
  Table& table(TableId id) { return tables_[static_cast<std::size_t>(id)]; }

  std::filesystem::path root_;
  std::array<Table, 3> tables_;
  mutable std::shared_mutex mutex_;
  mutable std::atomic<std::uint64_t> scans_{0};
  bool writes_closed_ = false;
  std::function<void(FlushStage)> flush_hook_;
};

}  // namespace provdb
