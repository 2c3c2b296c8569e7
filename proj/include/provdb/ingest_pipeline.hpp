#pragma once

// Translate -> spool -> load. Components are encoded into per-batch TSV
// files (node, edge, edgeT) in a spool directory; a loader thread parses
// completed batches and applies them to the store. Store writes come from
// that single thread only.

#include "provdb/bounded_queue.hpp"
#include "provdb/d4m_codec.hpp"
#include "provdb/event_translator.hpp"
#include "provdb/kv_store.hpp"
#include "provdb/prov_model.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace provdb {

struct PipelineReport;

struct PipelineConfig {
  // Primary (node + edge table) entries that complete a batch.
  std::size_t batch_size = 4096;
  std::filesystem::path spool_dir;
  // Calls `progress` every report_interval events (0 = never).
  std::uint64_t report_interval = 0;
  std::function<void(const PipelineReport&)> progress;
  // Completed batches waiting for the loader before spooling blocks.
  std::size_t queue_depth = 4;
  bool keep_spool = false;
  // Count and drop events that fail translation instead of stopping.
  bool skip_untranslatable = false;
};

// Throws std::invalid_argument for batch_size == 0 or an empty spool_dir.
void check_config(const PipelineConfig& config);

struct BatchDescriptor {
  std::uint64_t seq = 0;
  std::array<std::filesystem::path, 3> paths;  // indexed by TableId
  std::array<std::uint64_t, 3> entries{};
  std::uint64_t nodes = 0;
  std::uint64_t edges = 0;
  bool partial = false;

  const std::filesystem::path& path(TableId t) const { return paths[static_cast<std::size_t>(t)]; }
  std::uint64_t entry_count(TableId t) const { return entries[static_cast<std::size_t>(t)]; }
  std::uint64_t components() const { return nodes + edges; }
};

// Writes components into batch files, never splitting one component across
// batches. On an I/O failure the batch's files are removed and IoError is
// thrown.
class Spooler {
 public:
  Spooler(std::filesystem::path dir, std::size_t batch_size, std::uint64_t first_seq = 0);
  ~Spooler();

  Spooler(const Spooler&) = delete;
  Spooler& operator=(const Spooler&) = delete;

  // Returns the batch this component completed, if any.
  std::optional<BatchDescriptor> add(const Component& component);
  // Closes the open batch (marked partial) if it holds anything.
  std::optional<BatchDescriptor> finish();

  const std::array<std::uint64_t, 3>& total_entries() const noexcept { return totals_; }

 private:
  void open_batch();
  BatchDescriptor close_batch(bool partial);
  void discard_batch() noexcept;

  std::filesystem::path dir_;
  std::size_t batch_size_;
  std::uint64_t next_seq_;
  std::optional<BatchDescriptor> current_;
  std::array<std::ofstream, 3> files_;
  std::array<std::uint64_t, 3> totals_{};
};

// Spools all components, including a trailing partial batch.
std::vector<BatchDescriptor> spool(std::span<const Component> components,
                                   const PipelineConfig& config);

// Batch descriptors for every batch-<seq>-*.tsv group in dir, by seq.
// Throws IoError when a group is missing one of its three files.
std::vector<BatchDescriptor> scan_spool_dir(const std::filesystem::path& dir);

struct ParsedBatch {
  BatchDescriptor descriptor;
  std::array<std::vector<KvEntry>, 3> entries;  // indexed by TableId
};

// Throws IoError or CodecError.
ParsedBatch read_batch(const BatchDescriptor& batch);
// components = distinct node rows + distinct edge rows. chunk_size > 0 splits
// each table's entries into put_batch calls of that many entries.
IngestStats store_batch(Store& store, const ParsedBatch& batch, std::size_t chunk_size = 0);

// read_batch then store_batch, so a parse error leaves the store untouched.
IngestStats ingest_batch(Store& store, const BatchDescriptor& batch, std::size_t chunk_size = 0);

// Encodes a whole graph straight into the store, bypassing the spool.
IngestStats load_graph(Store& store, const ProvGraph& graph);

struct PipelineReport {
  std::uint64_t events_in = 0;
  std::uint64_t events_translated = 0;
  std::uint64_t events_rejected = 0;
  std::uint64_t components = 0;  // spooled
  std::uint64_t components_ingested = 0;
  std::array<std::uint64_t, 3> entries_spooled{};
  std::array<std::uint64_t, 3> entries_stored{};
  std::uint64_t batches = 0;
  double seconds = 0.0;
  double components_per_sec = 0.0;
  std::optional<std::string> error;

  std::string summary_line() const;
  static std::string csv_header();  // events,components,batches,seconds,components_per_sec
  std::string csv_row() const;
};

// One end-to-end run. submit() may be called from one thread at a time;
// finish() joins the loader and returns the report. submit() throws
// PipelineError once any stage has failed.
class Pipeline {
 public:
  Pipeline(Store& store, PipelineConfig config);
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void submit(const EventRecord& event);
  void submit(const Component& component);
  PipelineReport finish();

  // Snapshot of the counters so far.
  PipelineReport report() const;

 private:
  void hand_off(BatchDescriptor batch);
  void load_loop();
  void fail(std::string message);
  void throw_if_failed() const;

  Store& store_;
  PipelineConfig config_;
  TranslationState translation_;
  Spooler spooler_;
  BoundedQueue<BatchDescriptor> queue_;
  std::chrono::steady_clock::time_point started_;
  mutable std::mutex mutex_;
  PipelineReport report_;
  bool finished_ = false;
  std::thread loader_;
};

using EventSource = std::function<std::optional<EventRecord>()>;

// Pulls events until the source is exhausted. Stage errors end the run; the
// report then carries the error and the progress made.
PipelineReport run_pipeline(const EventSource& source, Store& store, const PipelineConfig& config);
PipelineReport run_pipeline(std::span<const EventRecord> events, Store& store,
                            const PipelineConfig& config);
// Same pipeline fed with a ready-made graph (nodes, then edges).
PipelineReport run_graph_pipeline(const ProvGraph& graph, Store& store,
                                  const PipelineConfig& config);

}  // namespace provdb
