#include "provdb/ingest_pipeline.hpp"

#include "provdb/error.hpp"

#include <algorithm>
#include <charconv>
#include <iterator>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <unordered_set>

namespace provdb {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<KvEntry> read_batch_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open batch file " + path.string());
  try {
    return parse_tsv(in);
  } catch (const CodecError& e) {
    throw CodecError(path.filename().string() + ": " + e.what());
  }
}

std::uint64_t distinct_rows(const std::vector<KvEntry>& entries) {
  std::unordered_set<std::string_view> rows;
  for (const auto& e : entries) rows.insert(e.row);
  return rows.size();
}

std::size_t idx(TableId t) { return static_cast<std::size_t>(t); }

}  // namespace

void check_config(const PipelineConfig& config) {
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (config.spool_dir.empty()) throw std::invalid_argument("spool_dir must be set");
}

// ---------------------------------------------------------------- Spooler

Spooler::Spooler(fs::path dir, std::size_t batch_size, std::uint64_t first_seq)
    : dir_(std::move(dir)), batch_size_(batch_size == 0 ? 1 : batch_size), next_seq_(first_seq) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create spool directory " + dir_.string() + ": " + ec.message());
}

Spooler::~Spooler() {
  if (current_) discard_batch();
}

void Spooler::open_batch() {
  BatchDescriptor batch;
  batch.seq = next_seq_++;
  for (auto t : kAllTables) {
    batch.paths[idx(t)] = dir_ / batch_file_name(batch.seq, t);
    files_[idx(t)].open(batch.paths[idx(t)], std::ios::binary | std::ios::trunc);
  }
  current_ = std::move(batch);
  for (const auto& f : files_) {
    if (!f) {
      const auto path = current_->paths[0].string();
      discard_batch();
      throw IoError("cannot create batch files next to " + path);
    }
  }
}

void Spooler::discard_batch() noexcept {
  for (auto& f : files_) f.close();
  if (!current_) return;
  std::error_code ec;
  for (const auto& p : current_->paths) fs::remove(p, ec);
  current_.reset();
}

BatchDescriptor Spooler::close_batch(bool partial) {
  for (auto& f : files_) {
    f.flush();
    if (!f) {
      discard_batch();
      throw IoError("batch file write failed in " + dir_.string());
    }
    f.close();
  }
  BatchDescriptor done = std::move(*current_);
  current_.reset();
  done.partial = partial;
  return done;
}

std::optional<BatchDescriptor> Spooler::add(const Component& component) {
  if (!current_) open_batch();
  auto& batch = *current_;
  try {
    if (const auto* node = std::get_if<ProvNode>(&component)) {
      const auto entries = encode_node(*node);
      write_tsv(entries, files_[idx(TableId::Node)]);
      batch.entries[idx(TableId::Node)] += entries.size();
      totals_[idx(TableId::Node)] += entries.size();
      ++batch.nodes;
    } else {
      const auto enc = encode_edge(std::get<ProvEdge>(component));
      write_tsv(enc.edge_entries, files_[idx(TableId::Edge)]);
      write_tsv(enc.transpose_entries, files_[idx(TableId::EdgeTranspose)]);
      batch.entries[idx(TableId::Edge)] += enc.edge_entries.size();
      batch.entries[idx(TableId::EdgeTranspose)] += enc.transpose_entries.size();
      totals_[idx(TableId::Edge)] += enc.edge_entries.size();
      totals_[idx(TableId::EdgeTranspose)] += enc.transpose_entries.size();
      ++batch.edges;
    }
  } catch (const IoError&) {
    discard_batch();
    throw;
  }
  if (batch.entries[idx(TableId::Node)] + batch.entries[idx(TableId::Edge)] >= batch_size_) {
    return close_batch(false);
  }
  return std::nullopt;
}

std::optional<BatchDescriptor> Spooler::finish() {
  if (!current_) return std::nullopt;
  if (current_->components() == 0) {
    discard_batch();
    return std::nullopt;
  }
  return close_batch(true);
}

std::vector<BatchDescriptor> spool(std::span<const Component> components,
                                   const PipelineConfig& config) {
  check_config(config);
  Spooler spooler(config.spool_dir, config.batch_size);
  std::vector<BatchDescriptor> batches;
  for (const auto& c : components) {
    if (auto done = spooler.add(c)) batches.push_back(std::move(*done));
  }
  if (auto last = spooler.finish()) batches.push_back(std::move(*last));
  return batches;
}

std::vector<BatchDescriptor> scan_spool_dir(const fs::path& dir) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());

  std::map<std::uint64_t, BatchDescriptor> groups;
  std::map<std::uint64_t, std::array<bool, 3>> present;
  for (const auto& entry : it) {
    const auto name = entry.path().filename().string();
    // batch-<digits>-<table>.tsv
    if (!name.starts_with("batch-") || !name.ends_with(".tsv")) continue;
    const std::string_view body{name.data() + 6, name.size() - 10};
    const auto dash = body.find('-');
    if (dash == std::string_view::npos || dash == 0) continue;
    std::uint64_t seq = 0;
    const auto [end, err] = std::from_chars(body.data(), body.data() + dash, seq);
    if (err != std::errc{} || end != body.data() + dash) continue;
    const auto table = parse_table_name(body.substr(dash + 1));
    if (!table) continue;
    auto& batch = groups[seq];
    batch.seq = seq;
    batch.paths[idx(*table)] = entry.path();
    present[seq][idx(*table)] = true;
  }

  std::vector<BatchDescriptor> out;
  for (auto& [seq, batch] : groups) {
    for (auto t : kAllTables) {
      if (!present[seq][idx(t)]) {
        throw IoError("batch " + std::to_string(seq) + " in " + dir.string() + " lacks its " +
                      std::string{table_name(t)} + " file");
      }
    }
    out.push_back(std::move(batch));
  }
  return out;
}

ParsedBatch read_batch(const BatchDescriptor& batch) {
  ParsedBatch parsed{batch, {}};
  for (auto t : kAllTables) parsed.entries[idx(t)] = read_batch_file(batch.path(t));
  return parsed;
}

IngestStats store_batch(Store& store, const ParsedBatch& batch, std::size_t chunk_size) {
  const auto start = std::chrono::steady_clock::now();
  IngestStats stats;
  for (auto t : kAllTables) {
    std::span<const KvEntry> all{batch.entries[idx(t)]};
    const auto step = chunk_size == 0 ? std::max<std::size_t>(all.size(), 1) : chunk_size;
    for (std::size_t off = 0; off < all.size(); off += step) {
      stats.entries_by_table[idx(t)] +=
          store.put_batch(t, all.subspan(off, std::min(step, all.size() - off)));
    }
    stats.entries_written += stats.entries_by_table[idx(t)];
  }
  stats.components = distinct_rows(batch.entries[idx(TableId::Node)]) +
                     distinct_rows(batch.entries[idx(TableId::Edge)]);
  stats.batches = 1;
  stats.wall_time = seconds_since(start);
  stats.update_rate();
  return stats;
}

IngestStats ingest_batch(Store& store, const BatchDescriptor& batch, std::size_t chunk_size) {
  const auto start = std::chrono::steady_clock::now();
  auto stats = store_batch(store, read_batch(batch), chunk_size);
  stats.wall_time = seconds_since(start);
  stats.update_rate();
  return stats;
}

IngestStats load_graph(Store& store, const ProvGraph& graph) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<KvEntry> nodes, edges, transpose;
  for (const auto& node : graph.nodes()) {
    auto enc = encode_node(node);
    std::move(enc.begin(), enc.end(), std::back_inserter(nodes));
  }
  for (const auto& edge : graph.edges()) {
    auto enc = encode_edge(edge);
    std::move(enc.edge_entries.begin(), enc.edge_entries.end(), std::back_inserter(edges));
    std::move(enc.transpose_entries.begin(), enc.transpose_entries.end(),
              std::back_inserter(transpose));
  }
  IngestStats stats;
  stats.entries_by_table = {store.put_batch(TableId::Node, nodes), store.put_batch(TableId::Edge, edges),
                           store.put_batch(TableId::EdgeTranspose, transpose)};
  for (auto n : stats.entries_by_table) stats.entries_written += n;
  stats.batches = 1;
  stats.components = component_count(graph);
  stats.wall_time = seconds_since(start);
  stats.update_rate();
  return stats;
}

// ---------------------------------------------------------------- report

std::string PipelineReport::summary_line() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "events=%llu translated=%llu rejected=%llu components=%llu batches=%llu "
                "seconds=%.3f rate=%.1f components/s",
                static_cast<unsigned long long>(events_in),
                static_cast<unsigned long long>(events_translated),
                static_cast<unsigned long long>(events_rejected),
                static_cast<unsigned long long>(components_ingested),
                static_cast<unsigned long long>(batches), seconds, components_per_sec);
  std::string line{buf};
  if (error) line += " error=" + *error;
  return line;
}

std::string PipelineReport::csv_header() { return "events,components,batches,seconds,components_per_sec"; }

std::string PipelineReport::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%llu,%llu,%.6f,%.1f",
                static_cast<unsigned long long>(events_in),
                static_cast<unsigned long long>(components_ingested),
                static_cast<unsigned long long>(batches), seconds, components_per_sec);
  return buf;
}

// ---------------------------------------------------------------- Pipeline

Pipeline::Pipeline(Store& store, PipelineConfig config)
    : store_(store),
      config_((check_config(config), std::move(config))),
      spooler_(config_.spool_dir, config_.batch_size),
      queue_(config_.queue_depth),
      started_(std::chrono::steady_clock::now()) {
  loader_ = std::thread([this] { load_loop(); });
}

Pipeline::~Pipeline() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void Pipeline::fail(std::string message) {
  std::lock_guard lock(mutex_);
  if (!report_.error) report_.error = std::move(message);
}

void Pipeline::throw_if_failed() const {
  std::lock_guard lock(mutex_);
  if (report_.error) throw PipelineError(*report_.error);
}

void Pipeline::submit(const EventRecord& event) {
  throw_if_failed();
  {
    std::lock_guard lock(mutex_);
    ++report_.events_in;
  }
  std::vector<Component> components;
  try {
    components = translate_event(event, translation_);
  } catch (const TranslationError& e) {
    if (!config_.skip_untranslatable) {
      fail(e.what());
      throw PipelineError(e.what());
    }
    std::lock_guard lock(mutex_);
    ++report_.events_rejected;
    return;
  }
  for (const auto& c : components) submit(c);

  bool report_due = false;
  {
    std::lock_guard lock(mutex_);
    ++report_.events_translated;
    report_due = config_.report_interval > 0 && config_.progress &&
                 report_.events_translated % config_.report_interval == 0;
  }
  if (report_due) config_.progress(report());
}

void Pipeline::submit(const Component& component) {
  throw_if_failed();
  std::optional<BatchDescriptor> done;
  try {
    done = spooler_.add(component);
  } catch (const std::exception& e) {
    fail(e.what());
    throw PipelineError(e.what());
  }
  {
    std::lock_guard lock(mutex_);
    ++report_.components;
    report_.entries_spooled = spooler_.total_entries();
  }
  if (done) hand_off(std::move(*done));
}

void Pipeline::hand_off(BatchDescriptor batch) {
  if (!queue_.push(std::move(batch))) {
    throw_if_failed();
    throw PipelineError("pipeline loader stopped");
  }
}

void Pipeline::load_loop() {
  while (auto batch = queue_.pop()) {
    try {
      const auto stats = ingest_batch(store_, *batch);
      std::lock_guard lock(mutex_);
      ++report_.batches;
      report_.components_ingested += stats.components;
      for (auto t : kAllTables) report_.entries_stored[idx(t)] += stats.entries_by_table[idx(t)];
    } catch (const std::exception& e) {
      fail(std::string{"batch "} + std::to_string(batch->seq) + ": " + e.what());
      queue_.close();
      return;
    }
    if (!config_.keep_spool) {
      std::error_code ec;
      for (const auto& p : batch->paths) fs::remove(p, ec);
    }
  }
}

PipelineReport Pipeline::report() const {
  std::lock_guard lock(mutex_);
  auto r = report_;
  r.seconds = seconds_since(started_);
  r.components_per_sec = r.seconds > 0 ? static_cast<double>(r.components_ingested) / r.seconds : 0;
  return r;
}

PipelineReport Pipeline::finish() {
  if (!finished_) {
    finished_ = true;
    // Components spooled before a failure are still loaded; after a spool
    // or loader failure there is nothing left to hand off.
    try {
      if (auto last = spooler_.finish()) hand_off(std::move(*last));
    } catch (const std::exception& e) {
      fail(e.what());
    }
    queue_.close();
    if (loader_.joinable()) loader_.join();
  }
  return report();
}

// ---------------------------------------------------------------- drivers

PipelineReport run_pipeline(const EventSource& source, Store& store, const PipelineConfig& config) {
  Pipeline pipeline(store, config);
  std::optional<std::string> source_error;
  try {
    while (auto event = source()) pipeline.submit(*event);
  } catch (const PipelineError&) {
    // recorded in the report
  } catch (const std::exception& e) {
    source_error = e.what();
  }
  auto report = pipeline.finish();
  if (source_error && !report.error) report.error = std::move(source_error);
  return report;
}

PipelineReport run_pipeline(std::span<const EventRecord> events, Store& store,
                            const PipelineConfig& config) {
  std::size_t next = 0;
  return run_pipeline(
      [&]() -> std::optional<EventRecord> {
        if (next == events.size()) return std::nullopt;
        return events[next++];
      },
      store, config);
}

PipelineReport run_graph_pipeline(const ProvGraph& graph, Store& store,
                                  const PipelineConfig& config) {
  Pipeline pipeline(store, config);
  try {
    for (const auto& node : graph.nodes()) pipeline.submit(Component{node});
    for (const auto& edge : graph.edges()) pipeline.submit(Component{edge});
  } catch (const PipelineError&) {
  }
  return pipeline.finish();
}

}  // namespace provdb
