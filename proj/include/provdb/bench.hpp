#pragma once

// Ingest-rate and query-time sweeps over generated graphs of growing size.
// Each row is the median of `repetitions` runs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace provdb {

struct BenchRow {
  std::uint64_t graph_nodes = 0;
  std::uint64_t components = 0;
  double wall_seconds = 0.0;
  // components/second for ingest rows, query seconds for query rows.
  double rate_or_latency = 0.0;
  std::optional<std::uint64_t> max_depth;  // query rows only
  std::uint64_t levels = 0;
  std::uint64_t scans = 0;
};

struct IngestBenchConfig {
  std::vector<std::uint64_t> sizes;
  std::uint32_t max_edges = 4;
  std::uint64_t seed = 1;
  unsigned repetitions = 3;
  std::size_t batch_size = 4096;
  // Scratch space for spool files.
  std::filesystem::path work_dir;
};

struct QueryBenchConfig {
  std::vector<std::uint64_t> sizes;
  std::uint32_t max_edges = 4;
  std::uint64_t seed = 1;
  unsigned repetitions = 3;
  std::uint32_t depth_limit = 64;
};

// One row per size: the graph is generated, then spooled and loaded into a
// fresh in-memory store through the pipeline.
std::vector<BenchRow> bench_ingest(const IngestBenchConfig& config);

// One row per size: the graph is loaded, then traversed from its most
// recently generated node. max_depth is that node's graph_depth.
std::vector<BenchRow> bench_query(const QueryBenchConfig& config);

std::string ingest_csv(std::span<const BenchRow> rows);
std::string query_csv(std::span<const BenchRow> rows);

double median(std::vector<double> values);

// "2,4,16" or "2^4..2^16" style size list; throws std::invalid_argument.
std::vector<std::uint64_t> parse_sizes(const std::string& text);

}  // namespace provdb
