#include "provdb/bench.hpp"

#include "provdb/analytics.hpp"
#include "provdb/error.hpp"
#include "provdb/graph_gen.hpp"
#include "provdb/ingest_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <stdexcept>
#include <unistd.h>

namespace provdb {

namespace fs = std::filesystem;

namespace {

std::uint64_t parse_term(std::string_view t) {
  std::uint64_t base = 0, exp = 1;
  const auto caret = t.find('^');
  auto num = [&](std::string_view s, std::uint64_t& v) {
    const auto [end, err] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || err != std::errc{} || end != s.data() + s.size()) {
      throw std::invalid_argument("bad size '" + std::string{t} + "'");
    }
  };
  if (caret == std::string_view::npos) {
    num(t, base);
    return base;
  }
  num(t.substr(0, caret), base);
  num(t.substr(caret + 1), exp);
  std::uint64_t v = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (v > UINT64_MAX / std::max<std::uint64_t>(base, 1)) throw std::invalid_argument("size overflow");
    v *= base;
  }
  return v;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::vector<std::uint64_t> parse_sizes(const std::string& text) {
  std::vector<std::uint64_t> sizes;
  std::string_view rest{text};
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (const auto dots = item.find(".."); dots != std::string_view::npos) {
      // 2^a..2^b expands to every power of two in between.
      const auto lo = parse_term(item.substr(0, dots));
      const auto hi = parse_term(item.substr(dots + 2));
      if (lo == 0 || lo > hi) throw std::invalid_argument("bad range '" + std::string{item} + "'");
      for (auto v = lo; v <= hi; v *= 2) {
        sizes.push_back(v);
        if (v > UINT64_MAX / 2) break;
      }
    } else {
      sizes.push_back(parse_term(item));
    }
  }
  if (sizes.empty()) throw std::invalid_argument("empty size list");
  for (auto s : sizes) {
    if (s == 0) throw std::invalid_argument("sizes must be >= 1");
  }
  return sizes;
}

std::vector<BenchRow> bench_ingest(const IngestBenchConfig& config) {
  const auto work = config.work_dir.empty()
                        ? fs::temp_directory_path() / ("provdb-bench-" + std::to_string(::getpid()))
                        : config.work_dir;
  std::vector<BenchRow> rows;
  for (auto size : config.sizes) {
    const auto graph = generate({size, config.max_edges, config.seed, {}});
    std::vector<double> seconds;
    BenchRow row;
    row.graph_nodes = size;
    row.components = component_count(graph);
    for (unsigned rep = 0; rep < std::max(1u, config.repetitions); ++rep) {
      Store store;
      PipelineConfig pc;
      pc.batch_size = config.batch_size;
      pc.spool_dir = work / ("spool-" + std::to_string(size) + "-" + std::to_string(rep));
      const auto report = run_graph_pipeline(graph, store, pc);
      std::error_code ec;
      fs::remove_all(pc.spool_dir, ec);
      if (report.error) throw PipelineError("ingest bench failed: " + *report.error);
      seconds.push_back(report.seconds);
    }
    row.wall_seconds = median(seconds);
    row.rate_or_latency = row.wall_seconds > 0 ? static_cast<double>(row.components) / row.wall_seconds : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<BenchRow> bench_query(const QueryBenchConfig& config) {
  std::vector<BenchRow> rows;
  for (auto size : config.sizes) {
    const auto graph = generate({size, config.max_edges, config.seed, {}});
    Store store;
    load_graph(store, graph);
    TraversalQuery query;
    query.start_nodes = {graph.nodes().back().id};
    query.depth = config.depth_limit;

    BenchRow row;
    row.graph_nodes = size;
    row.components = component_count(graph);
    row.max_depth = graph_depth(graph, query.start_nodes);
    std::vector<double> seconds;
    for (unsigned rep = 0; rep < std::max(1u, config.repetitions); ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = bfs(store, query);
      seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      row.levels = result.levels_expanded;
      row.scans = result.scans_performed;
    }
    row.wall_seconds = median(seconds);
    row.rate_or_latency = row.wall_seconds;
    rows.push_back(row);
  }
  return rows;
}

std::string ingest_csv(std::span<const BenchRow> rows) {
  std::string out = "graph_nodes,components,wall_seconds,components_per_sec\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%llu,%.6f,%.1f\n",
                  static_cast<unsigned long long>(r.graph_nodes),
                  static_cast<unsigned long long>(r.components), r.wall_seconds, r.rate_or_latency);
    out += buf;
  }
  return out;
}

std::string query_csv(std::span<const BenchRow> rows) {
  std::string out = "graph_nodes,components,wall_seconds,max_depth,levels,scans\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%llu,%.6f,%llu,%llu,%llu\n",
                  static_cast<unsigned long long>(r.graph_nodes),
                  static_cast<unsigned long long>(r.components), r.wall_seconds,
                  static_cast<unsigned long long>(r.max_depth.value_or(0)),
                  static_cast<unsigned long long>(r.levels),
                  static_cast<unsigned long long>(r.scans));
    out += buf;
  }
  return out;
}

}  // namespace provdb
