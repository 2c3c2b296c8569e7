#include "provdb/cli.hpp"

#include "provdb/analytics.hpp"
#include "provdb/bench.hpp"
#include "provdb/curator_service.hpp"
#include "provdb/error.hpp"
#include "provdb/graph_gen.hpp"
#include "provdb/ingest_pipeline.hpp"
#include "provdb/kv_store.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>

namespace provdb {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::string resolve_db(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("PROVDB_DB"); env && *env) return env;
  throw UsageError("no database path: pass --db or set PROVDB_DB");
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw IoError("cannot write " + path);
}

struct GenArgs {
  std::uint64_t nodes = 0;
  std::uint32_t max_edges = 4;
  std::uint64_t seed = 1;
  std::string out;
  std::size_t batch_size = 4096;
  std::string weights = "6,3,1";
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  GenConfig config{a.nodes, a.max_edges, a.seed, {}};
  const auto w = split_list(a.weights);
  if (w.size() != 3) throw UsageError("--weights needs three comma-separated integers");
  config.kind_weights = {static_cast<std::uint32_t>(std::stoul(w[0])),
                         static_cast<std::uint32_t>(std::stoul(w[1])),
                         static_cast<std::uint32_t>(std::stoul(w[2]))};
  try {
    check_config(config);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (fs::exists(a.out) && !fs::is_empty(a.out)) {
    throw IoError("output directory " + a.out + " is not empty");
  }

  const auto graph = generate(config);
  Spooler spooler(a.out, a.batch_size);
  std::uint64_t batches = 0;
  for (const auto& n : graph.nodes()) batches += spooler.add(Component{n}).has_value();
  for (const auto& e : graph.edges()) batches += spooler.add(Component{e}).has_value();
  batches += spooler.finish().has_value();

  const auto& totals = spooler.total_entries();
  nlohmann::json manifest = {
      {"nodes", graph.nodes().size()},
      {"edges", graph.edges().size()},
      {"components", component_count(graph)},
      {"batches", batches},
      {"seed", a.seed},
      {"max_edges", a.max_edges},
      {"entries", {{"node", totals[0]}, {"edge", totals[1]}, {"edgeT", totals[2]}}},
  };
  std::ofstream mf(fs::path(a.out) / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw IoError("cannot write manifest in " + a.out);

  out << "generated nodes=" << graph.nodes().size() << " edges=" << graph.edges().size()
      << " batches=" << batches << " out=" << a.out << '\n';
  return 0;
}

struct IngestArgs {
  std::string input;
  std::string db;
  std::size_t batch_size = 0;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  const auto db = resolve_db(a.db);
  if (!fs::is_directory(a.input)) throw IoError("input directory " + a.input + " not found");
  const auto batches = scan_spool_dir(a.input);
  Store store{fs::path(db)};
  IngestStats total;
  for (const auto& b : batches) total += ingest_batch(store, b, a.batch_size);
  store.flush();

  char line[256];
  std::snprintf(line, sizeof line,
                "ingested batches=%llu entries=%llu components=%llu seconds=%.6f rate=%.1f components/s\n",
                static_cast<unsigned long long>(total.batches),
                static_cast<unsigned long long>(total.entries_written),
                static_cast<unsigned long long>(total.components), total.wall_time,
                total.components_per_sec);
  out << line << "batches,entries,components,seconds,components_per_sec\n";
  std::snprintf(line, sizeof line, "%llu,%llu,%llu,%.6f,%.1f\n",
                static_cast<unsigned long long>(total.batches),
                static_cast<unsigned long long>(total.entries_written),
                static_cast<unsigned long long>(total.components), total.wall_time,
                total.components_per_sec);
  out << line;
  return 0;
}

struct QueryArgs {
  std::string db;
  std::string start;
  std::uint32_t depth = 0;
  std::string edge_types;
  std::string format = "listing";
};

int cmd_query(const QueryArgs& a, std::ostream& out, std::ostream& err) {
  const auto db = resolve_db(a.db);
  if (!fs::exists(fs::path(db) / "MANIFEST")) throw StoreError("no store at " + db);
  TraversalQuery query;
  query.start_nodes = split_list(a.start);
  if (query.start_nodes.empty()) throw UsageError("--start needs at least one node id");
  query.depth = a.depth;
  if (!a.edge_types.empty()) {
    std::set<EdgeType> filter;
    for (const auto& name : split_list(a.edge_types)) {
      const auto t = edge_type_from_name(name);
      if (!t) throw UsageError("unknown edge type '" + name + "'");
      filter.insert(*t);
    }
    query.edge_filter = std::move(filter);
  }

  const Store store{fs::path(db)};
  const auto result = bfs(store, query);
  for (const auto& id : result.missing_starts) err << "provdb: start not found: " << id << '\n';
  out << (a.format == "csv" ? format_csv(result) : format_result(result));
  return result.rows.empty() && result.start_not_found() ? 1 : 0;
}

struct LineageArgs {
  std::string db;
  std::string node;
  std::uint32_t depth = 16;
};

int cmd_lineage(const LineageArgs& a, std::ostream& out) {
  const Store store{fs::path(resolve_db(a.db))};
  for (const auto& id : lineage_inputs(store, a.node, a.depth)) out << id << '\n';
  return 0;
}

struct BenchArgs {
  std::string sizes;
  std::uint32_t max_edges = 4;
  std::uint64_t seed = 1;
  std::string db;
  std::string out = "-";
  unsigned reps = 3;
  bool single_run = false;
  std::size_t batch_size = 4096;
  std::uint32_t depth_limit = 64;
};

int cmd_bench_ingest(const BenchArgs& a, std::ostream& out) {
  IngestBenchConfig config;
  config.sizes = parse_sizes(a.sizes);
  config.max_edges = a.max_edges;
  config.seed = a.seed;
  config.repetitions = a.single_run ? 1 : a.reps;
  config.batch_size = a.batch_size;
  config.work_dir = a.db;
  write_output(a.out, ingest_csv(bench_ingest(config)), out);
  return 0;
}

int cmd_bench_query(const BenchArgs& a, std::ostream& out) {
  QueryBenchConfig config;
  config.sizes = parse_sizes(a.sizes);
  config.max_edges = a.max_edges;
  config.seed = a.seed;
  config.repetitions = a.single_run ? 1 : a.reps;
  config.depth_limit = a.depth_limit;
  write_output(a.out, query_csv(bench_query(config)), out);
  return 0;
}

struct ServeArgs {
  std::string listen;
  std::string db;
  std::size_t batch_size = 4096;
  std::string spool;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  Endpoint listen;
  try {
    listen = parse_endpoint(a.listen);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto db = resolve_db(a.db);

  // Signals are taken synchronously by this thread; every thread started
  // below inherits the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Store store{fs::path(db)};
  PipelineConfig pc;
  pc.batch_size = a.batch_size;
  pc.spool_dir = a.spool.empty() ? fs::path(db) / "spool" : fs::path(a.spool);
  pc.skip_untranslatable = true;
  Pipeline pipeline(store, pc);
  CuratorServer server(pipeline);
  const auto bound = server.start(listen);
  out << "provdb: listening on " << bound.to_string() << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  const auto report = pipeline.finish();
  store.flush();
  out << report.summary_line() << '\n' << PipelineReport::csv_header() << '\n' << report.csv_row() << '\n';
  return report.error ? 1 : 0;
}

struct SendArgs {
  std::string connect;
  std::string source = "h1";
  std::uint64_t divisor = 1000;
  std::uint64_t seed = 1;
};

int cmd_send(const SendArgs& a, std::ostream& out) {
  Endpoint server;
  try {
    server = parse_endpoint(a.connect);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  StreamConfig sc;
  sc.mix = scaled_mix(kKernelCompileMix, a.divisor);
  sc.seed = a.seed;
  sc.id_namespace = a.source + ".";
  std::vector<WireEvent> events;
  for (auto& e : synthetic_stream(sc)) events.push_back({a.source, std::move(e)});
  const auto ack = client_send(server, events);
  out << "sent=" << events.size() << " accepted=" << ack.accepted << " naks=" << ack.naks << '\n';
  for (const auto& m : ack.nak_messages) out << "NAK " << m << '\n';
  return ack.naks == 0 ? 0 : 1;
}

int cmd_stats(const std::string& db_flag, std::ostream& out) {
  const Store store{fs::path(resolve_db(db_flag))};
  out << "table,entries,rows\n";
  for (auto t : kAllTables) {
    const auto s = store.table_stats(t);
    out << table_name(t) << ',' << s.entries << ',' << s.rows << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"provdb: provenance graph ingest and lineage queries over a sorted key-value store"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a random provenance graph as TSV batches");
  g->add_option("--nodes", gen.nodes, "Number of nodes")->required()->check(CLI::PositiveNumber);
  g->add_option("--max-edges", gen.max_edges, "Maximum incoming edges per node")->capture_default_str();
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--batch-size", gen.batch_size, "Entries per batch")->capture_default_str();
  g->add_option("--weights", gen.weights, "Entity,Activity,Agent weights")->capture_default_str();

  IngestArgs ingest;
  auto* i = app.add_subcommand("ingest", "Load TSV batches into a store");
  i->add_option("--input", ingest.input, "Directory of batch files")->required();
  i->add_option("--db", ingest.db, "Store directory (default $PROVDB_DB)");
  i->add_option("--batch-size", ingest.batch_size, "Entries per store write (0 = whole batch)");

  QueryArgs query;
  auto* q = app.add_subcommand("query", "Breadth-first lineage traversal");
  q->add_option("--db", query.db, "Store directory (default $PROVDB_DB)");
  q->add_option("--start", query.start, "Comma-separated start node ids")->required();
  q->add_option("--depth", query.depth, "Number of hops")->required();
  q->add_option("--edge-types", query.edge_types, "Comma-separated edge types to follow");
  q->add_option("--format", query.format, "listing or csv")
      ->check(CLI::IsMember({"listing", "csv"}))
      ->capture_default_str();

  LineageArgs lineage;
  auto* l = app.add_subcommand("lineage", "Entity inputs that an output was derived from");
  l->add_option("--db", lineage.db, "Store directory (default $PROVDB_DB)");
  l->add_option("--node", lineage.node, "Output node id")->required();
  l->add_option("--depth", lineage.depth, "Maximum hops")->capture_default_str();

  BenchArgs bi;
  auto* b1 = app.add_subcommand("bench-ingest", "Ingest rate vs graph size (CSV)");
  b1->add_option("--sizes", bi.sizes, "Sizes, e.g. 2,4,8 or 2^1..2^16")->required();
  b1->add_option("--max-edges", bi.max_edges)->capture_default_str();
  b1->add_option("--seed", bi.seed)->capture_default_str();
  b1->add_option("--db", bi.db, "Scratch directory for spool files");
  b1->add_option("--out", bi.out, "CSV path, - for stdout")->capture_default_str();
  b1->add_option("--reps", bi.reps, "Repetitions per size (median reported)")->capture_default_str();
  b1->add_flag("--single-run", bi.single_run, "One repetition per size");
  b1->add_option("--batch-size", bi.batch_size)->capture_default_str();

  BenchArgs bq;
  auto* b2 = app.add_subcommand("bench-query", "Query time vs graph size (CSV)");
  b2->add_option("--sizes", bq.sizes, "Sizes, e.g. 2,4,8 or 2^1..2^16")->required();
  b2->add_option("--max-edges", bq.max_edges)->capture_default_str();
  b2->add_option("--seed", bq.seed)->capture_default_str();
  b2->add_option("--depth-limit", bq.depth_limit)->capture_default_str();
  b2->add_option("--out", bq.out, "CSV path, - for stdout")->capture_default_str();
  b2->add_option("--reps", bq.reps)->capture_default_str();
  b2->add_flag("--single-run", bq.single_run);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Accept event streams over TCP until SIGINT/SIGTERM");
  s->add_option("--listen", serve.listen, "host:port (port 0 picks one)")->required();
  s->add_option("--db", serve.db, "Store directory (default $PROVDB_DB)");
  s->add_option("--batch-size", serve.batch_size)->capture_default_str();
  s->add_option("--spool", serve.spool, "Spool directory (default <db>/spool)");

  SendArgs send;
  auto* c = app.add_subcommand("send", "Stream a synthetic event mix to a running server");
  c->add_option("--connect", send.connect, "host:port")->required();
  c->add_option("--source", send.source, "Source id, also the node id namespace")->capture_default_str();
  c->add_option("--divisor", send.divisor, "Scale-down factor for the event mix")->capture_default_str();
  c->add_option("--seed", send.seed)->capture_default_str();

  std::string stats_db;
  auto* st = app.add_subcommand("stats", "Per-table entry and row counts");
  st->add_option("--db", stats_db, "Store directory (default $PROVDB_DB)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "provdb: usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*i) return cmd_ingest(ingest, out);
    if (*q) return cmd_query(query, out, err);
    if (*l) return cmd_lineage(lineage, out);
    if (*b1) return cmd_bench_ingest(bi, out);
    if (*b2) return cmd_bench_query(bq, out);
    if (*s) return cmd_serve(serve, out);
    if (*c) return cmd_send(send, out);
    if (*st) return cmd_stats(stats_db, out);
  } catch (const UsageError& e) {
    err << "provdb: usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "provdb: usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "provdb: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace provdb
