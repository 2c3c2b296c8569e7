#include "provdb/d4m_codec.hpp"
#include "provdb/error.hpp"
#include "provdb/graph_gen.hpp"
#include "provdb/kv_store.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>
#include <thread>

using namespace provdb;
using testsupport::TempDir;

namespace {

void load(Store& store, const ProvGraph& g) {
  for (const auto& n : g.nodes()) store.put_batch(TableId::Node, encode_node(n));
  for (const auto& e : g.edges()) {
    const auto enc = encode_edge(e);
    store.put_batch(TableId::Edge, enc.edge_entries);
    store.put_batch(TableId::EdgeTranspose, enc.transpose_entries);
  }
}

std::vector<KvEntry> full_scan(const Store& store, TableId t) { return store.scan_prefix(t, ""); }

struct CrashAt {
  FlushStage stage;
};

}  // namespace

TEST_CASE("fresh stores are empty") {
  Store mem;
  for (auto t : kAllTables) CHECK(mem.table_stats(t) == TableStats{0, 0});

  TempDir dir;
  Store disk(dir / "db");
  for (auto t : kAllTables) CHECK(disk.table_stats(t) == TableStats{0, 0});
}

TEST_CASE("put_batch and scan_row") {
  Store store;
  const auto wgb2 = encode_edge({"wgb-2", EdgeType::Generation, "AC2", "EN6"}).edge_entries;
  CHECK(store.put_batch(TableId::Edge, wgb2) == 5);
  CHECK(store.scan_row(TableId::Edge, "wgb-2") == wgb2);
  CHECK(store.put_batch(TableId::Edge, std::vector<KvEntry>{}) == 0);

  const auto before = store.table_stats(TableId::Edge);
  store.put_batch(TableId::Edge, wgb2);
  CHECK(store.table_stats(TableId::Edge) == before);

  CHECK(store.scan_row(TableId::Edge, "wgb-9").empty());
  CHECK(store.scan_row(TableId::Edge, "wgb").empty());

  SUBCASE("last write wins") {
    store.put_batch(TableId::Edge, std::vector<KvEntry>{{"wgb-2", ":type|PROV_GENERATION", "2"}});
    CHECK(store.scan_row(TableId::Edge, "wgb-2")[4].val == "2");
    CHECK(store.table_stats(TableId::Edge).entries == 5);
  }
  SUBCASE("last write wins within one batch") {
    store.put_batch(TableId::Node, std::vector<KvEntry>{{"EN1", ":kind|entity", "3"},
                                                         {"EN0", ":kind|entity", "1"},
                                                         {"EN1", ":kind|entity", "2"}});
    const auto row = store.scan_row(TableId::Node, "EN1");
    REQUIRE(row.size() == 1);
    CHECK(row[0].val == "2");
    CHECK(store.table_stats(TableId::Node) == TableStats{2, 2});
  }
  SUBCASE("invalid batches are rejected whole") {
    const std::vector<KvEntry> bad{{"x", ":a|b", "1"}, {"", ":a|b", "1"}};
    CHECK_THROWS_AS(store.put_batch(TableId::Node, bad), StoreError);
    CHECK(store.table_stats(TableId::Node).entries == 0);
  }
  SUBCASE("closed write queue") {
    store.close_writes();
    CHECK_THROWS_AS(store.put_batch(TableId::Node, encode_node({"EN0", NodeKind::Entity, {}})),
                    StoreError);
    CHECK(store.table_stats(TableId::Node).entries == 0);
  }
}

TEST_CASE("sample scans") {
  Store store;
  const auto g = testsupport::sample_graph();
  load(store, g);
  CHECK(store.table_stats(TableId::Node) == TableStats{11, 11});
  CHECK(store.scan_row(TableId::Edge, "wgb-3") == encode_edge(*g.find_edge("wgb-3")).edge_entries);

  const auto gen_en6 = store.scan_prefix(TableId::EdgeTranspose, ":outNode|EN6");
  REQUIRE(gen_en6.size() == 1);
  CHECK(gen_en6[0].col == "wgb-2");

  CHECK(full_scan(store, TableId::Edge).size() == 12 * 5);

  const std::vector<std::string> rows{"wgb-3", "missing", "used-0"};
  const auto multi = store.scan_rows(TableId::Edge, rows);
  CHECK(multi.size() == 10);
  CHECK(std::is_sorted(multi.begin(), multi.end()));
}

TEST_CASE("scans agree with a filter-scan oracle on random loads") {
  Store store;
  const auto g = generate({500, 4, 11, {}});
  load(store, g);

  for (auto t : kAllTables) {
    const auto all = full_scan(store, t);
    CHECK(std::is_sorted(all.begin(), all.end()));
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());

    std::set<std::string> rows;
    for (const auto& e : all) rows.insert(e.row);
    CHECK(store.table_stats(t) == TableStats{all.size(), rows.size()});

    std::vector<KvEntry> union_of_rows;
    for (const auto& r : rows) {
      const auto part = store.scan_row(t, r);
      union_of_rows.insert(union_of_rows.end(), part.begin(), part.end());
    }
    CHECK(union_of_rows == all);

    for (const std::string prefix : {":outNode|EN1", ":in", "AC", "wgb-1", "zzz"}) {
      std::vector<KvEntry> expected;
      std::copy_if(all.begin(), all.end(), std::back_inserter(expected),
                   [&](const KvEntry& e) { return e.row.starts_with(prefix); });
      CHECK(store.scan_prefix(t, prefix) == expected);
    }
  }

  std::size_t expected_edge_entries = 5 * g.edges().size();
  CHECK(store.table_stats(TableId::Edge).entries == expected_edge_entries);
  CHECK(store.table_stats(TableId::EdgeTranspose).entries == expected_edge_entries);
}

TEST_CASE("scan counter") {
  Store store;
  load(store, testsupport::sample_graph());
  const auto base = store.scan_count();
  (void)store.scan_row(TableId::Node, "EN1");
  (void)store.scan_prefix(TableId::Node, "EN");
  const std::vector<std::string> rows{"EN1", "EN2", "EN3"};
  (void)store.scan_rows(TableId::Node, rows);
  CHECK(store.scan_count() == base + 3);
}

TEST_CASE("flush and reopen") {
  TempDir dir;
  const auto root = dir / "db";
  std::array<std::string, 3> dumps;
  {
    Store store(root);
    load(store, generate({300, 4, 5, {}}));
    store.flush();
    for (auto t : kAllTables) dumps[static_cast<std::size_t>(t)] = store.dump(t);
  }
  const auto manifest = testsupport::read_file(root / "MANIFEST");
  CHECK(manifest.starts_with("provdb-snapshot v1\n"));
  {
    Store reopened(root);
    for (auto t : kAllTables) CHECK(reopened.dump(t) == dumps[static_cast<std::size_t>(t)]);
    CHECK(reopened.table_stats(TableId::Node).entries == 300);

    // two flushes with no writes in between leave identical bytes
    const auto node_before = testsupport::read_file(root / "node.tsv");
    reopened.flush();
    CHECK(testsupport::read_file(root / "MANIFEST") == manifest);
    CHECK(testsupport::read_file(root / "node.tsv") == node_before);
  }

  Store mem;
  try {
    mem.flush();
    FAIL("expected StoreError");
  } catch (const StoreError& e) {
    CHECK(std::string(e.what()) == "no persistence path");
  }
}

TEST_CASE("corrupt snapshots are refused") {
  TempDir dir;
  const auto root = dir / "db";
  {
    Store store(root);
    load(store, testsupport::sample_graph());
    store.flush();
  }
  SUBCASE("truncated table file") {
    const auto text = testsupport::read_file(root / "edge.tsv");
    std::ofstream(root / "edge.tsv", std::ios::trunc) << text.substr(0, text.size() / 2);
    CHECK_THROWS_WITH_AS(Store{root}, doctest::Contains("corrupt snapshot"), SnapshotError);
  }
  SUBCASE("manifest count edited to match nothing") {
    auto m = testsupport::read_file(root / "MANIFEST");
    m.replace(m.find("node 11 11"), 10, "node 12 11");
    std::ofstream(root / "MANIFEST", std::ios::trunc) << m;
    CHECK_THROWS_AS(Store{root}, SnapshotError);
  }
  SUBCASE("missing manifest") {
    std::filesystem::remove(root / "MANIFEST");
    CHECK_THROWS_AS(Store{root}, SnapshotError);
  }
  SUBCASE("bad header") {
    std::ofstream(root / "MANIFEST", std::ios::trunc) << "something else\n";
    CHECK_THROWS_AS(Store{root}, SnapshotError);
  }
}

TEST_CASE("a crash during flush leaves the old or the new snapshot") {
  for (auto stage : {FlushStage::Staged, FlushStage::Committed, FlushStage::PartiallyInstalled}) {
    CAPTURE(static_cast<int>(stage));
    TempDir dir;
    const auto root = dir / "db";
    std::array<std::string, 3> old_dump, new_dump;
    {
      Store store(root);
      load(store, generate({50, 2, 1, {}}));
      store.flush();
      for (auto t : kAllTables) old_dump[static_cast<std::size_t>(t)] = store.dump(t);

      load(store, generate({80, 3, 2, {}}));
      for (auto t : kAllTables) new_dump[static_cast<std::size_t>(t)] = store.dump(t);
      store.set_flush_hook([stage](FlushStage s) {
        if (s == stage) throw CrashAt{s};
      });
      CHECK_THROWS_AS(store.flush(), CrashAt);
    }
    Store reopened(root);
    std::array<std::string, 3> got;
    for (auto t : kAllTables) got[static_cast<std::size_t>(t)] = reopened.dump(t);
    if (stage == FlushStage::Staged) {
      CHECK(got == old_dump);
    } else {
      CHECK(got == new_dump);
    }
    CHECK_FALSE(std::filesystem::exists(root / ".staging"));
  }
}

TEST_CASE("readers see whole batches") {
  Store store;
  std::vector<KvEntry> batch;
  for (int i = 0; i < 50; ++i) batch.push_back({"row", ":c|" + std::to_string(1000 + i), "1"});
  std::atomic<bool> done{false};
  std::atomic<int> torn{0};
  std::thread reader([&] {
    while (!done) {
      const auto n = store.scan_row(TableId::Node, "row").size();
      if (n % 50 != 0) ++torn;
    }
  });
  for (int round = 0; round < 200; ++round) {
    for (auto& e : batch) e.col = ":c|" + std::to_string(round) + "-" + e.col.substr(3);
    store.put_batch(TableId::Node, batch);
  }
  done = true;
  reader.join();
  CHECK(torn == 0);
  CHECK(store.table_stats(TableId::Node).entries == 200 * 50);
}

TEST_CASE("ingest stats rate") {
  IngestStats s;
  s.components = 100;
  s.wall_time = 0.5;
  s.update_rate();
  CHECK(s.components_per_sec == doctest::Approx(200.0));
  IngestStats zero;
  zero.update_rate();
  CHECK(zero.components_per_sec == 0.0);
}
