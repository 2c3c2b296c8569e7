#include "provdb/curator_service.hpp"
#include "provdb/error.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

using namespace provdb;
using testsupport::TempDir;

namespace {

std::vector<WireEvent> stream_for(const std::string& source, std::uint64_t divisor,
                                  std::uint64_t seed = 1) {
  StreamConfig sc;
  sc.mix = scaled_mix(kKernelCompileMix, divisor);
  sc.seed = seed;
  sc.id_namespace = source + ".";
  std::vector<WireEvent> out;
  for (auto& e : synthetic_stream(sc)) out.push_back({source, std::move(e)});
  return out;
}

// A running server over an in-memory store.
struct Harness {
  TempDir dir;
  Store store;
  Pipeline pipeline;
  CuratorServer server;
  Endpoint endpoint;

  explicit Harness(ServerOptions options = {})
      : pipeline(store, make_config(dir.path())), server(pipeline, options) {
    endpoint = server.start({"127.0.0.1", 0});
  }

  PipelineReport shutdown() {
    server.stop();
    return pipeline.finish();
  }

  static PipelineConfig make_config(const std::filesystem::path& spool) {
    PipelineConfig c;
    c.batch_size = 512;
    c.spool_dir = spool;
    c.skip_untranslatable = true;
    return c;
  }
};

std::uint16_t unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST_CASE("wire format round trip") {
  const WireEvent w{"h1", {7, EventKind::Fperm, "h1.AC3", "h1.EN9", 3724, AccessMode::Read}};
  CHECK(format_wire_event(w) == "h1\t7\tfperm\th1.AC3\th1.EN9\t3724\tr");
  CHECK(parse_wire_event(format_wire_event(w)) == w);

  const WireEvent boot{"h1", {1, EventKind::Boot, "h1.AC0", "", 0, AccessMode::None}};
  CHECK(format_wire_event(boot) == "h1\t1\tboot\th1.AC0\t\t0\t-");
  CHECK(parse_wire_event(format_wire_event(boot)) == boot);

  for (const auto& e : stream_for("s", 2000)) REQUIRE(parse_wire_event(format_wire_event(e)) == e);
}

TEST_CASE("wire format errors") {
  auto reason = [](std::string_view line) {
    try {
      (void)parse_wire_event(line);
    } catch (const WireError& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  CHECK(reason("h1\t1\tboot\tAC0\t\t0") == "expected 7 fields");
  CHECK(reason("h1\t1\tboot\tAC0\t\t0\t-\textra") == "expected 7 fields");
  CHECK(reason("h1\tx\tboot\tAC0\t\t0\t-").starts_with("bad event_id"));
  CHECK(reason("h1\t1\tlogin\tAC0\t\t0\t-").starts_with("unknown etype"));
  CHECK(reason("h1\t1\tboot\tAC0\t\t-5\t-").starts_with("bad timestamp"));
  CHECK(reason("h1\t1\tfperm\tAC0\tEN1\t0\tx").starts_with("bad mode"));
  CHECK(reason("h1\t1\tfperm\tAC0\tEN1\t0\t-") != "accepted");
  CHECK(reason("h1\t1\tboot\tAC0\tAC1\t0\t-") != "accepted");
  CHECK(reason("\t1\tboot\tAC0\t\t0\t-") != "accepted");
}

TEST_CASE("endpoints") {
  const auto ep = parse_endpoint("127.0.0.1:7070");
  CHECK(ep.host == "127.0.0.1");
  CHECK(ep.port == 7070);
  CHECK(ep.to_string() == "127.0.0.1:7070");
  CHECK_THROWS_AS(parse_endpoint("localhost"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("localhost:99999"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("localhost:http"), std::invalid_argument);
}

TEST_CASE("ten events from one client") {
  Harness h;
  auto events = stream_for("h1", 1000);
  events.resize(10);
  const auto ack = client_send(h.endpoint, events);
  CHECK(ack.accepted == 10);
  CHECK(ack.naks == 0);
  const auto report = h.shutdown();
  CHECK(report.events_in == 10);
  CHECK(report.events_translated == 10);
  CHECK_FALSE(report.error);
}

TEST_CASE("empty and malformed sends") {
  Harness h;
  const auto none = client_send(h.endpoint, std::vector<WireEvent>{});
  CHECK(none.accepted == 0);
  CHECK(none.naks == 0);

  const std::vector<std::string> six{"h1\t1\tboot\th1.AC0\t\t0"};
  const auto bad = client_send_lines(h.endpoint, six);
  CHECK(bad.naks == 1);
  CHECK(bad.nak_messages == std::vector<std::string>{"line 1: expected 7 fields"});

  const std::vector<std::string> mixed{"garbage", "h2\t1\tboot\th2.AC0\t\t0\t-"};
  const auto ack = client_send_lines(h.endpoint, mixed);
  CHECK(ack.accepted == 1);
  CHECK(ack.naks == 1);
  CHECK_FALSE(ack.cut_off);
  CHECK(h.shutdown().events_in == 1);
}

TEST_CASE("per-source ids must increase") {
  Harness h;
  const std::vector<std::string> lines{
      "h1\t5\tboot\th1.AC0\t\t0\t-",
      "h1\t5\tcredfork\th1.AC0\th1.AC1\t0\t-",
      "h1\t4\tcredfork\th1.AC0\th1.AC2\t0\t-",
      "h2\t1\tboot\th2.AC0\t\t0\t-",
      "h1\t9\tcredfork\th1.AC0\th1.AC3\t0\t-",
  };
  const auto ack = client_send_lines(h.endpoint, lines);
  CHECK(ack.accepted == 3);
  CHECK(ack.naks == 2);
  REQUIRE(ack.nak_messages.size() == 2);
  CHECK(ack.nak_messages[0].starts_with("line 2: event_id 5 not increasing"));
  const auto tallies = h.server.tallies();
  CHECK(tallies.at("h1") == SourceTally{2, 14, 9});
  CHECK(tallies.at("h2") == SourceTally{1, 1, 1});
  h.shutdown();
}

TEST_CASE("error floods cut the connection off") {
  Harness h;
  std::vector<std::string> lines(500, "nonsense");
  lines.push_back("h1\t1\tboot\th1.AC0\t\t0\t-");
  const auto ack = client_send_lines(h.endpoint, lines);
  CHECK(ack.cut_off);
  CHECK(ack.naks == 101);
  CHECK(ack.accepted == 0);
  CHECK(h.shutdown().events_in == 0);
}

TEST_CASE("connection refused is reported distinctly") {
  const Endpoint nowhere{"127.0.0.1", unused_port()};
  auto events = stream_for("h1", 100000);
  try {
    (void)client_send(nowhere, events);
    FAIL("expected ConnectionError");
  } catch (const ConnectionError& e) {
    CHECK(e.kind() == ConnectionError::Kind::Refused);
  }
}

TEST_CASE("bind failures") {
  Harness h;
  TempDir dir;
  Store store;
  Pipeline p(store, Harness::make_config(dir.path()));
  CuratorServer second(p);
  CHECK_THROWS_AS(second.start(h.endpoint), IoError);
  h.shutdown();
}

TEST_CASE("four concurrent clients") {
  Harness h;
  const std::vector<std::string> sources{"h1", "h2", "h3", "h4"};
  std::vector<std::vector<WireEvent>> streams;
  for (std::size_t i = 0; i < sources.size(); ++i) streams.push_back(stream_for(sources[i], 400, i + 1));
  std::vector<AckSummary> acks(sources.size());
  std::vector<std::thread> clients;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    clients.emplace_back([&, i] { acks[i] = client_send(h.endpoint, streams[i]); });
  }
  for (auto& t : clients) t.join();
  const auto report = h.shutdown();

  std::uint64_t acked = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    CHECK(acks[i].naks == 0);
    CHECK(acks[i].accepted == streams[i].size());
    acked += acks[i].accepted;
  }
  CHECK(report.events_in == acked);
  CHECK(report.events_translated == acked);
  CHECK_FALSE(report.error);
  const auto tallies = h.server.tallies();
  for (std::size_t i = 0; i < sources.size(); ++i) {
    std::uint64_t sum = 0;
    for (const auto& e : streams[i]) sum += e.event.event_id;
    CHECK(tallies.at(sources[i]).event_id_sum == sum);
    CHECK(tallies.at(sources[i]).accepted == streams[i].size());
  }
}

TEST_CASE("stop during a stream keeps the books balanced") {
  Harness h;
  const auto events = stream_for("h1", 40);
  std::optional<AckSummary> ack;
  std::thread client([&] {
    try {
      ack = client_send(h.endpoint, events);
    } catch (const ConnectionError&) {
    }
  });
  while (h.server.accepted() < 1000) std::this_thread::yield();
  const auto report = h.shutdown();
  client.join();

  CHECK(report.events_in == h.server.accepted());
  CHECK(report.events_in < events.size());
  if (ack) CHECK(ack->accepted == report.events_in);
  CHECK_FALSE(report.error);
  CHECK(report.components == report.components_ingested);
  CHECK(h.store.table_stats(TableId::Node).entries + h.store.table_stats(TableId::Edge).rows ==
        report.components_ingested);
}
