#pragma once

// Line-oriented TCP front end feeding events from many collector hosts into
// one pipeline.
//
// Client -> server, one event per LF-terminated line, 7 tab-separated fields:
//   source_id  event_id  etype  subject  object  timestamp_us  mode
// object is empty for boot; mode is r, w or - .
// Server -> client: nothing for an accepted line, "NAK <line> <reason>" for a
// rejected one, and "DONE <accepted> <naks>" once the client half-closes.
// After too many consecutive bad lines the server sends NAK and DONE, stops
// reading events, and discards the rest of the connection's input.

#include "provdb/bounded_queue.hpp"
#include "provdb/error.hpp"
#include "provdb/event_translator.hpp"
#include "provdb/ingest_pipeline.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace provdb {

struct WireEvent {
  std::string source_id;
  EventRecord event;

  friend bool operator==(const WireEvent&, const WireEvent&) = default;
};

class WireError : public Error {
 public:
  using Error::Error;
};

// Without the trailing LF.
std::string format_wire_event(const WireEvent& event);
// Throws WireError with a short reason, e.g. "expected 7 fields".
WireEvent parse_wire_event(std::string_view line);

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
};

// "host:port"; throws std::invalid_argument.
Endpoint parse_endpoint(std::string_view text);

struct ServerOptions {
  std::size_t max_consecutive_errors = 100;
  std::size_t queue_capacity = 8192;
  std::size_t max_line_bytes = 64 * 1024;
};

// Per-source accounting of accepted events.
struct SourceTally {
  std::uint64_t accepted = 0;
  std::uint64_t event_id_sum = 0;
  std::uint64_t last_event_id = 0;

  friend bool operator==(const SourceTally&, const SourceTally&) = default;
};

class CuratorServer {
 public:
  explicit CuratorServer(Pipeline& pipeline, ServerOptions options = {});
  ~CuratorServer();

  CuratorServer(const CuratorServer&) = delete;
  CuratorServer& operator=(const CuratorServer&) = delete;

  // Binds and starts accepting; port 0 picks a free port. Returns the bound
  // endpoint. Throws IoError when the address cannot be bound.
  Endpoint start(const Endpoint& listen);
  // Stops accepting, lets open connections finish the lines already
  // received, and drains everything into the pipeline. Idempotent.
  void stop();

  std::uint64_t accepted() const noexcept { return accepted_.load(); }
  std::uint64_t naks() const noexcept { return naks_.load(); }
  std::map<std::string, SourceTally> tallies() const;
  // First pipeline failure seen by the consumer, if any.
  std::optional<std::string> pipeline_error() const;

 private:
  struct Connection;

  void accept_loop();
  void handle(Connection& conn);
  void consume_loop();
  // Returns an empty string when accepted, else the NAK reason.
  std::string admit(std::string_view line);

  Pipeline& pipeline_;
  ServerOptions options_;
  BoundedQueue<EventRecord> queue_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  bool stopped_ = false;
  std::thread acceptor_;
  std::thread consumer_;
  std::mutex conn_mutex_;
  std::vector<std::unique_ptr<Connection>> connections_;
  mutable std::mutex tally_mutex_;
  std::map<std::string, SourceTally> tallies_;
  std::atomic<std::uint64_t> accepted_{0};
  std::atomic<std::uint64_t> naks_{0};
  mutable std::mutex error_mutex_;
  std::optional<std::string> pipeline_error_;
};

class ConnectionError : public Error {
 public:
  enum class Kind { Refused, Reset, Other };
  ConnectionError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct AckSummary {
  std::uint64_t accepted = 0;
  std::uint64_t naks = 0;
  std::vector<std::string> nak_messages;
  // The server stopped reading events before the end of the stream.
  bool cut_off = false;
};

AckSummary client_send(const Endpoint& server, std::span<const WireEvent> events);
// Sends raw lines (LF appended); used to exercise malformed input.
AckSummary client_send_lines(const Endpoint& server, std::span<const std::string> lines);

}  // namespace provdb
