#include "provdb/curator_service.hpp"

#include "provdb/error.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <stdexcept>

namespace provdb {

namespace {

template <typename T>
bool parse_uint(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto [end, err] = std::from_chars(text.data(), text.data() + text.size(), out);
  return err == std::errc{} && end == text.data() + text.size();
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

addrinfo* resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const auto port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) throw IoError("cannot resolve " + ep.to_string() + ": " + ::gai_strerror(rc));
  return res;
}

}  // namespace

std::string format_wire_event(const WireEvent& w) {
  const auto& e = w.event;
  std::string line;
  line.reserve(64 + w.source_id.size() + e.subject.size() + e.object.size());
  line.append(w.source_id).append(1, '\t');
  line.append(std::to_string(e.event_id)).append(1, '\t');
  line.append(event_kind_name(e.kind)).append(1, '\t');
  line.append(e.subject).append(1, '\t');
  line.append(e.object).append(1, '\t');
  line.append(std::to_string(e.timestamp_us)).append(1, '\t');
  line.push_back(mode_char(e.mode));
  return line;
}

WireEvent parse_wire_event(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto f = split_tabs(line);
  if (f.size() != 7) throw WireError("expected 7 fields");
  WireEvent w;
  if (f[0].empty()) throw WireError("empty source_id");
  w.source_id = std::string{f[0]};
  if (!parse_uint(f[1], w.event.event_id)) throw WireError("bad event_id '" + std::string{f[1]} + "'");
  const auto kind = parse_event_kind(f[2]);
  if (!kind) throw WireError("unknown etype '" + std::string{f[2]} + "'");
  w.event.kind = *kind;
  w.event.subject = std::string{f[3]};
  w.event.object = std::string{f[4]};
  if (!parse_uint(f[5], w.event.timestamp_us)) {
    throw WireError("bad timestamp '" + std::string{f[5]} + "'");
  }
  const auto mode = parse_mode(f[6]);
  if (!mode) throw WireError("bad mode '" + std::string{f[6]} + "'");
  w.event.mode = *mode;
  if (auto v = check_event_shape(w.event); !v) throw WireError(v.message());
  return w;
}

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("expected host:port, got '" + std::string{text} + "'");
  Endpoint ep;
  ep.host = std::string{text.substr(0, colon)};
  unsigned port = 0;
  if (!parse_uint(text.substr(colon + 1), port) || port > 65535) {
    throw std::invalid_argument("bad port in '" + std::string{text} + "'");
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

// ---------------------------------------------------------------- server

struct CuratorServer::Connection {
  int fd = -1;
  std::thread thread;
  std::atomic<bool> done{false};
};

CuratorServer::CuratorServer(Pipeline& pipeline, ServerOptions options)
    : pipeline_(pipeline), options_(options), queue_(options.queue_capacity) {}

CuratorServer::~CuratorServer() { stop(); }

Endpoint CuratorServer::start(const Endpoint& listen) {
  if (listen_fd_ >= 0) throw std::logic_error("server already started");
  addrinfo* res = resolve(listen, true);
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw IoError(std::string{"socket: "} + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 128) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw IoError("cannot listen on " + listen.to_string() + ": " + why);
  }
  ::freeaddrinfo(res);

  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  char host[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &bound.sin_addr, host, sizeof host);

  listen_fd_ = fd;
  consumer_ = std::thread([this] { consume_loop(); });
  acceptor_ = std::thread([this] { accept_loop(); });
  return Endpoint{host, ntohs(bound.sin_port)};
}

void CuratorServer::accept_loop() {
  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 50);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;

    std::lock_guard lock(conn_mutex_);
    // Reap finished handlers.
    std::erase_if(connections_, [](const std::unique_ptr<Connection>& c) {
      if (!c->done.load()) return false;
      c->thread.join();
      return true;
    });
    auto conn = std::make_unique<Connection>();
    conn->fd = fd;
    auto* raw = conn.get();
    conn->thread = std::thread([this, raw] { handle(*raw); });
    connections_.push_back(std::move(conn));
  }
}

std::string CuratorServer::admit(std::string_view line) {
  WireEvent w;
  try {
    w = parse_wire_event(line);
  } catch (const WireError& e) {
    return e.what();
  }
  std::lock_guard lock(tally_mutex_);
  auto& tally = tallies_[w.source_id];
  if (tally.accepted > 0 && w.event.event_id <= tally.last_event_id) {
    return "event_id " + std::to_string(w.event.event_id) + " not increasing for source " +
           w.source_id;
  }
  const auto id = w.event.event_id;
  // Pushing under the tally lock keeps each source's events in id order.
  if (!queue_.push(std::move(w.event))) return "pipeline unavailable";
  ++tally.accepted;
  tally.event_id_sum += id;
  tally.last_event_id = id;
  accepted_.fetch_add(1);
  return {};
}

void CuratorServer::handle(Connection& conn) {
  std::string buffer;
  std::uint64_t line_no = 0, conn_accepted = 0, conn_naks = 0;
  std::size_t consecutive_errors = 0;
  bool cut_off = false;
  char chunk[64 * 1024];

  auto process = [&](std::string_view line) {
    ++line_no;
    auto reason = admit(line);
    if (reason.empty()) {
      ++conn_accepted;
      consecutive_errors = 0;
      return;
    }
    ++conn_naks;
    naks_.fetch_add(1);
    send_all(conn.fd, "NAK " + std::to_string(line_no) + " " + reason + "\n");
    if (++consecutive_errors > options_.max_consecutive_errors) cut_off = true;
  };

  while (!cut_off) {
    const auto n = ::recv(conn.fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (auto nl = buffer.find('\n'); nl != std::string::npos && !cut_off;
         nl = buffer.find('\n', start)) {
      process(std::string_view{buffer}.substr(start, nl - start));
      start = nl + 1;
    }
    buffer.erase(0, start);
    if (buffer.size() > options_.max_line_bytes && !cut_off) {
      ++line_no;
      ++conn_naks;
      naks_.fetch_add(1);
      send_all(conn.fd, "NAK " + std::to_string(line_no) + " line too long\n");
      cut_off = true;
    }
  }
  if (!cut_off && !buffer.empty()) process(buffer);

  send_all(conn.fd, "DONE " + std::to_string(conn_accepted) + " " + std::to_string(conn_naks) + "\n");
  ::shutdown(conn.fd, SHUT_WR);
  if (cut_off) {
    // Drain so the peer sees an orderly close rather than a reset.
    while (::recv(conn.fd, chunk, sizeof chunk, 0) > 0) {
    }
  }
  ::close(conn.fd);
  conn.done.store(true);
}

void CuratorServer::consume_loop() {
  bool failed = false;
  while (auto event = queue_.pop()) {
    if (failed) continue;
    try {
      pipeline_.submit(*event);
    } catch (const std::exception& e) {
      failed = true;
      {
        std::lock_guard lock(error_mutex_);
        pipeline_error_ = e.what();
      }
      queue_.close();
    }
  }
}

void CuratorServer::stop() {
  if (stopped_ || listen_fd_ < 0) return;
  stopped_ = true;
  stopping_.store(true);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);

  std::vector<std::unique_ptr<Connection>> conns;
  {
    std::lock_guard lock(conn_mutex_);
    conns.swap(connections_);
  }
  for (auto& c : conns) {
    if (!c->done.load()) ::shutdown(c->fd, SHUT_RD);
  }
  for (auto& c : conns) c->thread.join();

  queue_.close();
  if (consumer_.joinable()) consumer_.join();
}

std::map<std::string, SourceTally> CuratorServer::tallies() const {
  std::lock_guard lock(tally_mutex_);
  return tallies_;
}

std::optional<std::string> CuratorServer::pipeline_error() const {
  std::lock_guard lock(error_mutex_);
  return pipeline_error_;
}

// ---------------------------------------------------------------- client

AckSummary client_send_lines(const Endpoint& server, std::span<const std::string> lines) {
  addrinfo* res = resolve(server, false);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw ConnectionError(ConnectionError::Kind::Other, std::string{"socket: "} + std::strerror(errno));
  }
  if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    const int err = errno;
    ::freeaddrinfo(res);
    ::close(fd);
    const auto kind = err == ECONNREFUSED ? ConnectionError::Kind::Refused : ConnectionError::Kind::Other;
    throw ConnectionError(kind, "connect " + server.to_string() + ": " + std::strerror(err));
  }
  ::freeaddrinfo(res);

  AckSummary summary;
  bool got_done = false, reset = false;
  std::thread reader([&] {
    std::string buffer;
    char chunk[16 * 1024];
    while (true) {
      const auto n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) {
        reset = true;
        break;
      }
      if (n == 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      std::size_t start = 0;
      for (auto nl = buffer.find('\n'); nl != std::string::npos; nl = buffer.find('\n', start)) {
        const std::string_view line{buffer.data() + start, nl - start};
        if (line.starts_with("NAK ")) {
          // "NAK <line> <reason>" -> "line <line>: <reason>"
          const auto body = line.substr(4);
          const auto sp = body.find(' ');
          summary.nak_messages.push_back(
              sp == std::string_view::npos
                  ? std::string{body}
                  : "line " + std::string{body.substr(0, sp)} + ": " + std::string{body.substr(sp + 1)});
        } else if (line.starts_with("DONE ")) {
          const auto rest = line.substr(5);
          const auto sp = rest.find(' ');
          got_done = sp != std::string_view::npos && parse_uint(rest.substr(0, sp), summary.accepted) &&
                     parse_uint(rest.substr(sp + 1), summary.naks);
        }
        start = nl + 1;
      }
      buffer.erase(0, start);
    }
  });

  bool write_failed = false;
  std::string out;
  out.reserve(128 * 1024);
  for (std::size_t i = 0; i < lines.size() && !write_failed; ++i) {
    out.append(lines[i]).append(1, '\n');
    if (out.size() >= 64 * 1024 || i + 1 == lines.size()) {
      write_failed = !send_all(fd, out);
      out.clear();
    }
  }
  ::shutdown(fd, SHUT_WR);
  reader.join();
  ::close(fd);

  if (!got_done) {
    if (reset || write_failed) throw ConnectionError(ConnectionError::Kind::Reset, "connection reset by " + server.to_string());
    throw ConnectionError(ConnectionError::Kind::Other, "connection closed before summary");
  }
  summary.cut_off = summary.accepted + summary.naks < lines.size();
  return summary;
}

AckSummary client_send(const Endpoint& server, std::span<const WireEvent> events) {
  std::vector<std::string> lines;
  lines.reserve(events.size());
  for (const auto& e : events) lines.push_back(format_wire_event(e));
  return client_send_lines(server, lines);
}

}  // namespace provdb
