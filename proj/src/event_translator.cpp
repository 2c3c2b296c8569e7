#include "provdb/event_translator.hpp"

#include "provdb/error.hpp"
#include "provdb/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace provdb {

std::string_view event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::Boot: return "boot";
    case EventKind::Credfork: return "credfork";
    case EventKind::Exec: return "exec";
    case EventKind::Fperm: return "fperm";
    case EventKind::Setid: return "setid";
  }
  return "";
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
  for (auto k : kAllEventKinds) {
    if (event_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

char mode_char(AccessMode mode) {
  switch (mode) {
    case AccessMode::None: return '-';
    case AccessMode::Read: return 'r';
    case AccessMode::Write: return 'w';
  }
  return '-';
}

std::optional<AccessMode> parse_mode(std::string_view text) {
  if (text == "-") return AccessMode::None;
  if (text == "r") return AccessMode::Read;
  if (text == "w") return AccessMode::Write;
  return std::nullopt;
}

Verdict check_event_shape(const EventRecord& event) {
  const auto name = std::string{event_kind_name(event.kind)};
  if (!is_valid_node_id(event.subject)) {
    return Verdict::violation(name + " event has invalid subject '" + event.subject + "'");
  }
  if (event.kind == EventKind::Boot) {
    if (!event.object.empty()) return Verdict::violation("boot event must not carry an object");
    return Verdict::ok();
  }
  if (!is_valid_node_id(event.object)) {
    return Verdict::violation(name + " event has invalid object '" + event.object + "'");
  }
  if (event.subject == event.object) {
    return Verdict::violation(name + " event relates " + event.subject + " to itself");
  }
  if (event.kind == EventKind::Fperm && event.mode == AccessMode::None) {
    return Verdict::violation("fperm event needs mode r or w");
  }
  return Verdict::ok();
}

std::optional<NodeKind> TranslationState::kind_of(std::string_view id) const {
  auto it = known_nodes_.find(id);
  if (it == known_nodes_.end()) return std::nullopt;
  return it->second;
}

std::vector<Component> translate_event(const EventRecord& event, TranslationState& state) {
  if (auto v = check_event_shape(event); !v) {
    throw TranslationError("event " + std::to_string(event.event_id) + ": " + v.message());
  }

  struct Endpoint {
    const std::string* id;
    NodeKind kind;
  };
  std::vector<Endpoint> ends;
  std::optional<ProvEdge> edge;
  auto relate = [&](EdgeType type, const std::string& in, const std::string& out) {
    edge = ProvEdge{{}, type, in, out};
  };

  switch (event.kind) {
    case EventKind::Boot:
      ends.push_back({&event.subject, NodeKind::Activity});
      break;
    case EventKind::Credfork:
    case EventKind::Exec:
      ends.push_back({&event.subject, NodeKind::Activity});
      ends.push_back({&event.object, NodeKind::Activity});
      relate(EdgeType::Communication, event.subject, event.object);
      break;
    case EventKind::Fperm:
      ends.push_back({&event.subject, NodeKind::Activity});
      ends.push_back({&event.object, NodeKind::Entity});
      if (event.mode == AccessMode::Read) {
        relate(EdgeType::Usage, event.object, event.subject);
      } else {
        relate(EdgeType::Generation, event.subject, event.object);
      }
      break;
    case EventKind::Setid:
      ends.push_back({&event.subject, NodeKind::Agent});
      ends.push_back({&event.object, NodeKind::Activity});
      relate(EdgeType::Association, event.subject, event.object);
      break;
  }

  std::vector<Component> out;
  for (const auto& end : ends) {
    if (auto known = state.kind_of(*end.id)) {
      if (*known != end.kind) {
        throw TranslationError("event " + std::to_string(event.event_id) + ": node " + *end.id +
                               " is an " + std::string{display_name(*known)} + ", " +
                               std::string{event_kind_name(event.kind)} + " needs " +
                               std::string{display_name(end.kind)});
      }
    } else {
      out.emplace_back(ProvNode{*end.id, end.kind, {}});
    }
  }

  for (const auto& c : out) {
    const auto& node = std::get<ProvNode>(c);
    state.known_nodes_.emplace(node.id, node.kind);
  }
  if (edge) {
    auto& seq = state.edge_counters_[static_cast<std::size_t>(edge->type)];
    edge->id = make_edge_id(edge->type, seq++);
    out.emplace_back(std::move(*edge));
  }
  return out;
}

std::uint64_t EventMix::count(EventKind kind) const noexcept {
  switch (kind) {
    case EventKind::Boot: return boot;
    case EventKind::Credfork: return credfork;
    case EventKind::Exec: return exec;
    case EventKind::Fperm: return fperm;
    case EventKind::Setid: return setid;
  }
  return 0;
}

EventMix scaled_mix(const EventMix& mix, std::uint64_t divisor) {
  if (divisor == 0) throw std::invalid_argument("divisor must be positive");
  auto scale = [divisor](std::uint64_t n) { return (2 * n + divisor) / (2 * divisor); };
  return {std::max<std::uint64_t>(1, scale(mix.boot)), scale(mix.credfork), scale(mix.exec),
          scale(mix.fperm), scale(mix.setid)};
}

std::vector<EventRecord> synthetic_stream(const StreamConfig& config) {
  const auto& mix = config.mix;
  if (mix.boot == 0) throw std::invalid_argument("event mix needs at least one boot event");

  SeededRng rng{config.seed};
  std::vector<EventKind> kinds;
  kinds.reserve(mix.total());
  for (auto k : kAllEventKinds) kinds.insert(kinds.end(), mix.count(k), k);
  // kinds[0] is a boot; shuffle the remainder (Fisher-Yates).
  for (std::size_t i = kinds.size(); i > 2; --i) {
    std::swap(kinds[i - 1], kinds[1 + rng.below(i - 1)]);
  }

  struct Aged {
    std::string id;
    std::uint64_t born;
  };
  std::vector<Aged> processes, files;
  std::vector<std::string> users;
  std::uint64_t clock = 0;
  std::uint64_t next_process = 0, next_file = 0;

  auto new_process = [&] {
    processes.push_back({config.id_namespace + "AC" + std::to_string(next_process++), clock++});
    return processes.back().id;
  };
  auto new_file = [&] {
    files.push_back({config.id_namespace + "EN" + std::to_string(next_file++), clock++});
    return files.back().id;
  };
  auto any_process = [&]() -> const Aged& { return processes[rng.below(processes.size())]; };

  std::vector<EventRecord> events;
  events.reserve(kinds.size());
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    EventRecord ev;
    ev.event_id = config.first_event_id + i;
    ev.kind = kinds[i];
    ev.timestamp_us = config.start_time_us + i * config.interval_us;
    switch (ev.kind) {
      case EventKind::Boot:
        ev.subject = new_process();
        break;
      case EventKind::Credfork:
      case EventKind::Exec:
        ev.subject = any_process().id;
        ev.object = new_process();
        break;
      case EventKind::Fperm: {
        const auto& proc = any_process();
        ev.subject = proc.id;
        // files is ordered by birth; readable files predate the process.
        const auto older = static_cast<std::size_t>(
            std::lower_bound(files.begin(), files.end(), proc.born,
                             [](const Aged& f, std::uint64_t t) { return f.born < t; }) -
            files.begin());
        if (older > 0 && rng.below(100) < config.read_percent) {
          ev.mode = AccessMode::Read;
          ev.object = files[rng.below(older)].id;
        } else {
          ev.mode = AccessMode::Write;
          ev.object = new_file();
        }
        break;
      }
      case EventKind::Setid:
        if (users.empty() || rng.below(4) == 0) {
          users.push_back(config.id_namespace + "AG" + std::to_string(users.size()));
        }
        ev.subject = users[rng.below(users.size())];
        ev.object = any_process().id;
        break;
    }
    events.push_back(std::move(ev));
  }
  return events;
}

}  // namespace provdb
