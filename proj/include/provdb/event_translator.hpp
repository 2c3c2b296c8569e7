#pragma once

// LPM-style event records and their translation into provenance graph
// components.
//
//   boot      subject=kernel                 Activity(subject)
//   credfork  subject=parent  object=child   Activity(child) + Communication parent->child
//   exec      subject=process object=image   Activity(image) + Communication process->image
//   fperm r   subject=process object=file    Entity(file) + Usage file->process
//   fperm w   subject=process object=file    Entity(file) + Generation process->file
//   setid     subject=uid     object=process Agent(uid) + Association uid->process
//
// Any endpoint not seen before is emitted as a node ahead of the edge, so an
// event whose endpoints are already known adds at most two components.

#include "provdb/prov_model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace provdb {

enum class EventKind : std::uint8_t { Boot, Credfork, Exec, Fperm, Setid };

inline constexpr std::array<EventKind, 5> kAllEventKinds{
    EventKind::Boot, EventKind::Credfork, EventKind::Exec, EventKind::Fperm, EventKind::Setid};

std::string_view event_kind_name(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view name);

// File access direction carried by fperm events; None for every other kind.
enum class AccessMode : std::uint8_t { None, Read, Write };

char mode_char(AccessMode mode);  // '-', 'r', 'w'
std::optional<AccessMode> parse_mode(std::string_view text);

struct EventRecord {
  std::uint64_t event_id = 0;
  EventKind kind = EventKind::Boot;
  std::string subject;
  std::string object;  // empty for boot
  std::uint64_t timestamp_us = 0;
  AccessMode mode = AccessMode::None;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

// Stateless well-formedness: ids valid, boot has no object, fperm carries a
// mode, no self-referencing event.
Verdict check_event_shape(const EventRecord& event);

class TranslationState {
 public:
  bool knows(std::string_view id) const { return known_nodes_.contains(id); }
  std::optional<NodeKind> kind_of(std::string_view id) const;
  std::size_t known_node_count() const noexcept { return known_nodes_.size(); }
  std::uint64_t next_edge_seq(EdgeType type) const {
    return edge_counters_[static_cast<std::size_t>(type)];
  }

 private:
  friend std::vector<Component> translate_event(const EventRecord&, TranslationState&);

  StringMap<NodeKind> known_nodes_;
  std::array<std::uint64_t, kAllEdgeTypes.size()> edge_counters_{};
};

// Throws TranslationError for a malformed event or an endpoint whose kind
// conflicts with an earlier event; the state is left unchanged in that case.
std::vector<Component> translate_event(const EventRecord& event, TranslationState& state);

struct EventMix {
  std::uint64_t boot = 0;
  std::uint64_t credfork = 0;
  std::uint64_t exec = 0;
  std::uint64_t fperm = 0;
  std::uint64_t setid = 0;

  std::uint64_t total() const noexcept { return boot + credfork + exec + fperm + setid; }
  std::uint64_t count(EventKind kind) const noexcept;
  friend bool operator==(const EventMix&, const EventMix&) = default;
};

// Event counts observed over a 38-minute kernel compile.
inline constexpr EventMix kKernelCompileMix{1, 336'505, 47'475, 3'851'401, 47'691};

// Divides every count by `divisor`, rounding half up, keeping at least one
// boot event.
EventMix scaled_mix(const EventMix& mix, std::uint64_t divisor);

struct StreamConfig {
  EventMix mix = scaled_mix(kKernelCompileMix, 1000);
  std::uint64_t seed = 1;
  // Prepended to every node id so streams from different hosts stay disjoint.
  std::string id_namespace;
  std::uint64_t first_event_id = 1;
  std::uint64_t start_time_us = 0;
  // 38 minutes / 4,283,073 events.
  std::uint64_t interval_us = 532;
  // Percentage of fperm events that read an existing file.
  std::uint32_t read_percent = 67;
};

// Deterministic event stream with exactly the configured mix: one boot
// first, the rest shuffled. Every edge it implies points from an older node
// to a newer one (agents excepted, which never gain ancestors), so the
// translated graph is acyclic. Throws std::invalid_argument if mix.boot == 0.
std::vector<EventRecord> synthetic_stream(const StreamConfig& config);

}  // namespace provdb
