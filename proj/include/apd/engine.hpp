#pragma once

// Deterministic discrete-event model of n workers and one server.
//
// Worker i finishes an update every compute_ticks[i] ticks, independently of
// everything else, using whatever dual correction sits in its inbox at that
// moment. A finished model reaches the server upload_delay ticks later; all
// models arriving at the same instant are absorbed by one server event, which
// overwrites their buffer slots, broadcasts s (J g(b_bar)) lambda and then
// takes one dual step. Each broadcast lands in every inbox broadcast_delay
// ticks later.
//
// The iteration counter k advances on worker finishes and server receipts.
// Events at the same tick run server-receive, broadcast-deliver, then
// worker-finish in ascending worker index. A message sent with zero delay is
// handled in the same tick, after every event that was already due there.

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "apd/model.hpp"
#include "apd/oracle.hpp"
#include "apd/stepsize.hpp"

namespace apd {

struct DelayModel {
  /// Ticks per update; kNeverTick marks a halted worker.
  std::vector<Tick> compute_ticks;
  Tick upload_delay = 0;
  Tick broadcast_delay = 0;

  [[nodiscard]] std::size_t workers() const { return compute_ticks.size(); }
  void validate() const;
  /// Barrier round length: max_i v_i + upload + broadcast.
  [[nodiscard]] Tick sync_round_ticks() const;
};

enum class EventKind { ServerReceive, BroadcastDeliver, WorkerFinish };

const char* to_string(EventKind kind);

struct Arrival {
  std::size_t worker = 0;
  Iteration sent_at = 0;  // iteration of the finish that produced the model
};

inline constexpr std::size_t kNoWorker = static_cast<std::size_t>(-1);

struct ScheduledEvent {
  Tick tick = 0;
  EventKind kind = EventKind::WorkerFinish;
  std::size_t worker = kNoWorker;  // finish and deliver
  std::vector<Arrival> arrivals;   // receive
  /// Iteration index for finish/receive; the current counter for deliver.
  Iteration k = 0;
  /// Finish: server iteration whose payload is used (0 = initial payload).
  /// Deliver: server iteration that issued the payload.
  Iteration source = 0;
  /// Finish: tau_s. Receive: max over slots of tau_i. Deliver: k - source.
  Iteration staleness = 0;
  /// Receive only: tau_i for every buffer slot after the overwrite.
  std::vector<Iteration> slot_staleness;

  [[nodiscard]] bool counted() const { return kind != EventKind::BroadcastDeliver; }
};

struct Schedule {
  std::size_t n = 0;
  Iteration horizon = 0;
  bool synchronous = false;
  std::vector<ScheduledEvent> events;

  [[nodiscard]] Tick final_tick() const { return events.empty() ? 0 : events.back().tick; }
  /// Counted events in iteration order.
  [[nodiscard]] std::vector<const ScheduledEvent*> iterations() const;
};

/// Asynchronous timeline up to exactly `horizon` counted events.
Schedule build_schedule(const DelayModel& delay, Iteration horizon);

/// Barrier timeline: every round all workers finish (ordered by finish tick,
/// then index), the server receives all n models max_i v_i + upload ticks
/// after the round start, and the broadcast lands before the next round.
Schedule build_sync_schedule(const DelayModel& delay, Iteration horizon);

void write_event_log(std::ostream& os, const Schedule& schedule);

struct SystemState {
  std::vector<Vec> theta;
  Vec lambda;
  std::vector<Vec> buffer;
  std::vector<DelayedDualTerm> inbox;
  std::vector<std::deque<Vec>> uplink;
  std::vector<std::deque<DelayedDualTerm>> downlink;
  std::vector<std::uint64_t> updates;
  Iteration k = 0;
  Tick clock = 0;
  std::size_t cursor = 0;
};

/// lambda = 0 and empty inboxes. The server buffer starts at zero, or at
/// theta0 when sync_buffer is set.
SystemState initial_state(const ProblemSpec& spec, std::vector<Vec> theta0, bool sync_buffer);

/// Processes the next scheduled event and returns it.
const ScheduledEvent& step(SystemState& state, const Schedule& schedule, const ProblemSpec& spec,
                           const StepSizeRule& rule, std::vector<SampleStream>& streams);

struct WindowCounts {
  std::uint64_t p = 0;
  std::uint64_t B = 0;
};

struct AssumptionReport {
  Iteration tau_bar = 0;
  Iteration max_server_staleness = 0;
  Iteration max_broadcast_staleness = 0;
  /// Smallest B for which every window of B iterations holds exactly p
  /// activations of every worker and p server receipts.
  std::optional<WindowCounts> exact;
  /// Smallest B for which every window holds at least one activation of
  /// every worker and one receipt; p is the minimum count at that B.
  std::optional<WindowCounts> relaxed;
  std::vector<std::string> violations;

  [[nodiscard]] bool a5_ok() const { return relaxed && tau_bar <= relaxed->B; }
  [[nodiscard]] bool a6_ok() const { return relaxed.has_value(); }
};

/// Windows are iteration ranges [s, s + B - 1] with s >= 1 inside the
/// schedule. The exact search stops at max_window.
AssumptionReport validate_assumptions(const Schedule& schedule, std::uint64_t max_window = 512);

}  // namespace apd
