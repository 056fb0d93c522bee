#include "apd/engine.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>
#include <tuple>

namespace apd {

void DelayModel::validate() const {
  if (compute_ticks.empty()) throw SpecError("schedule: no workers");
  bool any_finite = false;
  for (Tick v : compute_ticks) {
    if (v == 0) throw SpecError("schedule: compute_ticks must be >= 1 (use inf for a halted worker)");
    any_finite = any_finite || v != kNeverTick;
  }
  if (!any_finite) throw SpecError("schedule: at least one worker needs a finite compute duration");
}

Tick DelayModel::sync_round_ticks() const {
  return *std::max_element(compute_ticks.begin(), compute_ticks.end()) + upload_delay + broadcast_delay;
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::ServerReceive:
      return "server-receive";
    case EventKind::BroadcastDeliver:
      return "broadcast-deliver";
    case EventKind::WorkerFinish:
      return "worker-finish";
  }
  return "?";
}

std::vector<const ScheduledEvent*> Schedule::iterations() const {
  std::vector<const ScheduledEvent*> out;
  out.reserve(horizon);
  for (const ScheduledEvent& e : events)
    if (e.counted()) out.push_back(&e);
  return out;
}

namespace {

// Tracks what the server buffer and the inboxes hold so staleness can be
// derived while the timeline is generated.
class StalenessTracker {
 public:
  explicit StalenessTracker(std::size_t n) : finishes_(n), copy_rank_(n, -1), inbox_source_(n, 0) {}

  void on_finish(ScheduledEvent& e) {
    finishes_[e.worker].push_back(e.k);
    e.source = inbox_source_[e.worker];
    e.staleness = e.k - e.source;
  }

  void on_receive(ScheduledEvent& e) {
    for (const Arrival& a : e.arrivals) {
      const auto& f = finishes_[a.worker];
      const auto it = std::lower_bound(f.begin(), f.end(), a.sent_at);
      copy_rank_[a.worker] = static_cast<std::int64_t>(it - f.begin());
    }
    // Slot i holds theta_i^{f_r + 1}, which is still current until the next
    // finish f_{r+1}; after that it lags by k - f_{r+1}.
    e.slot_staleness.assign(finishes_.size(), 0);
    e.staleness = 0;
    for (std::size_t i = 0; i < finishes_.size(); ++i) {
      const auto next = static_cast<std::size_t>(copy_rank_[i] + 1);
      if (next < finishes_[i].size()) e.slot_staleness[i] = e.k - finishes_[i][next];
      e.staleness = std::max(e.staleness, e.slot_staleness[i]);
    }
  }

  void on_deliver(ScheduledEvent& e) {
    inbox_source_[e.worker] = e.source;
    e.staleness = e.k - e.source;
  }

 private:
  std::vector<std::vector<Iteration>> finishes_;
  std::vector<std::int64_t> copy_rank_;
  std::vector<Iteration> inbox_source_;
};

struct Pending {
  Tick tick;
  std::uint32_t cascade;
  EventKind kind;
  std::size_t worker;
  std::uint64_t seq;
  Iteration tag;  // sent_at for arrivals, issuing iteration for deliveries

  [[nodiscard]] auto key() const { return std::tie(tick, cascade, kind, worker, seq); }
  bool operator>(const Pending& other) const { return key() > other.key(); }
};

}  // namespace

Schedule build_schedule(const DelayModel& delay, Iteration horizon) {
  delay.validate();
  if (horizon == 0) throw SpecError("build_schedule: horizon must be positive");

  const std::size_t n = delay.workers();
  Schedule schedule{n, horizon, false, {}};
  StalenessTracker tracker(n);
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue;
  std::uint64_t seq = 0;

  auto next_cascade = [](Tick delay_ticks, std::uint32_t cascade) { return delay_ticks == 0 ? cascade + 1 : 0u; };
  for (std::size_t i = 0; i < n; ++i)
    if (delay.compute_ticks[i] != kNeverTick)
      queue.push({delay.compute_ticks[i], 0, EventKind::WorkerFinish, i, seq++, 0});

  Iteration counter = 0;
  while (counter < horizon && !queue.empty()) {
    const Pending top = queue.top();
    queue.pop();
    ScheduledEvent e;
    e.tick = top.tick;
    e.kind = top.kind;

    switch (top.kind) {
      case EventKind::WorkerFinish: {
        e.worker = top.worker;
        e.k = counter++;
        tracker.on_finish(e);
        queue.push({top.tick + delay.upload_delay, next_cascade(delay.upload_delay, top.cascade),
                    EventKind::ServerReceive, top.worker, seq++, e.k});
        const Tick v = delay.compute_ticks[top.worker];
        if (kNeverTick - top.tick > v) queue.push({top.tick + v, 0, EventKind::WorkerFinish, top.worker, seq++, 0});
        break;
      }
      case EventKind::ServerReceive: {
        e.arrivals.push_back({top.worker, top.tag});
        while (!queue.empty() && queue.top().tick == top.tick && queue.top().cascade == top.cascade &&
               queue.top().kind == EventKind::ServerReceive) {
          e.arrivals.push_back({queue.top().worker, queue.top().tag});
          queue.pop();
        }
        e.k = counter++;
        tracker.on_receive(e);
        for (std::size_t i = 0; i < n; ++i)
          queue.push({top.tick + delay.broadcast_delay, next_cascade(delay.broadcast_delay, top.cascade),
                      EventKind::BroadcastDeliver, i, seq++, e.k});
        break;
      }
      case EventKind::BroadcastDeliver: {
        e.worker = top.worker;
        e.k = counter;
        e.source = top.tag;
        tracker.on_deliver(e);
        break;
      }
    }
    schedule.events.push_back(std::move(e));
  }
  return schedule;
}

Schedule build_sync_schedule(const DelayModel& delay, Iteration horizon) {
  delay.validate();
  if (horizon == 0) throw SpecError("build_sync_schedule: horizon must be positive");
  for (Tick v : delay.compute_ticks)
    if (v == kNeverTick) throw SpecError("build_sync_schedule: a halted worker blocks every barrier");

  const std::size_t n = delay.workers();
  Schedule schedule{n, horizon, true, {}};
  StalenessTracker tracker(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return delay.compute_ticks[a] < delay.compute_ticks[b]; });
  const Tick slowest = *std::max_element(delay.compute_ticks.begin(), delay.compute_ticks.end());

  Tick round_start = 0;
  Iteration counter = 0;
  while (counter < horizon) {
    std::vector<Arrival> arrivals;
    for (std::size_t i : order) {
      if (counter == horizon) return schedule;
      ScheduledEvent e;
      e.tick = round_start + delay.compute_ticks[i];
      e.kind = EventKind::WorkerFinish;
      e.worker = i;
      e.k = counter++;
      tracker.on_finish(e);
      arrivals.push_back({i, e.k});
      schedule.events.push_back(std::move(e));
    }
    if (counter == horizon) return schedule;

    ScheduledEvent receive;
    receive.tick = round_start + slowest + delay.upload_delay;
    receive.kind = EventKind::ServerReceive;
    receive.arrivals = std::move(arrivals);
    receive.k = counter++;
    tracker.on_receive(receive);
    const Iteration issued = receive.k;
    schedule.events.push_back(std::move(receive));
    if (counter == horizon) return schedule;

    const Tick deliver_tick = round_start + slowest + delay.upload_delay + delay.broadcast_delay;
    for (std::size_t i = 0; i < n; ++i) {
      ScheduledEvent e;
      e.tick = deliver_tick;
      e.kind = EventKind::BroadcastDeliver;
      e.worker = i;
      e.k = counter;
      e.source = issued;
      tracker.on_deliver(e);
      schedule.events.push_back(std::move(e));
    }
    round_start = deliver_tick;
  }
  return schedule;
}

void write_event_log(std::ostream& os, const Schedule& schedule) {
  os << "tick\tk\tkind\tworker\tstaleness\n";
  for (const ScheduledEvent& e : schedule.events) {
    os << e.tick << '\t' << e.k << '\t' << to_string(e.kind) << '\t';
    if (e.kind == EventKind::ServerReceive) {
      for (std::size_t a = 0; a < e.arrivals.size(); ++a) os << (a ? "," : "") << e.arrivals[a].worker + 1;
    } else {
      os << e.worker + 1;
    }
    os << '\t' << e.staleness << '\n';
  }
}

// ---------------------------------------------------------------------------
// State transitions

SystemState initial_state(const ProblemSpec& spec, std::vector<Vec> theta0, bool sync_buffer) {
  spec.validate();
  SystemState state;
  state.lambda.assign(spec.m(), 0.0);
  check_dimensions(spec, theta0, state.lambda);
  state.buffer = sync_buffer ? theta0 : std::vector<Vec>(spec.n, Vec(spec.d, 0.0));
  state.theta = std::move(theta0);
  state.inbox.assign(spec.n, DelayedDualTerm::initial(spec.d));
  state.uplink.resize(spec.n);
  state.downlink.resize(spec.n);
  state.updates.assign(spec.n, 0);
  return state;
}

const ScheduledEvent& step(SystemState& state, const Schedule& schedule, const ProblemSpec& spec,
                           const StepSizeRule& rule, std::vector<SampleStream>& streams) {
  if (state.cursor >= schedule.events.size()) throw std::out_of_range("step: schedule exhausted");
  const ScheduledEvent& e = schedule.events[state.cursor];
  if (schedule.n != spec.n) throw SpecError("step: schedule and problem disagree on n");
  if (e.kind != EventKind::ServerReceive && e.worker >= spec.n)
    throw std::out_of_range("step: event references an unknown worker");

  const Interval dual_box = spec.dual_box();
  switch (e.kind) {
    case EventKind::WorkerFinish: {
      const std::size_t i = e.worker;
      const double gamma = rule(static_cast<std::int64_t>(state.k) + 1);
      const Vec z = streams.at(i).sample();
      const Vec g = delayed_primal_gradient(state.theta[i], state.inbox[i], z);
      Vec& t = state.theta[i];
      for (std::size_t c = 0; c < t.size(); ++c) t[c] = project_box(t[c] - gamma * g[c], spec.boxes[i]);
      state.uplink[i].push_back(t);
      ++state.updates[i];
      ++state.k;
      break;
    }
    case EventKind::ServerReceive: {
      for (const Arrival& a : e.arrivals) {
        if (a.worker >= spec.n) throw std::out_of_range("step: arrival from an unknown worker");
        auto& link = state.uplink[a.worker];
        if (link.empty()) throw std::logic_error("step: arrival with no model in flight");
        state.buffer[a.worker] = std::move(link.front());
        link.pop_front();
      }
      const Vec avg = mean_decision(state.buffer);
      const DelayedDualTerm term{dual_coupling(spec, avg, state.lambda), state.k, 0};
      const double gamma = rule(static_cast<std::int64_t>(state.k) + 1);
      const Vec g = dual_residual(spec, avg, state.lambda);
      for (std::size_t j = 0; j < g.size(); ++j)
        state.lambda[j] = project_box(state.lambda[j] + gamma * g[j], dual_box);
      for (auto& link : state.downlink) link.push_back(term);
      ++state.k;
      break;
    }
    case EventKind::BroadcastDeliver: {
      auto& link = state.downlink[e.worker];
      if (link.empty()) throw std::logic_error("step: delivery with no broadcast in flight");
      state.inbox[e.worker] = std::move(link.front());
      state.inbox[e.worker].deliver_at = e.tick;
      link.pop_front();
      break;
    }
  }
  state.clock = e.tick;
  ++state.cursor;
  return e;
}

// ---------------------------------------------------------------------------
// Assumption validation

AssumptionReport validate_assumptions(const Schedule& schedule, std::uint64_t max_window) {
  AssumptionReport report;
  const std::size_t n = schedule.n;
  const auto iters = schedule.iterations();
  const std::size_t K = iters.size();

  for (const ScheduledEvent* e : iters) {
    if (e->kind == EventKind::WorkerFinish)
      report.max_broadcast_staleness = std::max(report.max_broadcast_staleness, e->staleness);
    else
      report.max_server_staleness = std::max(report.max_server_staleness, e->staleness);
  }
  report.tau_bar = std::max(report.max_server_staleness, report.max_broadcast_staleness);

  // Row r < n: activations of worker r; row n: server receipts.
  std::vector<std::vector<std::uint8_t>> hit(n + 1, std::vector<std::uint8_t>(K, 0));
  for (std::size_t k = 0; k < K; ++k) {
    const ScheduledEvent* e = iters[k];
    if (e->kind == EventKind::WorkerFinish)
      hit[e->worker][k] = 1;
    else
      hit[n][k] = 1;
  }
  // Windows start at s >= 1.
  const std::size_t first = 1;
  auto window_extremes = [&](std::size_t row, std::uint64_t B) {
    std::uint64_t count = 0;
    for (std::size_t k = first; k < first + B; ++k) count += hit[row][k];
    std::uint64_t lo = count, hi = count;
    for (std::size_t s = first + 1; s + B <= K; ++s) {
      count += hit[row][s + B - 1];
      count -= hit[row][s - 1];
      lo = std::min(lo, count);
      hi = std::max(hi, count);
    }
    return std::pair{lo, hi};
  };

  const std::uint64_t usable = K > first ? K - first : 0;
  for (std::uint64_t B = 1; B <= std::min<std::uint64_t>(max_window, usable); ++B) {
    bool ok = true;
    std::uint64_t p = 0;
    for (std::size_t r = 0; r <= n && ok; ++r) {
      const auto [lo, hi] = window_extremes(r, B);
      if (lo != hi || lo == 0 || (r > 0 && lo != p)) ok = false;
      p = lo;
    }
    if (ok) {
      report.exact = WindowCounts{p, B};
      break;
    }
  }

  // The longest run without an entry in any row fixes the smallest window
  // that always sees every row at least once.
  std::uint64_t longest_gap = 0;
  for (std::size_t r = 0; r <= n; ++r) {
    std::uint64_t run = 0, worst = 0;
    for (std::size_t k = first; k < K; ++k) {
      run = hit[r][k] ? 0 : run + 1;
      worst = std::max(worst, run);
    }
    if (worst == usable) {
      std::ostringstream os;
      if (r < n)
        os << "A6: worker " << r + 1 << " is never activated after iteration 0";
      else
        os << "A6: the server never receives a model after iteration 0";
      report.violations.push_back(os.str());
    }
    longest_gap = std::max(longest_gap, worst);
  }
  if (report.violations.empty() && longest_gap + 1 <= usable) {
    const std::uint64_t B = longest_gap + 1;
    std::uint64_t p = UINT64_MAX;
    for (std::size_t r = 0; r <= n; ++r) p = std::min(p, window_extremes(r, B).first);
    report.relaxed = WindowCounts{p, B};
    if (report.tau_bar > B) {
      std::ostringstream os;
      os << "A5: staleness bound " << report.tau_bar << " exceeds window length " << B;
      report.violations.push_back(os.str());
    }
  } else if (report.violations.empty()) {
    report.violations.emplace_back("A6: schedule too short to contain a window covering every worker");
  }
  return report;
}

}  // namespace apd
