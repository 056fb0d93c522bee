#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <sstream>

#include "apd/engine.hpp"
#include "support.hpp"

using namespace apd;

namespace {

std::string kinds(const Schedule& s) {
  std::string out;
  for (const ScheduledEvent* e : s.iterations())
    out += e->kind == EventKind::WorkerFinish ? "W" + std::to_string(e->worker + 1) + " " : std::string("S ");
  return out;
}

// Staleness recomputed from the event list alone, O(K^2).
void check_staleness_against_oracle(const Schedule& s) {
  const auto& ev = s.events;
  for (std::size_t idx = 0; idx < ev.size(); ++idx) {
    const ScheduledEvent& e = ev[idx];
    if (e.kind == EventKind::WorkerFinish) {
      Iteration source = 0;
      for (std::size_t b = 0; b < idx; ++b)
        if (ev[b].kind == EventKind::BroadcastDeliver && ev[b].worker == e.worker) source = ev[b].source;
      CHECK(e.staleness == e.k - source);
    } else if (e.kind == EventKind::ServerReceive) {
      for (std::size_t i = 0; i < s.n; ++i) {
        std::optional<Iteration> copy;  // finish that produced the buffered model
        for (std::size_t b = 0; b <= idx; ++b)
          if (ev[b].kind == EventKind::ServerReceive)
            for (const Arrival& a : ev[b].arrivals)
              if (a.worker == i) copy = a.sent_at;
        std::optional<Iteration> next;
        for (std::size_t b = 0; b < idx && !next; ++b)
          if (ev[b].kind == EventKind::WorkerFinish && ev[b].worker == i && (!copy || ev[b].k > *copy)) next = ev[b].k;
        CHECK(e.slot_staleness[i] == (next ? e.k - *next : 0));
      }
    }
  }
}

// Smallest B such that every window [s, s+B-1], s >= 1, sees every worker
// and the server; p is the minimum count over rows and windows.
std::optional<WindowCounts> brute_force_window(const Schedule& s) {
  const auto it = s.iterations();
  const std::size_t K = it.size();
  auto row_of = [&](std::size_t k) { return it[k]->kind == EventKind::WorkerFinish ? it[k]->worker : s.n; };
  for (std::size_t B = 1; B + 1 <= K; ++B) {
    bool ok = true;
    std::uint64_t p = UINT64_MAX;
    for (std::size_t start = 1; start + B <= K && ok; ++start) {
      std::vector<std::uint64_t> count(s.n + 1, 0);
      for (std::size_t k = start; k < start + B; ++k) ++count[row_of(k)];
      for (std::uint64_t c : count) {
        ok = ok && c > 0;
        p = std::min(p, c);
      }
    }
    if (ok) return WindowCounts{p, B};
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("delay model validation") {
  CHECK_THROWS_AS((DelayModel{{}, 0, 0}.validate()), SpecError);
  CHECK_THROWS_AS((DelayModel{{1, 0}, 0, 0}.validate()), SpecError);
  CHECK_THROWS_AS((DelayModel{{kNeverTick, kNeverTick}, 0, 0}.validate()), SpecError);
  CHECK((DelayModel{{10, 4, 3, 2, 1}, 2, 1}.sync_round_ticks()) == 13);
  CHECK_THROWS_AS(build_schedule(DelayModel{{1}, 0, 0}, 0), SpecError);
}

TEST_CASE("two equal workers without delay alternate W1 W2 S") {
  const Schedule s = build_schedule({{1, 1}, 0, 0}, 9);
  CHECK(kinds(s) == "W1 W2 S W1 W2 S W1 W2 S ");
  CHECK(s.events.size() == 9 + 2 * 2);  // the last broadcast is never delivered
  CHECK(s.events[3].kind == EventKind::BroadcastDeliver);
  CHECK(s.final_tick() == 3);
  const auto it = s.iterations();
  CHECK(it[3]->staleness == 1);  // W1 at k=3 holds the payload issued at k=2
  CHECK(it[4]->staleness == 2);
  const AssumptionReport r = validate_assumptions(s);
  REQUIRE(r.exact.has_value());
  CHECK(r.exact->p == 1);
  CHECK(r.exact->B == 3);
  CHECK(r.tau_bar == 2);
  CHECK(r.a5_ok());
  CHECK(r.a6_ok());
  CHECK(r.violations.empty());
}

TEST_CASE("worker twice as slow gives a period of five iterations") {
  const Schedule s = build_schedule({{2, 1}, 0, 0}, 12);
  CHECK(kinds(s) == "W2 S W1 W2 S W2 S W1 W2 S W2 S ");
  const AssumptionReport r = validate_assumptions(s);
  CHECK_FALSE(r.exact.has_value());
  REQUIRE(r.relaxed.has_value());
  CHECK(r.relaxed->B == 5);
  CHECK(r.relaxed->p == 1);
}

TEST_CASE("simultaneous arrivals form one server event") {
  const Schedule s = build_schedule({{1, 1}, 2, 0}, 7);
  CHECK(kinds(s) == "W1 W2 W1 W2 S W1 W2 ");
  const ScheduledEvent* recv = s.iterations()[4];
  REQUIRE(recv->arrivals.size() == 2);
  CHECK(recv->arrivals[0].sent_at == 0);
  CHECK(recv->arrivals[1].sent_at == 1);
  CHECK(recv->tick == 3);
  // Buffer slot 1 holds theta^1 while worker 1 already finished again at k=2.
  CHECK(recv->slot_staleness[0] == 4 - 2);
}

TEST_CASE("staleness bookkeeping matches a direct recomputation") {
  check_staleness_against_oracle(build_schedule({{4, 4, 3, 2, 1}, 2, 1}, 1500));
  check_staleness_against_oracle(build_schedule({{10, 4, 3, 2, 1}, 2, 1}, 1500));
  check_staleness_against_oracle(build_schedule({{3, 5, 1}, 0, 4}, 800));
  check_staleness_against_oracle(build_sync_schedule({{10, 4, 3, 2, 1}, 2, 1}, 600));
}

TEST_CASE("window counts match brute force") {
  for (const DelayModel& d : {DelayModel{{4, 4, 3, 2, 1}, 2, 1}, DelayModel{{10, 4, 3, 2, 1}, 2, 1},
                              DelayModel{{1, 1}, 0, 0}, DelayModel{{3, 5, 1}, 1, 4}}) {
    const Schedule s = build_schedule(d, 2000);
    const auto ref = brute_force_window(s);
    const AssumptionReport r = validate_assumptions(s);
    REQUIRE(ref.has_value());
    REQUIRE(r.relaxed.has_value());
    CHECK(r.relaxed->B == ref->B);
    CHECK(r.relaxed->p == ref->p);
  }
}

TEST_CASE("straggler scenario windows and staleness") {
  const AssumptionReport r = validate_assumptions(build_schedule({{4, 4, 3, 2, 1}, 2, 1}, 20000));
  CHECK(r.a6_ok());
  CHECK(r.a5_ok());
  CHECK(r.tau_bar <= r.relaxed->B);
  CHECK(r.tau_bar == std::max(r.max_server_staleness, r.max_broadcast_staleness));
}

TEST_CASE("halted worker is flagged") {
  const AssumptionReport r = validate_assumptions(build_schedule({{1, kNeverTick, 2}, 1, 1}, 500));
  CHECK_FALSE(r.a6_ok());
  CHECK_FALSE(r.a5_ok());
  REQUIRE_FALSE(r.violations.empty());
  CHECK(r.violations.front().find("worker 2") != std::string::npos);
  CHECK_THROWS_AS(build_sync_schedule({{1, kNeverTick}, 0, 0}, 10), SpecError);
}

TEST_CASE("barrier rounds cost max v plus both delays") {
  const Schedule s = build_sync_schedule({{10, 4, 3, 2, 1}, 2, 1}, 12);
  CHECK(kinds(s) == "W5 W4 W3 W2 W1 S W5 W4 W3 W2 W1 S ");
  const auto it = s.iterations();
  CHECK(it[0]->tick == 1);
  CHECK(it[4]->tick == 10);
  CHECK(it[5]->tick == 12);
  CHECK(it[6]->tick == 13 + 1);
  CHECK(it[11]->tick == 26 - 1);
  CHECK(s.events.back().kind == EventKind::ServerReceive);
  CHECK(build_sync_schedule({{10, 4, 3, 2, 1}, 2, 1}, 13).events.back().tick == 27);
}

TEST_CASE("zero delays and unit durations give the barrier timeline") {
  const DelayModel d{{1, 1, 1, 1, 1}, 0, 0};
  const Schedule a = build_schedule(d, 1000), b = build_sync_schedule(d, 1000);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].tick == b.events[i].tick);
    CHECK(a.events[i].kind == b.events[i].kind);
    CHECK(a.events[i].worker == b.events[i].worker);
    CHECK(a.events[i].k == b.events[i].k);
    CHECK(a.events[i].arrivals.size() == b.events[i].arrivals.size());
    CHECK(a.events[i].staleness == b.events[i].staleness);
  }
}

TEST_CASE("in-flight models reach the buffer in order") {
  ProblemSpec spec = ProblemSpec::resource_allocation_example(true);
  const DelayModel d{{1, 2, 3, 1, 5}, 4, 2};
  const Schedule s = build_schedule(d, 400);
  SystemState st = initial_state(spec, std::vector<Vec>(5, Vec{1.0}), false);
  auto streams = make_worker_streams(spec, 3);
  const auto rule = StepSizeRule::inverse(10.0, 100.0);
  std::map<Iteration, Vec> produced;
  while (st.cursor < s.events.size()) {
    const ScheduledEvent& e = step(st, s, spec, rule, streams);
    if (e.kind == EventKind::WorkerFinish) {
      produced[e.k] = st.theta[e.worker];
      CHECK(spec.boxes[e.worker].contains(st.theta[e.worker][0]));
      CHECK(st.inbox[e.worker].issued_at == e.source);
    } else if (e.kind == EventKind::ServerReceive) {
      for (const Arrival& a : e.arrivals) CHECK(st.buffer[a.worker] == produced.at(a.sent_at));
      CHECK(spec.dual_box().contains(st.lambda[0]));
    }
  }
  CHECK(st.k == 400);
  CHECK_THROWS_AS(step(st, s, spec, rule, streams), std::out_of_range);
  std::uint64_t updates = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    updates += st.updates[i];
    CHECK(streams[i].draws() == st.updates[i]);
  }
  CHECK(updates == produced.size());
}

TEST_CASE("event log lists every event") {
  const Schedule s = build_schedule({{1, 1}, 0, 0}, 6);
  std::ostringstream os;
  write_event_log(os, s);
  const std::string log = os.str();
  CHECK(log.rfind("tick\tk\tkind\tworker\tstaleness\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(log.begin(), log.end(), '\n')) == s.events.size() + 1);
  CHECK(log.find("1\t2\tserver-receive\t1,2\t0") != std::string::npos);
}
