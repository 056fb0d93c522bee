#include "apd/solvers.hpp"

namespace apd {

const char* to_string(Algorithm algo) { return algo == Algorithm::Apd ? "apd" : "sync-pd"; }

std::optional<Algorithm> parse_algorithm(const std::string& name) {
  if (name == "apd") return Algorithm::Apd;
  if (name == "sync-pd" || name == "sync") return Algorithm::SyncPd;
  return std::nullopt;
}

const char* to_string(InitMode mode) { return mode == InitMode::Zero ? "zero" : "uniform"; }

std::optional<InitMode> parse_init_mode(const std::string& name) {
  if (name == "zero") return InitMode::Zero;
  if (name == "uniform") return InitMode::Uniform;
  return std::nullopt;
}

std::vector<Vec> initial_iterate(const ProblemSpec& spec, InitMode mode, std::uint64_t seed) {
  std::vector<Vec> theta(spec.n, Vec(spec.d, 0.0));
  if (mode == InitMode::Zero) {
    for (std::size_t i = 0; i < spec.n; ++i)
      for (double& v : theta[i]) v = project_box(0.0, spec.boxes[i]);
    return theta;
  }
  SampleStream init(derive_seed(seed, kInitStreamTag), {}, 0.0);
  for (std::size_t i = 0; i < spec.n; ++i)
    for (double& v : theta[i]) v = spec.boxes[i].lo + spec.boxes[i].width() * init.uniform();
  return theta;
}

namespace {

TraceRecord snapshot(const ProblemSpec& spec, const SystemState& state, const SaddlePoint& reference) {
  TraceRecord r;
  r.k = state.k;
  r.tick = state.clock;
  r.delta = error_metric(state.theta, state.lambda, reference);
  r.lambda = state.lambda;
  r.g_mean = spec.constraint->value(mean_decision(state.theta));
  r.theta = state.theta;
  return r;
}

}  // namespace

RunTrace run_schedule(const ProblemSpec& spec, const Schedule& schedule, const StepSizeRule& rule,
                      const SaddlePoint& reference, const RunOptions& options, Algorithm algo) {
  spec.validate();
  rule.validate();
  if (options.stride == 0) throw SpecError("run: checkpoint stride must be positive");

  RunTrace trace;
  trace.algo = algo;
  trace.seed = options.seed;

  SystemState state = initial_state(spec, initial_iterate(spec, options.init, options.seed),
                                    options.init == InitMode::Uniform);
  auto streams = make_worker_streams(spec, options.seed);
  trace.records.push_back(snapshot(spec, state, reference));

  const Iteration last = std::min(options.horizon, schedule.horizon);
  while (state.k < last && state.cursor < schedule.events.size()) {
    const ScheduledEvent& e = step(state, schedule, spec, rule, streams);
    if (e.counted() && (state.k % options.stride == 0 || state.k == last))
      trace.records.push_back(snapshot(spec, state, reference));
  }
  return trace;
}

RunTrace run_apd(const ProblemSpec& spec, const DelayModel& delay, const StepSizeRule& rule,
                 const SaddlePoint& reference, const RunOptions& options) {
  if (delay.workers() != spec.n) throw SpecError("run_apd: schedule lists a different number of workers");
  if (options.horizon == 0) return run_schedule(spec, Schedule{spec.n, 0, false, {}}, rule, reference, options, Algorithm::Apd);
  return run_schedule(spec, build_schedule(delay, options.horizon), rule, reference, options, Algorithm::Apd);
}

RunTrace run_sync_pd(const ProblemSpec& spec, const DelayModel& delay, const StepSizeRule& rule,
                     const SaddlePoint& reference, const RunOptions& options) {
  if (delay.workers() != spec.n) throw SpecError("run_sync_pd: schedule lists a different number of workers");
  if (options.horizon == 0)
    return run_schedule(spec, Schedule{spec.n, 0, true, {}}, rule, reference, options, Algorithm::SyncPd);
  return run_schedule(spec, build_sync_schedule(delay, options.horizon), rule, reference, options,
                      Algorithm::SyncPd);
}

}  // namespace apd
