#pragma once

// End-to-end runs of the asynchronous method and of the barrier-synchronized
// baseline. Both consume a timeline from the engine, so their traces share
// the tick clock and the per-worker sample streams.

#include <optional>
#include <string>
#include <vector>

#include "apd/analysis.hpp"
#include "apd/engine.hpp"
#include "apd/stepsize.hpp"

namespace apd {

enum class Algorithm { Apd, SyncPd };

const char* to_string(Algorithm algo);
std::optional<Algorithm> parse_algorithm(const std::string& name);

enum class InitMode {
  Zero,     // theta0 = P_C[0], empty server buffer
  Uniform,  // theta0 ~ U(C_i) from a dedicated stream, buffer preloaded with theta0
};

const char* to_string(InitMode mode);
std::optional<InitMode> parse_init_mode(const std::string& name);

struct RunOptions {
  std::uint64_t seed = 0;
  Iteration horizon = 0;
  Iteration stride = 1;
  InitMode init = InitMode::Zero;
};

struct TraceRecord {
  Iteration k = 0;
  Tick tick = 0;
  double delta = 0.0;
  Vec lambda;
  Vec g_mean;  // g(theta_bar^k)
  std::vector<Vec> theta;

  bool operator==(const TraceRecord&) const = default;
};

struct RunTrace {
  Algorithm algo = Algorithm::Apd;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<TraceRecord> records;
};

std::vector<Vec> initial_iterate(const ProblemSpec& spec, InitMode mode, std::uint64_t seed);

/// Replays `schedule` from the initial state. Records k = 0, every k that is
/// a multiple of the stride, and the final iteration.
RunTrace run_schedule(const ProblemSpec& spec, const Schedule& schedule, const StepSizeRule& rule,
                      const SaddlePoint& reference, const RunOptions& options, Algorithm algo);

RunTrace run_apd(const ProblemSpec& spec, const DelayModel& delay, const StepSizeRule& rule,
                 const SaddlePoint& reference, const RunOptions& options);

RunTrace run_sync_pd(const ProblemSpec& spec, const DelayModel& delay, const StepSizeRule& rule,
                     const SaddlePoint& reference, const RunOptions& options);

}  // namespace apd
