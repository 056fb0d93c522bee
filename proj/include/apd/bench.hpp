#pragma once

// Experiment harness: flat-key configuration, seeded repetitions on a thread
// pool, summary statistics and CSV artifacts.
//
// Config grammar: one `key = value` per line, `#` starts a comment, lists are
// comma or whitespace separated and may be wrapped in [ ]. Keys:
//
//   problem.n  problem.dim  problem.means  problem.noise_sd
//   problem.constraint (capacity | squared_norm)  problem.capacity
//   problem.constraint_coeffs  problem.box_lo  problem.box_hi
//   problem.dual_max  problem.upsilon  problem.dual_scaling
//   schedule.compute_ticks  schedule.upload_delay  schedule.broadcast_delay
//   stepsize.kind (inverse | constant)  stepsize.a0  stepsize.a1  stepsize.gamma
//   run.horizon  run.seeds | (run.seed_count, run.master_seed)
//   run.checkpoint_stride  run.algorithms  run.init  run.truncation
//   run.thresholds  run.oracle_tolerance
//
// problem.means holds n*dim values, worker-major. A single box bound applies
// to every worker. compute_ticks accepts `inf` for a halted worker.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apd/analysis.hpp"
#include "apd/engine.hpp"
#include "apd/solvers.hpp"

namespace apd {

/// Invalid configuration; `fields` lists every problem found.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> fields);
  [[nodiscard]] const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

struct ExperimentConfig {
  // problem
  std::size_t n = 0;
  std::size_t dim = 1;
  Vec means;
  double noise_sd = 0.0;
  std::string constraint = "capacity";
  Vec capacity{0.0};
  Vec constraint_coeffs;  // m x dim, row-major; empty means all ones
  Vec box_lo;
  Vec box_hi;
  double dual_max = 0.0;
  double upsilon = 0.0;
  bool dual_scaling = true;
  // schedule
  std::vector<Tick> compute_ticks;
  Tick upload_delay = 0;
  Tick broadcast_delay = 0;
  // stepsize
  StepSizeRule rule;
  // run
  Iteration horizon = 0;
  std::vector<std::uint64_t> seeds;
  Iteration checkpoint_stride = 1;
  std::vector<Algorithm> algorithms{Algorithm::Apd, Algorithm::SyncPd};
  InitMode init = InitMode::Zero;
  double truncation = 6.0;
  Vec thresholds{1.0, 0.1, 0.01};
  double oracle_tolerance = 1e-10;

  [[nodiscard]] ProblemSpec problem() const;
  [[nodiscard]] DelayModel delays() const;
  /// Throws ConfigError listing every violated field.
  void validate() const;
  /// Canonical text form; parse(serialize()) reproduces the config.
  [[nodiscard]] std::string serialize() const;
  /// FNV-1a of serialize(), 16 hex digits.
  [[nodiscard]] std::string hash() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canned scenarios "fig2" (v = 4,4,3,2,1) and "fig3" (v = 10,4,3,2,1).
ExperimentConfig scenario_config(const std::string& name);
std::vector<std::string> scenario_names();

struct SummaryRow {
  Algorithm algo = Algorithm::Apd;
  Iteration k = 0;
  Tick tick = 0;
  double mean = 0.0;
  double p05 = 0.0;
  double p95 = 0.0;
};

struct ThresholdRow {
  Algorithm algo = Algorithm::Apd;
  double threshold = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<Tick>> per_seed;  // first checkpoint tick with delta <= threshold
  double median = 0.0;                        // infinite when unreached runs dominate
};

struct Summary {
  std::string config_hash;
  std::vector<SummaryRow> rows;
  std::vector<ThresholdRow> thresholds;
};

/// Linear-interpolation percentile, q in [0, 1].
double percentile(Vec values, double q);

/// Median over seeds; unreached entries count as +infinity.
double median_tick(const std::vector<std::optional<Tick>>& ticks);

/// Throws ConfigError when traces carry different config hashes.
Summary summarize(const std::vector<RunTrace>& traces, const Vec& thresholds = {1.0, 0.1, 0.01});

struct BoundRow {
  Iteration k = 0;
  double bound = 0.0;  // bound on E[Delta^k]
};

struct ValidationReport {
  AssumptionReport assumptions;
  SmoothnessConstants constants;
  std::optional<StepsizeReport> stepsize;  // needs a window (p, B)
  std::optional<BoundConstants> bound;
};

ValidationReport validate_experiment(const ExperimentConfig& config);

struct ExperimentResult {
  std::string config_hash;
  SaddlePoint saddle;
  std::vector<RunTrace> traces;  // algorithm-major, then seed order
  Summary summary;
  ValidationReport validation;
  std::vector<BoundRow> bound;   // empty unless the step-size conditions pass
};

/// threads = 0 uses the hardware concurrency.
ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads = 0);

/// Bound curve on the checkpoints of `k_values`, using delta0 as the initial error.
std::vector<BoundRow> bound_curve(const BoundConstants& bc, const StepSizeRule& rule, double delta0,
                                  const std::vector<Iteration>& k_values);

// CSV artifacts. Numbers are written with 17 significant digits.
std::string format_double(double v);
void write_traces_csv(std::ostream& os, const std::vector<RunTrace>& traces);
std::vector<RunTrace> read_traces_csv(std::istream& is);
void write_summary_csv(std::ostream& os, const Summary& summary);
void write_thresholds_csv(std::ostream& os, const Summary& summary);
void write_bound_csv(std::ostream& os, const std::string& config_hash, const std::vector<BoundRow>& rows);
void write_oracle_csv(std::ostream& os, const std::string& config_hash, const SaddlePoint& saddle);

/// Writes traces.csv, summary.csv, thresholds.csv, oracle.csv and, when the
/// bound applies, bound.csv. Returns the files written.
std::vector<std::filesystem::path> write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace apd
