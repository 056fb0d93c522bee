#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "apd/bench.hpp"

using namespace apd;

namespace {

const char* kSmall = R"(
problem.n = 3
problem.means = [4, 6, 8]
problem.noise_sd = 1
problem.capacity = 4
problem.box_lo = 0
problem.box_hi = 10
problem.dual_max = 50
problem.upsilon = 0.01
schedule.compute_ticks = 3 2 1   # spaces work too
schedule.upload_delay = 1
schedule.broadcast_delay = 1
stepsize.a0 = 2
stepsize.a1 = 20
run.horizon = 600
run.seed_count = 4
run.master_seed = 7
run.checkpoint_stride = 25
)";

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.fields();
  }
  return {};
}

bool mentions(const std::vector<std::string>& fields, const std::string& key) {
  for (const std::string& f : fields)
    if (f.rfind(key, 0) == 0) return true;
  return false;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("config parses, serializes and hashes stably") {
  const ExperimentConfig c = parse_config(kSmall);
  CHECK(c.n == 3);
  CHECK(c.compute_ticks == std::vector<Tick>{3, 2, 1});
  CHECK(c.seeds == std::vector<std::uint64_t>{7, 8, 9, 10});
  CHECK(c.rule.kind == StepSizeRule::Kind::InverseIteration);
  const ExperimentConfig again = parse_config(c.serialize());
  CHECK(again.serialize() == c.serialize());
  CHECK(again.hash() == c.hash());
  CHECK(c.hash().size() == 16);

  ExperimentConfig changed = c;
  changed.upsilon = 0.02;
  CHECK(changed.hash() != c.hash());
}

TEST_CASE("config errors list every bad field") {
  const auto fields = errors_of(R"(
problem.n = 3
problem.means = 1, 2, x
problem.capacity = 2
problem.box_lo = 0
problem.box_hi = 5
problem.dual_max = -1
problem.upsilon = 0.01
problem.colour = blue
schedule.compute_ticks = 1, 2
run.horizon = 10
)");
  CHECK(mentions(fields, "problem.means"));
  CHECK(mentions(fields, "problem.colour"));
  CHECK(fields.size() == 2);

  // Semantic checks run once the syntax is clean.
  const auto semantic = errors_of(R"(
problem.n = 3
problem.means = 1, 2, 3
problem.capacity = 2
problem.box_lo = 0
problem.box_hi = 5
problem.dual_max = -1
problem.upsilon = 0.01
schedule.compute_ticks = 1, 2
run.horizon = 10
)");
  CHECK(mentions(semantic, "problem.dual_max"));
  CHECK(mentions(semantic, "schedule.compute_ticks"));
  CHECK(mentions(semantic, "run.seeds"));
  CHECK(mentions(semantic, "stepsize.a0"));

  CHECK(mentions(errors_of("run.horizon = 1\nrun.horizon = 2\n"), "run.horizon"));
  CHECK(mentions(errors_of("just words\n"), "line 1"));
  CHECK(mentions(errors_of(std::string(kSmall) + "run.seeds = 1, 2\n"), "run.seeds"));
  CHECK(mentions(errors_of(std::string(kSmall) + "stepsize.gamma = 0.1\n"), "stepsize.gamma"));
  CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), ConfigError);
}

TEST_CASE("halted workers and constant steps round trip") {
  std::string text = kSmall;
  text.replace(text.find("3 2 1"), 5, "3, inf, 1");
  text.replace(text.find("stepsize.a0 = 2\nstepsize.a1 = 20"), 31, "stepsize.kind = constant\nstepsize.gamma = 0.05");
  const ExperimentConfig c = parse_config(text);
  CHECK(c.compute_ticks[1] == kNeverTick);
  CHECK(c.rule.kind == StepSizeRule::Kind::Constant);
  CHECK(c.rule(123) == 0.05);
  CHECK(parse_config(c.serialize()).hash() == c.hash());
  CHECK(c.serialize().find("inf") != std::string::npos);
}

TEST_CASE("percentile and median") {
  CHECK(percentile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(percentile({0.0, 10.0}, 0.05) == doctest::Approx(0.5));
  CHECK(percentile({0.0, 10.0}, 0.95) == doctest::Approx(9.5));
  CHECK(percentile({4.0}, 0.95) == 4.0);
  CHECK_THROWS(percentile({}, 0.5));
  CHECK(median_tick({Tick{5}, std::nullopt, Tick{3}}) == 5.0);
  CHECK(median_tick({Tick{5}, Tick{3}, Tick{9}, Tick{1}}) == 4.0);
  CHECK(std::isinf(median_tick({Tick{5}, std::nullopt, std::nullopt, Tick{1}})));
  CHECK(std::isinf(median_tick({std::nullopt})));
}

TEST_CASE("summary bands and thresholds") {
  RunTrace a{Algorithm::Apd, 1, "h", {}}, b{Algorithm::Apd, 2, "h", {}};
  for (Iteration k = 0; k < 4; ++k) {
    a.records.push_back({k, 10 * k, 1.0 / (k + 1.0), {0.0}, {0.0}, {{0.0}}});
    b.records.push_back({k, 10 * k, 1.0 / (k + 1.0), {0.0}, {0.0}, {{0.0}}});
  }
  Summary s = summarize({a, b}, {0.3, 0.01});
  REQUIRE(s.rows.size() == 4);
  for (const SummaryRow& r : s.rows) {
    CHECK(r.p05 == r.mean);
    CHECK(r.p95 == r.mean);
  }
  REQUIRE(s.thresholds.size() == 2);
  CHECK(s.thresholds[0].median == 30.0);
  CHECK(std::isinf(s.thresholds[1].median));

  b.config_hash = "other";
  CHECK_THROWS_AS(summarize({a, b}), ConfigError);
}

TEST_CASE("experiment is deterministic across reruns and thread counts") {
  const ExperimentConfig c = parse_config(kSmall);
  const ExperimentResult r1 = run_experiment(c, 1), r4 = run_experiment(c, 4);
  std::ostringstream t1, t4, s1, s4;
  write_traces_csv(t1, r1.traces);
  write_traces_csv(t4, r4.traces);
  write_summary_csv(s1, r1.summary);
  write_summary_csv(s4, r4.summary);
  CHECK(t1.str() == t4.str());
  CHECK(s1.str() == s4.str());
  REQUIRE(r1.traces.size() == 8);
  CHECK(r1.traces[0].algo == Algorithm::Apd);
  CHECK(r1.traces[4].algo == Algorithm::SyncPd);
  CHECK(r1.traces[1].seed == 8);
  CHECK(r1.config_hash == c.hash());

  const auto dir = std::filesystem::temp_directory_path() / "apd_bench_test";
  std::filesystem::remove_all(dir);
  const auto files = write_artifacts(r1, dir);
  CHECK(files.size() >= 4);
  CHECK(slurp(dir / "traces.csv") == t1.str());
  CHECK(slurp(dir / "oracle.csv").find(c.hash()) != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("trace CSV round trip is exact") {
  const ExperimentResult r = run_experiment(parse_config(kSmall), 2);
  std::stringstream ss;
  write_traces_csv(ss, r.traces);
  const auto back = read_traces_csv(ss);
  REQUIRE(back.size() == r.traces.size());
  for (std::size_t t = 0; t < back.size(); ++t) {
    CHECK(back[t].algo == r.traces[t].algo);
    CHECK(back[t].seed == r.traces[t].seed);
    CHECK(back[t].config_hash == r.traces[t].config_hash);
    CHECK(back[t].records == r.traces[t].records);
  }

  auto mixed = r.traces;
  mixed[1].config_hash = "0000000000000000";
  std::stringstream bad;
  write_traces_csv(bad, mixed);
  CHECK_THROWS_AS(read_traces_csv(bad), ConfigError);
}

TEST_CASE("format_double keeps full precision") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, -0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(INFINITY) == "inf");
}

TEST_CASE("canned scenarios") {
  CHECK(scenario_names() == std::vector<std::string>{"fig2", "fig3"});
  const ExperimentConfig f2 = scenario_config("fig2"), f3 = scenario_config("fig3");
  CHECK(f2.compute_ticks == std::vector<Tick>{4, 4, 3, 2, 1});
  CHECK(f3.compute_ticks == std::vector<Tick>{10, 4, 3, 2, 1});
  CHECK(f2.hash() != f3.hash());
  CHECK(f2.seeds.size() == 10);
  CHECK_THROWS_AS(scenario_config("fig9"), ConfigError);
  CHECK_NOTHROW(f2.validate());

  const ValidationReport v = validate_experiment(f2);
  REQUIRE(v.bound.has_value());
  CHECK(v.assumptions.a6_ok());
  CHECK(v.bound->B == v.assumptions.relaxed->B);
  CHECK_FALSE(v.bound->applicable);
}

TEST_CASE("bound curve starts at delta0 and shifts by one") {
  BoundConstants bc;
  bc.p = 1;
  bc.B = 3;
  bc.mu = 0.1;
  bc.C = 2.0;
  const auto rule = StepSizeRule::inverse(5.0, 60.0);
  const auto rows = bound_curve(bc, rule, 4.0, {0, 1, 10, 100});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].bound == 4.0);
  CHECK(rows[2].bound == theorem_bound(9, 4.0, bc, rule));
  CHECK(rows[3].bound < rows[2].bound);
}

TEST_CASE("noise widens the seed band") {
  double prev = 0.0;
  for (double sd : {1.0, 2.0, 4.0}) {
    ExperimentConfig c = parse_config(kSmall);
    c.noise_sd = sd;
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    c.algorithms = {Algorithm::Apd};
    const ExperimentResult r = run_experiment(c, 0);
    double width = 0.0;
    for (const SummaryRow& row : r.summary.rows)
      if (row.k >= 300) width += row.p95 - row.p05;
    CHECK(width > prev);
    prev = width;
  }
}
