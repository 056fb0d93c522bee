// apdsim: run, inspect and validate asynchronous primal-dual experiments.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "apd/bench.hpp"
#include "json.hpp"

using json = nlohmann::json;
using namespace apd;

namespace {

struct Common {
  std::string config_path;
  std::string scenario;
  std::optional<std::uint64_t> seeds;
  std::optional<std::uint64_t> master_seed;
  std::optional<Iteration> stride;
  std::string out;
  std::string event_log;
  bool dump_config = false;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_scenario_option) {
  cmd->add_option("--config", c.config_path, "Experiment config file");
  if (with_scenario_option) cmd->add_option("--scenario", c.scenario, "Canned scenario instead of a config file");
  cmd->add_option("--seeds", c.seeds, "Number of seeds (overrides the config)");
  cmd->add_option("--master-seed", c.master_seed, "First seed; seeds are master, master+1, ...");
  cmd->add_option("--checkpoint-stride", c.stride, "Record every K iterations");
  cmd->add_option("--out", c.out, "Output directory (default: $APD_OUT_DIR, then ./out)");
  cmd->add_option("--event-log", c.event_log, "Write the APD event timeline as TSV");
  cmd->add_flag("--dump-config", c.dump_config, "Print the resolved config and exit");
  cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
}

ExperimentConfig resolve(const Common& c) {
  if (!c.config_path.empty() && !c.scenario.empty())
    throw ConfigError({"--config: give either a config file or a scenario"});
  ExperimentConfig cfg;
  if (!c.scenario.empty())
    cfg = scenario_config(c.scenario);
  else if (!c.config_path.empty())
    cfg = load_config(c.config_path);
  else
    throw ConfigError({"--config: required"});

  if (c.seeds || c.master_seed) {
    const std::uint64_t count = c.seeds.value_or(cfg.seeds.size());
    const std::uint64_t first = c.master_seed.value_or(cfg.seeds.empty() ? 0 : cfg.seeds.front());
    cfg.seeds.clear();
    for (std::uint64_t j = 0; j < count; ++j) cfg.seeds.push_back(first + j);
  }
  if (c.stride) cfg.checkpoint_stride = *c.stride;
  cfg.validate();
  return cfg;
}

std::filesystem::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("APD_OUT_DIR"); env && *env) return env;
  return "out";
}

json window_json(const std::optional<WindowCounts>& w) {
  if (!w) return nullptr;
  return {{"p", w->p}, {"B", w->B}};
}

json validation_json(const ValidationReport& r) {
  json j;
  const auto& a = r.assumptions;
  j["assumptions"] = {{"tau_bar", a.tau_bar},
                      {"max_server_staleness", a.max_server_staleness},
                      {"max_broadcast_staleness", a.max_broadcast_staleness},
                      {"exact_window", window_json(a.exact)},
                      {"relaxed_window", window_json(a.relaxed)},
                      {"a5_ok", a.a5_ok()},
                      {"a6_ok", a.a6_ok()},
                      {"violations", a.violations}};
  const auto& k = r.constants;
  j["constants"] = {{"mu", k.mu}, {"L", k.L}, {"M", k.M}, {"D", k.D}, {"L_max", k.L_max},
                    {"L_g", k.L_g}, {"sigma_max_sq", k.sigma_max_sq}};
  if (r.stepsize) {
    const auto& s = *r.stepsize;
    json sj = {{"pass", s.pass()},          {"sup_ok", s.sup_ok},       {"ratio_ok", s.ratio_ok},
               {"sup_gamma", s.sup_gamma},  {"sup_limit", s.sup_limit}, {"worst_ratio_excess", s.worst_ratio_excess}};
    if (s.first_bad_index) sj["first_bad"] = {{"j", *s.first_bad_index}, {"k", *s.first_bad_k}, {"l", *s.first_bad_window}};
    j["stepsize"] = sj;
  }
  if (r.bound) {
    const auto& b = *r.bound;
    j["bound_constants"] = {{"C1", b.C1}, {"C2", b.C2}, {"C3", b.C3},         {"C4", b.C4},
                            {"C", b.C},   {"p", b.p},   {"B", b.B},           {"b_sq", b.b_sq},
                            {"b_guidance", b.b_guidance}, {"applicable", b.applicable}};
  }
  return j;
}

json saddle_json(const SaddlePoint& s) {
  return {{"theta", s.theta}, {"lambda", s.lambda}, {"residual", s.residual}, {"method", s.method}};
}

int run_config(const ExperimentConfig& cfg, const Common& c) {
  if (c.dump_config) {
    std::cout << cfg.serialize();
    return 0;
  }
  const auto dir = out_dir(c);
  if (!c.event_log.empty()) {
    std::ofstream log(c.event_log);
    if (!log) throw std::runtime_error("cannot write " + c.event_log);
    write_event_log(log, build_schedule(cfg.delays(), cfg.horizon));
  }
  const ExperimentResult result = run_experiment(cfg, c.threads);
  const auto files = write_artifacts(result, dir);
  json j = {{"config_hash", result.config_hash}, {"oracle", saddle_json(result.saddle)}};
  for (const auto& t : result.summary.thresholds) {
    std::ostringstream key;
    key << t.threshold;
    j["median_time_to_threshold"][to_string(t.algo)][key.str()] =
        std::isinf(t.median) ? json("inf") : json(t.median);
  }
  for (const auto& f : files) j["files"].push_back(f.string());
  std::cout << j.dump(2) << '\n';
  return 0;
}

void emit_error(const std::string& kind, const std::string& message, const std::vector<std::string>& fields = {}) {
  json j = {{"error", kind}, {"message", message}};
  if (!fields.empty()) j["fields"] = fields;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous primal-dual simulator"};
  app.require_subcommand(1);

  Common run_opts, scen_opts, oracle_opts, validate_opts, bound_opts;
  std::string scenario_name;

  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  add_common(run, run_opts, false);

  auto* scen = app.add_subcommand("scenario", "Run a canned scenario (fig2 or fig3)");
  scen->add_option("name", scenario_name, "Scenario name")->required();
  add_common(scen, scen_opts, false);

  auto* oracle = app.add_subcommand("oracle", "Print the saddle point of a config");
  add_common(oracle, oracle_opts, true);

  auto* validate = app.add_subcommand("validate", "Report staleness, window counts, constants and step-size checks");
  add_common(validate, validate_opts, true);

  auto* bound = app.add_subcommand("bound", "Write the convergence bound curve");
  add_common(bound, bound_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return 2;
  }

  try {
    if (*run) return run_config(resolve(run_opts), run_opts);
    if (*scen) {
      scen_opts.scenario = scenario_name;
      return run_config(resolve(scen_opts), scen_opts);
    }
    if (*oracle) {
      const auto cfg = resolve(oracle_opts);
      if (oracle_opts.dump_config) return std::cout << cfg.serialize(), 0;
      const ProblemSpec spec = cfg.problem();
      json j = {{"config_hash", cfg.hash()}, {"oracle", saddle_json(saddle_oracle(spec, cfg.oracle_tolerance))}};
      if (auto cf = closed_form_saddle(spec)) j["closed_form"] = saddle_json(*cf);
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*validate) {
      const auto cfg = resolve(validate_opts);
      if (validate_opts.dump_config) return std::cout << cfg.serialize(), 0;
      json j = validation_json(validate_experiment(cfg));
      j["config_hash"] = cfg.hash();
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*bound) {
      const auto cfg = resolve(bound_opts);
      if (bound_opts.dump_config) return std::cout << cfg.serialize(), 0;
      const ValidationReport rep = validate_experiment(cfg);
      if (!rep.bound) throw std::runtime_error("bound: the schedule has no covering window, A6 fails");
      const ProblemSpec spec = cfg.problem();
      const SaddlePoint sp = saddle_oracle(spec, cfg.oracle_tolerance);
      double delta0 = 0.0;
      for (std::uint64_t s : cfg.seeds) {
        const auto theta0 = initial_iterate(spec, cfg.init, s);
        delta0 += error_metric(theta0, Vec(spec.m(), 0.0), sp);
      }
      delta0 /= static_cast<double>(cfg.seeds.size());
      std::vector<Iteration> ks;
      for (Iteration k = 0; k <= cfg.horizon; k += cfg.checkpoint_stride) ks.push_back(k);
      if (ks.back() != cfg.horizon) ks.push_back(cfg.horizon);
      const auto dir = out_dir(bound_opts);
      std::filesystem::create_directories(dir);
      std::ofstream out(dir / "bound.csv", std::ios::binary);
      write_bound_csv(out, cfg.hash(), bound_curve(*rep.bound, cfg.rule, delta0, ks));
      json j = {{"config_hash", cfg.hash()},
                {"applicable", rep.bound->applicable},
                {"delta0", delta0},
                {"file", (dir / "bound.csv").string()}};
      std::cout << j.dump(2) << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    emit_error("config", e.what(), e.fields());
    return 3;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 1;
  }
  return 0;
}
