#include "apd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace apd {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double percentile(Vec values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return frac == 0.0 ? values[lo] : values[lo] + frac * (values[hi] - values[lo]);
}

double median_tick(const std::vector<std::optional<Tick>>& ticks) {
  if (ticks.empty()) throw std::invalid_argument("median_tick: no values");
  Vec v;
  for (const auto& t : ticks) v.push_back(t ? static_cast<double>(*t) : INFINITY);
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  if (std::isinf(v[mid])) return INFINITY;
  return 0.5 * (v[mid - 1] + v[mid]);
}

Summary summarize(const std::vector<RunTrace>& traces, const Vec& thresholds) {
  if (traces.empty()) throw std::invalid_argument("summarize: no traces");
  Summary s;
  s.config_hash = traces.front().config_hash;
  for (const RunTrace& t : traces)
    if (t.config_hash != s.config_hash)
      throw ConfigError({"traces: config hash " + t.config_hash + " differs from " + s.config_hash});

  std::vector<Algorithm> algos;
  for (const RunTrace& t : traces)
    if (std::find(algos.begin(), algos.end(), t.algo) == algos.end()) algos.push_back(t.algo);

  for (Algorithm algo : algos) {
    std::vector<const RunTrace*> group;
    for (const RunTrace& t : traces)
      if (t.algo == algo) group.push_back(&t);
    const auto& grid = group.front()->records;
    for (const RunTrace* t : group) {
      bool same = t->records.size() == grid.size();
      for (std::size_t r = 0; same && r < grid.size(); ++r) same = t->records[r].k == grid[r].k;
      if (!same) throw std::invalid_argument("summarize: traces of one algorithm use different checkpoints");
    }
    for (std::size_t r = 0; r < grid.size(); ++r) {
      Vec deltas;
      for (const RunTrace* t : group) deltas.push_back(t->records[r].delta);
      SummaryRow row;
      row.algo = algo;
      row.k = grid[r].k;
      row.tick = grid[r].tick;
      double sum = 0.0;
      for (double d : deltas) sum += d;
      row.mean = sum / static_cast<double>(deltas.size());
      row.p05 = percentile(deltas, 0.05);
      row.p95 = percentile(deltas, 0.95);
      s.rows.push_back(row);
    }
    for (double thr : thresholds) {
      ThresholdRow tr;
      tr.algo = algo;
      tr.threshold = thr;
      for (const RunTrace* t : group) {
        tr.seeds.push_back(t->seed);
        std::optional<Tick> hit;
        for (const TraceRecord& rec : t->records)
          if (rec.delta <= thr) {
            hit = rec.tick;
            break;
          }
        tr.per_seed.push_back(hit);
      }
      tr.median = median_tick(tr.per_seed);
      s.thresholds.push_back(std::move(tr));
    }
  }
  return s;
}

ValidationReport validate_experiment(const ExperimentConfig& config) {
  const ProblemSpec spec = config.problem();
  ValidationReport rep;
  rep.constants = compute_constants(spec, config.truncation);
  rep.assumptions = validate_assumptions(build_schedule(config.delays(), config.horizon));
  if (rep.assumptions.relaxed) {
    const WindowCounts w = rep.assumptions.exact.value_or(*rep.assumptions.relaxed);
    rep.stepsize = check_stepsize_conditions(config.rule, w.p, w.B, rep.constants.mu, config.horizon);
    BoundConstants bc = compute_bound_constants(rep.constants, w.p, w.B, rep.assumptions.tau_bar, config.rule,
                                                config.horizon);
    bc.applicable = rep.stepsize->pass() && rep.assumptions.a5_ok();
    rep.bound = bc;
  }
  return rep;
}

std::vector<BoundRow> bound_curve(const BoundConstants& bc, const StepSizeRule& rule, double delta0,
                                  const std::vector<Iteration>& k_values) {
  std::vector<BoundRow> rows;
  rows.reserve(k_values.size());
  for (Iteration k : k_values) rows.push_back({k, k == 0 ? delta0 : theorem_bound(k - 1, delta0, bc, rule)});
  return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  const ProblemSpec spec = config.problem();
  const DelayModel delay = config.delays();

  ExperimentResult result;
  result.config_hash = config.hash();
  result.saddle = saddle_oracle(spec, config.oracle_tolerance);

  std::vector<Schedule> schedules;
  for (Algorithm algo : config.algorithms)
    schedules.push_back(algo == Algorithm::Apd ? build_schedule(delay, config.horizon)
                                               : build_sync_schedule(delay, config.horizon));

  const std::size_t per_algo = config.seeds.size();
  const std::size_t total = per_algo * config.algorithms.size();
  result.traces.resize(total);
  std::vector<std::exception_ptr> failures(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < total; t = next++) {
      try {
        const std::size_t a = t / per_algo;
        RunOptions opt{config.seeds[t % per_algo], config.horizon, config.checkpoint_stride, config.init};
        result.traces[t] = run_schedule(spec, schedules[a], config.rule, result.saddle, opt, config.algorithms[a]);
        result.traces[t].config_hash = result.config_hash;
      } catch (...) {
        failures[t] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  result.summary = summarize(result.traces, config.thresholds);
  result.validation = validate_experiment(config);

  if (result.validation.bound && result.validation.bound->applicable) {
    const auto apd = std::find(config.algorithms.begin(), config.algorithms.end(), Algorithm::Apd);
    if (apd != config.algorithms.end()) {
      const std::size_t a = static_cast<std::size_t>(apd - config.algorithms.begin());
      double delta0 = 0.0;
      for (std::size_t s = 0; s < per_algo; ++s) delta0 += result.traces[a * per_algo + s].records.front().delta;
      delta0 /= static_cast<double>(per_algo);
      std::vector<Iteration> ks;
      for (const TraceRecord& r : result.traces[a * per_algo].records) ks.push_back(r.k);
      result.bound = bound_curve(*result.validation.bound, config.rule, delta0, ks);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("csv: bad number '" + s + "'");
  return v;
}

std::vector<std::string> indexed(const std::string& base, std::size_t count) {
  if (count == 1) return {base};
  std::vector<std::string> out;
  for (std::size_t j = 0; j < count; ++j) out.push_back(base + "_" + std::to_string(j + 1));
  return out;
}

}  // namespace

void write_traces_csv(std::ostream& os, const std::vector<RunTrace>& traces) {
  if (traces.empty() || traces.front().records.empty()) {
    os << "run_id,seed,algo,k,tick,delta,lambda,g_mean\n";
    return;
  }
  const TraceRecord& proto = traces.front().records.front();
  const std::size_t m = proto.lambda.size(), n = proto.theta.size(), d = proto.theta.front().size();
  os << "run_id,seed,algo,k,tick,delta";
  for (const auto& h : indexed("lambda", m)) os << ',' << h;
  for (const auto& h : indexed("g_mean", m)) os << ',' << h;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c)
      os << ",theta_" << i + 1 << (d == 1 ? "" : "_" + std::to_string(c + 1));
  os << '\n';
  for (const RunTrace& t : traces) {
    const std::string id = t.config_hash + ":" + to_string(t.algo) + ":" + std::to_string(t.seed);
    for (const TraceRecord& r : t.records) {
      if (r.lambda.size() != m || r.theta.size() != n) throw DimensionError("write_traces_csv: ragged traces");
      os << id << ',' << t.seed << ',' << to_string(t.algo) << ',' << r.k << ',' << r.tick << ','
         << format_double(r.delta);
      for (double v : r.lambda) os << ',' << format_double(v);
      for (double v : r.g_mean) os << ',' << format_double(v);
      for (const Vec& th : r.theta)
        for (double v : th) os << ',' << format_double(v);
      os << '\n';
    }
  }
}

std::vector<RunTrace> read_traces_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("read_traces_csv: missing header");
  const auto header = split_csv(line);
  if (header.size() < 6 || header[0] != "run_id") throw std::invalid_argument("read_traces_csv: unexpected header");
  std::size_t m = 0, n = 0, d = 1;
  for (const std::string& h : header) {
    if (h.rfind("lambda", 0) == 0) ++m;
    if (h.rfind("theta_", 0) == 0) {
      ++n;
      const auto second = h.find('_', 6);
      if (second != std::string::npos) d = std::max<std::size_t>(d, std::stoul(h.substr(second + 1)));
    }
  }
  n /= d;

  std::vector<RunTrace> traces;
  std::string hash;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw std::invalid_argument("read_traces_csv: row width differs from header");
    const std::string& id = f[0];
    const auto colon = id.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("read_traces_csv: malformed run_id '" + id + "'");
    const std::string row_hash = id.substr(0, colon);
    if (hash.empty()) hash = row_hash;
    if (row_hash != hash) throw ConfigError({"traces: config hash " + row_hash + " differs from " + hash});
    const auto algo = parse_algorithm(f[2]);
    if (!algo) throw std::invalid_argument("read_traces_csv: unknown algorithm '" + f[2] + "'");
    const std::uint64_t seed = std::stoull(f[1]);
    if (traces.empty() || traces.back().seed != seed || traces.back().algo != *algo) {
      traces.push_back({*algo, seed, row_hash, {}});
    }
    TraceRecord r;
    r.k = std::stoull(f[3]);
    r.tick = std::stoull(f[4]);
    r.delta = parse_number(f[5]);
    std::size_t col = 6;
    for (std::size_t j = 0; j < m; ++j) r.lambda.push_back(parse_number(f[col++]));
    for (std::size_t j = 0; j < m; ++j) r.g_mean.push_back(parse_number(f[col++]));
    r.theta.assign(n, Vec(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) r.theta[i][c] = parse_number(f[col++]);
    traces.back().records.push_back(std::move(r));
  }
  return traces;
}

void write_summary_csv(std::ostream& os, const Summary& summary) {
  os << "config_hash,algo,k,tick,mean,p05,p95\n";
  for (const SummaryRow& r : summary.rows)
    os << summary.config_hash << ',' << to_string(r.algo) << ',' << r.k << ',' << r.tick << ','
       << format_double(r.mean) << ',' << format_double(r.p05) << ',' << format_double(r.p95) << '\n';
}

void write_thresholds_csv(std::ostream& os, const Summary& summary) {
  os << "config_hash,algo,threshold,seed,first_tick\n";
  for (const ThresholdRow& t : summary.thresholds) {
    for (std::size_t s = 0; s < t.seeds.size(); ++s)
      os << summary.config_hash << ',' << to_string(t.algo) << ',' << format_double(t.threshold) << ',' << t.seeds[s]
         << ',' << (t.per_seed[s] ? std::to_string(*t.per_seed[s]) : "inf") << '\n';
    os << summary.config_hash << ',' << to_string(t.algo) << ',' << format_double(t.threshold) << ",median,"
       << format_double(t.median) << '\n';
  }
}

void write_bound_csv(std::ostream& os, const std::string& config_hash, const std::vector<BoundRow>& rows) {
  os << "config_hash,k,bound\n";
  for (const BoundRow& r : rows) os << config_hash << ',' << r.k << ',' << format_double(r.bound) << '\n';
}

void write_oracle_csv(std::ostream& os, const std::string& config_hash, const SaddlePoint& saddle) {
  os << "config_hash,variable,index,component,value\n";
  for (std::size_t i = 0; i < saddle.theta.size(); ++i)
    for (std::size_t c = 0; c < saddle.theta[i].size(); ++c)
      os << config_hash << ",theta," << i + 1 << ',' << c + 1 << ',' << format_double(saddle.theta[i][c]) << '\n';
  for (std::size_t j = 0; j < saddle.lambda.size(); ++j)
    os << config_hash << ",lambda," << j + 1 << ",1," << format_double(saddle.lambda[j]) << '\n';
  os << config_hash << ",residual,0,0," << format_double(saddle.residual) << '\n';
}

std::vector<std::filesystem::path> write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, auto&& fn) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    fn(out);
    written.push_back(path);
  };
  emit("traces.csv", [&](std::ostream& os) { write_traces_csv(os, result.traces); });
  emit("summary.csv", [&](std::ostream& os) { write_summary_csv(os, result.summary); });
  emit("thresholds.csv", [&](std::ostream& os) { write_thresholds_csv(os, result.summary); });
  emit("oracle.csv", [&](std::ostream& os) { write_oracle_csv(os, result.config_hash, result.saddle); });
  if (!result.bound.empty())
    emit("bound.csv", [&](std::ostream& os) { write_bound_csv(os, result.config_hash, result.bound); });
  return written;
}

}  // namespace apd
