#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "apd/bench.hpp"

namespace apd {

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const std::string& p : parts) out += (out.empty() ? "" : "; ") + p;
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string value) {
  value = trim(value);
  if (!value.empty() && value.front() == '[') value.erase(0, 1);
  if (!value.empty() && value.back() == ']') value.pop_back();
  for (char& c : value)
    if (c == ',') c = ' ';
  std::istringstream is(value);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> to_u64(const std::string& s) {
  if (s.empty() || s.front() == '-' || s.front() == '+') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

std::optional<Tick> to_tick(const std::string& s) {
  if (s == "inf") return kNeverTick;
  return to_u64(s);
}

// Typed field readers that record problems instead of throwing.
class Reader {
 public:
  Reader(std::map<std::string, std::string> kv, std::vector<std::string>& errors)
      : kv_(std::move(kv)), errors_(errors) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  template <class T, class Conv>
  void scalar(const std::string& key, T& out, Conv conv, const char* what) {
    const auto it = take(key);
    if (!it) return;
    if (auto v = conv(*it))
      out = static_cast<T>(*v);
    else
      errors_.push_back(key + ": expected " + what + ", got '" + *it + "'");
  }

  template <class T, class Conv>
  void list(const std::string& key, std::vector<T>& out, Conv conv, const char* what) {
    const auto it = take(key);
    if (!it) return;
    out.clear();
    for (const std::string& tok : split_list(*it)) {
      if (auto v = conv(tok))
        out.push_back(static_cast<T>(*v));
      else
        errors_.push_back(key + ": expected a list of " + what + ", bad entry '" + tok + "'");
    }
  }

  std::optional<std::string> take(const std::string& key) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    std::string v = it->second;
    kv_.erase(it);
    return v;
  }

  void report_unknown() {
    for (const auto& [k, v] : kv_) errors_.push_back(k + ": unknown key");
  }

 private:
  std::map<std::string, std::string> kv_;
  std::vector<std::string>& errors_;
};

std::optional<bool> to_bool(const std::string& s) {
  if (s == "true" || s == "on" || s == "1") return true;
  if (s == "false" || s == "off" || s == "0") return false;
  return std::nullopt;
}

std::string list_text(const Vec& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out + "]";
}

template <class T>
std::string list_text(const std::vector<T>& v, std::function<std::string(const T&)> f) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + f(v[i]);
  return out + "]";
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> fields)
    : std::invalid_argument("invalid configuration: " + join(fields)), fields_(std::move(fields)) {}

ProblemSpec ExperimentConfig::problem() const {
  validate();
  ProblemSpec spec;
  spec.n = n;
  spec.d = dim;
  spec.noise_sd = noise_sd;
  spec.dual_max = dual_max;
  spec.upsilon = upsilon;
  spec.dual_scaling = dual_scaling;
  spec.means.assign(n, Vec(dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < dim; ++c) spec.means[i][c] = means.size() == n * dim ? means[i * dim + c] : means[i];
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = box_lo.size() == 1 ? box_lo[0] : box_lo[i];
    const double hi = box_hi.size() == 1 ? box_hi[0] : box_hi[i];
    spec.boxes.push_back({lo, hi});
  }
  if (constraint == "squared_norm") {
    spec.constraint = std::make_shared<SquaredNormConstraint>(dim, capacity[0]);
  } else {
    Vec coeffs = constraint_coeffs;
    if (coeffs.empty()) coeffs.assign(capacity.size() * dim, 1.0);
    spec.constraint = std::make_shared<AffineConstraint>(dim, std::move(coeffs), capacity);
  }
  return spec;
}

DelayModel ExperimentConfig::delays() const { return {compute_ticks, upload_delay, broadcast_delay}; }

void ExperimentConfig::validate() const {
  std::vector<std::string> e;
  if (n == 0) e.emplace_back("problem.n: must be at least 1");
  if (dim == 0) e.emplace_back("problem.dim: must be at least 1");
  if (n > 0 && dim > 0 && means.size() != n && means.size() != n * dim)
    e.push_back("problem.means: expected n or n*dim entries, got " + std::to_string(means.size()));
  if (!(noise_sd >= 0.0)) e.emplace_back("problem.noise_sd: must be non-negative");
  if (box_lo.size() != 1 && box_lo.size() != n) e.emplace_back("problem.box_lo: expected 1 or n entries");
  if (box_hi.size() != 1 && box_hi.size() != n) e.emplace_back("problem.box_hi: expected 1 or n entries");
  if (box_lo.size() == box_hi.size())
    for (std::size_t i = 0; i < box_lo.size(); ++i)
      if (!(box_lo[i] <= box_hi[i])) e.push_back("problem.box_lo: entry " + std::to_string(i + 1) + " exceeds box_hi");
  if (constraint != "capacity" && constraint != "squared_norm")
    e.push_back("problem.constraint: unknown kind '" + constraint + "'");
  if (capacity.empty()) e.emplace_back("problem.capacity: at least one value required");
  if (constraint == "squared_norm" && capacity.size() != 1)
    e.emplace_back("problem.capacity: squared_norm takes a single radius^2");
  if (!constraint_coeffs.empty() && constraint_coeffs.size() != capacity.size() * dim)
    e.emplace_back("problem.constraint_coeffs: expected m*dim entries");
  if (!(dual_max > 0.0)) e.emplace_back("problem.dual_max: must be positive");
  if (!(upsilon > 0.0)) e.emplace_back("problem.upsilon: must be positive");
  if (compute_ticks.size() != n)
    e.push_back("schedule.compute_ticks: expected n = " + std::to_string(n) + " entries, got " +
                std::to_string(compute_ticks.size()));
  for (Tick v : compute_ticks)
    if (v == 0) e.emplace_back("schedule.compute_ticks: entries must be >= 1 or inf");
  if (!(rule.a0 > 0.0)) e.emplace_back(rule.kind == StepSizeRule::Kind::Constant ? "stepsize.gamma: must be positive"
                                                                                : "stepsize.a0: must be positive");
  if (rule.kind == StepSizeRule::Kind::InverseIteration && !(rule.a1 > -1.0))
    e.emplace_back("stepsize.a1: must exceed -1");
  if (horizon == 0) e.emplace_back("run.horizon: must be at least 1");
  if (seeds.empty()) e.emplace_back("run.seeds: at least one seed required");
  if (checkpoint_stride == 0) e.emplace_back("run.checkpoint_stride: must be at least 1");
  if (algorithms.empty()) e.emplace_back("run.algorithms: at least one algorithm required");
  if (!(truncation > 0.0)) e.emplace_back("run.truncation: must be positive");
  if (!(oracle_tolerance > 0.0)) e.emplace_back("run.oracle_tolerance: must be positive");
  for (double t : thresholds)
    if (!(t > 0.0)) e.emplace_back("run.thresholds: entries must be positive");
  if (!e.empty()) throw ConfigError(std::move(e));
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::string> errors;
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) errors.push_back(key + ": given more than once");
  }

  ExperimentConfig c;
  c.box_lo.clear();
  c.box_hi.clear();
  Reader r(std::move(kv), errors);
  r.scalar("problem.n", c.n, to_u64, "a positive integer");
  r.scalar("problem.dim", c.dim, to_u64, "a positive integer");
  r.list("problem.means", c.means, to_double, "numbers");
  r.scalar("problem.noise_sd", c.noise_sd, to_double, "a number");
  if (auto v = r.take("problem.constraint")) c.constraint = *v;
  r.list("problem.capacity", c.capacity, to_double, "numbers");
  r.list("problem.constraint_coeffs", c.constraint_coeffs, to_double, "numbers");
  r.list("problem.box_lo", c.box_lo, to_double, "numbers");
  r.list("problem.box_hi", c.box_hi, to_double, "numbers");
  r.scalar("problem.dual_max", c.dual_max, to_double, "a number");
  r.scalar("problem.upsilon", c.upsilon, to_double, "a number");
  r.scalar("problem.dual_scaling", c.dual_scaling, to_bool, "true or false");

  r.list("schedule.compute_ticks", c.compute_ticks, to_tick, "positive integers or inf");
  r.scalar("schedule.upload_delay", c.upload_delay, to_u64, "a non-negative integer");
  r.scalar("schedule.broadcast_delay", c.broadcast_delay, to_u64, "a non-negative integer");

  const std::string kind = r.take("stepsize.kind").value_or("inverse");
  if (kind == "inverse") {
    c.rule.kind = StepSizeRule::Kind::InverseIteration;
    r.scalar("stepsize.a0", c.rule.a0, to_double, "a number");
    r.scalar("stepsize.a1", c.rule.a1, to_double, "a number");
    if (r.has("stepsize.gamma")) errors.emplace_back("stepsize.gamma: only valid with stepsize.kind = constant");
  } else if (kind == "constant") {
    c.rule.kind = StepSizeRule::Kind::Constant;
    r.scalar("stepsize.gamma", c.rule.a0, to_double, "a number");
    if (r.has("stepsize.a0") || r.has("stepsize.a1"))
      errors.emplace_back("stepsize.a0: only valid with stepsize.kind = inverse");
  } else {
    errors.push_back("stepsize.kind: expected inverse or constant, got '" + kind + "'");
  }

  r.scalar("run.horizon", c.horizon, to_u64, "a positive integer");
  if (r.has("run.seeds")) {
    r.list("run.seeds", c.seeds, to_u64, "unsigned integers");
    if (r.has("run.seed_count") || r.has("run.master_seed"))
      errors.emplace_back("run.seeds: give either a seed list or run.seed_count/run.master_seed");
  } else {
    std::uint64_t count = 0, master = 0;
    r.scalar("run.seed_count", count, to_u64, "an unsigned integer");
    r.scalar("run.master_seed", master, to_u64, "an unsigned integer");
    for (std::uint64_t j = 0; j < count; ++j) c.seeds.push_back(master + j);
  }
  r.scalar("run.checkpoint_stride", c.checkpoint_stride, to_u64, "a positive integer");
  if (auto v = r.take("run.algorithms")) {
    c.algorithms.clear();
    for (const std::string& tok : split_list(*v)) {
      if (auto a = parse_algorithm(tok))
        c.algorithms.push_back(*a);
      else
        errors.push_back("run.algorithms: unknown algorithm '" + tok + "'");
    }
  }
  if (auto v = r.take("run.init")) {
    if (auto m = parse_init_mode(*v))
      c.init = *m;
    else
      errors.push_back("run.init: expected zero or uniform, got '" + *v + "'");
  }
  r.scalar("run.truncation", c.truncation, to_double, "a number");
  r.list("run.thresholds", c.thresholds, to_double, "numbers");
  r.scalar("run.oracle_tolerance", c.oracle_tolerance, to_double, "a number");
  r.report_unknown();

  if (!errors.empty()) throw ConfigError(std::move(errors));
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"--config: cannot open '" + path.string() + "'"});
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  auto u64 = [](const std::uint64_t& v) { return std::to_string(v); };
  os << "problem.n = " << n << '\n'
     << "problem.dim = " << dim << '\n'
     << "problem.means = " << list_text(means) << '\n'
     << "problem.noise_sd = " << format_double(noise_sd) << '\n'
     << "problem.constraint = " << constraint << '\n'
     << "problem.capacity = " << list_text(capacity) << '\n';
  if (!constraint_coeffs.empty()) os << "problem.constraint_coeffs = " << list_text(constraint_coeffs) << '\n';
  os << "problem.box_lo = " << list_text(box_lo) << '\n'
     << "problem.box_hi = " << list_text(box_hi) << '\n'
     << "problem.dual_max = " << format_double(dual_max) << '\n'
     << "problem.upsilon = " << format_double(upsilon) << '\n'
     << "problem.dual_scaling = " << (dual_scaling ? "true" : "false") << '\n'
     << "schedule.compute_ticks = "
     << list_text<Tick>(compute_ticks, [](const Tick& t) { return t == kNeverTick ? std::string("inf") : std::to_string(t); })
     << '\n'
     << "schedule.upload_delay = " << upload_delay << '\n'
     << "schedule.broadcast_delay = " << broadcast_delay << '\n';
  if (rule.kind == StepSizeRule::Kind::Constant) {
    os << "stepsize.kind = constant\n"
       << "stepsize.gamma = " << format_double(rule.a0) << '\n';
  } else {
    os << "stepsize.kind = inverse\n"
       << "stepsize.a0 = " << format_double(rule.a0) << '\n'
       << "stepsize.a1 = " << format_double(rule.a1) << '\n';
  }
  os << "run.horizon = " << horizon << '\n'
     << "run.seeds = " << list_text<std::uint64_t>(seeds, u64) << '\n'
     << "run.checkpoint_stride = " << checkpoint_stride << '\n'
     << "run.algorithms = "
     << list_text<Algorithm>(algorithms, [](const Algorithm& a) { return std::string(to_string(a)); }) << '\n'
     << "run.init = " << to_string(init) << '\n'
     << "run.truncation = " << format_double(truncation) << '\n'
     << "run.thresholds = " << list_text(thresholds) << '\n'
     << "run.oracle_tolerance = " << format_double(oracle_tolerance) << '\n';
  return os.str();
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> scenario_names() { return {"fig2", "fig3"}; }

ExperimentConfig scenario_config(const std::string& name) {
  ExperimentConfig c;
  c.n = 5;
  c.dim = 1;
  c.means = {10, 10, 10, 12, 12};
  c.noise_sd = 2.0;
  c.capacity = {5.0};
  c.box_lo = {0, 0, 0, 0, 0};
  c.box_hi = {7, 7, 7, 10, 10};
  c.dual_max = 10.0;
  c.upsilon = 1e-5;
  c.dual_scaling = false;
  c.upload_delay = 2;
  c.broadcast_delay = 1;
  c.rule = StepSizeRule::inverse(10.0, 100.0);
  c.horizon = 20000;
  for (std::uint64_t s = 1; s <= 10; ++s) c.seeds.push_back(s);
  c.checkpoint_stride = 10;
  c.init = InitMode::Uniform;
  if (name == "fig2")
    c.compute_ticks = {4, 4, 3, 2, 1};
  else if (name == "fig3")
    c.compute_ticks = {10, 4, 3, 2, 1};
  else
    throw ConfigError({"scenario: unknown name '" + name + "' (expected fig2 or fig3)"});
  return c;
}

}  // namespace apd
