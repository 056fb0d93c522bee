#include "apd/stepsize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace apd {

double StepSizeRule::operator()(std::int64_t k) const {
  if (k < 1) k = 1;
  switch (kind) {
    case Kind::Constant:
      return a0;
    case Kind::InverseIteration:
      return a0 / (a1 + static_cast<double>(k));
  }
  return a0;
}

std::string StepSizeRule::describe() const {
  std::ostringstream os;
  if (kind == Kind::Constant)
    os << "constant(" << a0 << ")";
  else
    os << a0 << "/(" << a1 << "+k)";
  return os.str();
}

void StepSizeRule::validate() const {
  if (!(a0 > 0.0) || !std::isfinite(a0)) throw SpecError("stepsize: a0 must be positive and finite");
  if (kind == Kind::InverseIteration && !(a1 + 1.0 > 0.0)) throw SpecError("stepsize: a1 must exceed -1");
}

double StepSizeRule::ratio_constant(std::uint64_t B, std::uint64_t horizon) const {
  if (kind == Kind::Constant || B <= 1) return 0.0;
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= horizon; ++s) {
    const double head = (*this)(static_cast<std::int64_t>(s));
    const double tail = (*this)(static_cast<std::int64_t>(s + B - 1));
    worst = std::max(worst, (head - tail) / (head * head));
  }
  return std::sqrt(worst);
}

StepsizeReport check_stepsize_conditions(const StepSizeRule& rule, std::uint64_t p, std::uint64_t B, double mu,
                                         std::uint64_t horizon) {
  StepsizeReport report;
  if (p == 0 || B == 0 || !(mu > 0.0)) throw SpecError("check_stepsize_conditions: need p, B >= 1 and mu > 0");
  const double pmu = static_cast<double>(p) * mu;
  report.sup_limit = 2.0 / pmu;
  // Non-increasing, so the supremum is gamma_1.
  report.sup_gamma = rule(1);
  report.sup_ok = report.sup_gamma <= report.sup_limit;

  // The ratio condition depends on (k, l) only through j = k - lB + 2, and
  // every j >= 1 is reached first at k = j - 2 + lB with the smallest l >= 1
  // giving k >= 1.
  const auto b = static_cast<std::int64_t>(B);
  const auto h = static_cast<std::int64_t>(horizon);
  report.ratio_ok = true;
  report.worst_ratio_excess = -INFINITY;
  for (std::int64_t j = 1;; ++j) {
    std::int64_t l = 1;
    while (j - 2 + l * b < 1) ++l;
    const std::int64_t k = j - 2 + l * b;
    if (k > h) break;
    const double gj = rule(j);
    const double lhs = rule(j - b) / gj;
    const double rhs = 1.0 + 0.5 * pmu * gj;
    report.worst_ratio_excess = std::max(report.worst_ratio_excess, lhs - rhs);
    if (lhs > rhs && report.ratio_ok) {
      report.ratio_ok = false;
      report.first_bad_index = j;
      report.first_bad_k = k;
      report.first_bad_window = l;
    }
  }
  if (report.worst_ratio_excess == -INFINITY) report.worst_ratio_excess = 0.0;
  return report;
}

}  // namespace apd
