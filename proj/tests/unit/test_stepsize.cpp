#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "apd/stepsize.hpp"

using namespace apd;

TEST_CASE("step-size rules") {
  const auto inv = StepSizeRule::inverse(10.0, 100.0);
  CHECK(inv(1) == doctest::Approx(10.0 / 101.0));
  CHECK(inv(900) == doctest::Approx(0.01));
  CHECK(inv(0) == inv(1));
  CHECK(inv(-5) == inv(1));
  for (int k = 1; k < 1000; ++k) CHECK(inv(k + 1) <= inv(k));
  CHECK(StepSizeRule::constant(0.3)(17) == 0.3);
  CHECK_THROWS_AS(StepSizeRule::constant(0.0).validate(), SpecError);
  CHECK_THROWS_AS(StepSizeRule::inverse(1.0, -1.0).validate(), SpecError);
  CHECK(inv.describe() == "10/(100+k)");
}

namespace {

struct BruteForce {
  bool sup_ok;
  bool ratio_ok;
  std::int64_t first_k = -1;
};

// Direct double loop over k <= horizon and l in [1, floor((k+1)/B)].
BruteForce brute_force(const StepSizeRule& rule, std::uint64_t p, std::uint64_t B, double mu, std::int64_t horizon) {
  BruteForce r{true, true};
  const double pmu = static_cast<double>(p) * mu;
  for (std::int64_t k = 1; k <= 100000; ++k) r.sup_ok = r.sup_ok && rule(k) <= 2.0 / pmu;
  const auto b = static_cast<std::int64_t>(B);
  for (std::int64_t k = 1; k <= horizon; ++k) {
    for (std::int64_t l = 1; l <= (k + 1) / b; ++l) {
      const double num = rule(k - (l + 1) * b + 2), den = rule(k - l * b + 2);
      if (num / den > 1.0 + 0.5 * pmu * den) {
        if (r.ratio_ok) r.first_k = k;
        r.ratio_ok = false;
      }
    }
  }
  return r;
}

}  // namespace

TEST_CASE("constant steps at and beyond the sup limit") {
  const double mu = 0.25;
  const std::uint64_t p = 2;
  const auto at_limit = check_stepsize_conditions(StepSizeRule::constant(2.0 / (p * mu)), p, 3, mu, 1000);
  CHECK(at_limit.pass());
  const auto over = check_stepsize_conditions(StepSizeRule::constant(3.0 / (p * mu)), p, 3, mu, 1000);
  CHECK_FALSE(over.sup_ok);
  CHECK(over.ratio_ok);
  CHECK(over.sup_limit == doctest::Approx(4.0));
  CHECK_THROWS_AS(check_stepsize_conditions(StepSizeRule::constant(1.0), 1, 1, 0.0, 10), SpecError);
}

TEST_CASE("ratio condition matches the brute-force double loop") {
  struct Case {
    StepSizeRule rule;
    std::uint64_t p, B;
    double mu;
  };
  const Case cases[] = {
      {StepSizeRule::inverse(10.0, 100.0), 1, 8, 1e-5},
      {StepSizeRule::inverse(10.0, 100.0), 1, 14, 1e-5},
      {StepSizeRule::inverse(10.0, 100.0), 2, 3, 1.0},
      {StepSizeRule::inverse(40.0, 10.0), 1, 5, 2.0},
      {StepSizeRule::inverse(4.0, 0.0), 1, 1, 1.0},
      {StepSizeRule::inverse(1.0, 50.0), 3, 2, 0.5},
      {StepSizeRule::constant(0.01), 1, 6, 1e-5},
  };
  for (const Case& c : cases) {
    const std::int64_t horizon = 3000;
    const auto report = check_stepsize_conditions(c.rule, c.p, c.B, c.mu, horizon);
    const auto ref = brute_force(c.rule, c.p, c.B, c.mu, horizon);
    CAPTURE(c.rule.describe());
    CAPTURE(c.B);
    CHECK(report.sup_ok == ref.sup_ok);
    CHECK(report.ratio_ok == ref.ratio_ok);
    if (!ref.ratio_ok) {
      REQUIRE(report.first_bad_k.has_value());
      CHECK(*report.first_bad_k == ref.first_k);
      CHECK(*report.first_bad_index == ref.first_k - *report.first_bad_window * static_cast<std::int64_t>(c.B) + 2);
    }
  }
}

TEST_CASE("inverse rule of the straggler scenario fails the ratio condition at tiny mu") {
  const auto rep = check_stepsize_conditions(StepSizeRule::inverse(10.0, 100.0), 1, 8, 1e-5, 10000);
  CHECK(rep.sup_ok);
  CHECK_FALSE(rep.ratio_ok);
  CHECK(*rep.first_bad_k == 8);
  CHECK(*rep.first_bad_index == 2);
  CHECK(rep.worst_ratio_excess > 0.0);
}

TEST_CASE("ratio constant is the smallest admissible b") {
  const auto rule = StepSizeRule::inverse(10.0, 100.0);
  const std::uint64_t B = 8, horizon = 2000;
  const double b = rule.ratio_constant(B, horizon);
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= horizon; ++s) {
    const double gs = rule(static_cast<std::int64_t>(s));
    const double gt = rule(static_cast<std::int64_t>(s + B - 1));
    CHECK(gs - gt <= b * b * gs * gs * (1.0 + 1e-12));
    worst = std::max(worst, (gs - gt) / (gs * gs));
  }
  CHECK(b * b == doctest::Approx(worst));
  // For a0/(a1 + k): (gamma_s - gamma_{s+B-1}) / gamma_s^2 = (B-1)(a1+s) / (a0 (a1+s+B-1)).
  CHECK(b * b == doctest::Approx((B - 1.0) * (100.0 + horizon) / (10.0 * (100.0 + horizon + B - 1.0))));
  CHECK(StepSizeRule::constant(0.1).ratio_constant(B, horizon) == 0.0);
}
