#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "apd/oracle.hpp"
#include "support.hpp"

using namespace apd;

TEST_CASE("seed derivation separates workers and masters") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t master = 0; master < 20; ++master)
    for (std::uint64_t i = 0; i < 20; ++i) seen.insert(derive_seed(master, i));
  CHECK(seen.size() == 400);
  CHECK(derive_seed(5, 2) == mix64(5 ^ mix64(3)));
}

TEST_CASE("streams are reproducible and seed dependent") {
  SampleStream a(42, {1.0, 2.0}, 3.0), b(42, {1.0, 2.0}, 3.0), c(43, {1.0, 2.0}, 3.0);
  for (int t = 0; t < 100; ++t) {
    const Vec za = a.sample();
    CHECK(za == b.sample());
    if (t == 0) CHECK(za != c.sample());
  }
  CHECK(a.draws() == 100);
  CHECK(a.seed() == 42);
}

TEST_CASE("uniforms lie in [0, 1) and normals have unit moments") {
  SampleStream s(7, {0.0}, 1.0);
  const int N = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < N; ++t) {
    const double u = s.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
  for (int t = 0; t < N; ++t) {
    const double z = s.standard_normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / N, var = sum_sq / N - mean * mean;
  CHECK(std::abs(mean) <= 5.0 / std::sqrt(N));
  CHECK(std::abs(var - 1.0) <= 5.0 * std::sqrt(2.0 / N));
}

TEST_CASE("worker streams use the derived seeds") {
  const ProblemSpec spec = ProblemSpec::resource_allocation_example(true);
  auto streams = make_worker_streams(spec, 99);
  REQUIRE(streams.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(streams[i].seed() == derive_seed(99, i));
    SampleStream ref(derive_seed(99, i), spec.means[i], spec.noise_sd);
    CHECK(streams[i].sample() == ref.sample());
  }
}

TEST_CASE("stochastic gradient is unbiased with variance 4 sigma^2 d") {
  const ProblemSpec spec = apd::testing::squared_norm_example();
  const SmoothnessConstants k = compute_constants(spec);
  const Vec theta{0.5, -1.0};
  const Vec exact = grad_expected_loss(spec, 1, theta);
  SampleStream s(1234, spec.means[1], spec.noise_sd);
  const int N = 200000;
  Vec sum(2, 0.0);
  double dev_sq = 0.0;
  for (int t = 0; t < N; ++t) {
    const Vec g = stoch_grad_loss(theta, s.sample());
    for (int c = 0; c < 2; ++c) sum[c] += g[c];
    dev_sq += squared_distance(g, exact);
  }
  const double sigma_sq = 4.0 * spec.noise_sd * spec.noise_sd;  // per coordinate
  for (int c = 0; c < 2; ++c) CHECK(std::abs(sum[c] / N - exact[c]) <= 5.0 * std::sqrt(sigma_sq / N));
  const double var = dev_sq / N;
  // Sum of d scaled chi-square(1): standard error sigma^2 sqrt(2 d / N).
  const double se = sigma_sq * std::sqrt(2.0 * 2.0 / N);
  CHECK(std::abs(var - k.sigma_sq[1]) <= 5.0 * se);
  CHECK(var <= k.sigma_sq[1] + 5.0 * se);
}

TEST_CASE("delayed primal gradient adds the inbox payload") {
  DelayedDualTerm inbox{{0.5, -1.0}, 3, 7};
  const Vec g = delayed_primal_gradient(Vec{1.0, 2.0}, inbox, Vec{0.0, 0.0});
  CHECK(g[0] == doctest::Approx(2.5));
  CHECK(g[1] == doctest::Approx(3.0));
  CHECK(DelayedDualTerm::initial(3).payload == Vec(3, 0.0));
  CHECK_THROWS_AS(delayed_primal_gradient(Vec{1.0}, inbox, Vec{0.0}), DimensionError);
  CHECK_THROWS_AS(stoch_grad_loss(Vec{1.0}, Vec{0.0, 1.0}), DimensionError);
}

TEST_CASE("dual gradient uses the buffered average") {
  const ProblemSpec spec = ProblemSpec::resource_allocation_example(true);
  const std::vector<Vec> buffer{{1.0}, {2.0}, {3.0}, {4.0}, {5.0}};
  const Vec g = dual_gradient(spec, buffer, Vec{2.0});
  CHECK(g[0] == doctest::Approx(3.0 - 5.0 - 1e-5 * 2.0));
  CHECK_THROWS_AS(dual_gradient(spec, std::vector<Vec>(4, Vec{1.0}), Vec{0.0}), DimensionError);
}
