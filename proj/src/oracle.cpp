#include "apd/oracle.hpp"

#include <cmath>
#include <numbers>

namespace apd {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t worker) { return mix64(master ^ mix64(worker + 1)); }

SampleStream::SampleStream(std::uint64_t seed, Vec mean, double sd)
    : seed_(seed), engine_(seed), mean_(std::move(mean)), sd_(sd) {}

double SampleStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SampleStream::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

Vec SampleStream::sample() {
  Vec z(mean_.size());
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = mean_[c] + sd_ * standard_normal();
  ++draws_;
  return z;
}

std::vector<SampleStream> make_worker_streams(const ProblemSpec& spec, std::uint64_t master_seed) {
  std::vector<SampleStream> streams;
  streams.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) streams.emplace_back(derive_seed(master_seed, i), spec.means[i], spec.noise_sd);
  return streams;
}

Vec stoch_grad_loss(std::span<const double> theta_i, std::span<const double> z) {
  if (theta_i.size() != z.size()) throw DimensionError("stoch_grad_loss: sample dimension mismatch");
  Vec g(z.size());
  for (std::size_t c = 0; c < g.size(); ++c) g[c] = 2.0 * (theta_i[c] - z[c]);
  return g;
}

Vec delayed_primal_gradient(std::span<const double> theta_i, const DelayedDualTerm& inbox, std::span<const double> z) {
  Vec g = stoch_grad_loss(theta_i, z);
  if (inbox.payload.size() != g.size()) throw DimensionError("delayed_primal_gradient: payload dimension mismatch");
  for (std::size_t c = 0; c < g.size(); ++c) g[c] += inbox.payload[c];
  return g;
}

Vec dual_gradient(const ProblemSpec& spec, const std::vector<Vec>& buffer, std::span<const double> lambda) {
  if (buffer.size() != spec.n) throw DimensionError("dual_gradient: buffer must have n slots");
  return dual_residual(spec, mean_decision(buffer), lambda);
}

}  // namespace apd
