#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "apd/model.hpp"

namespace apd {

/// 64-bit finalizer from splitmix64.
std::uint64_t mix64(std::uint64_t x);

/// Seed of the per-worker stream: mix64(master ^ mix64(worker + 1)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t worker);

/// Stream tag used for the random initial iterate.
inline constexpr std::uint64_t kInitStreamTag = 0xFFFF'FFFF'0000'0001ULL;

/// Gaussian sample source for one worker. Normals come from Box-Muller on
/// 53-bit uniforms taken from mt19937_64, so the sequence only depends on the
/// seed and the platform libm (no std::normal_distribution).
class SampleStream {
 public:
  SampleStream(std::uint64_t seed, Vec mean, double sd);

  /// Next draw mean + sd * N(0, I).
  Vec sample();
  double standard_normal();
  /// Uniform on [0, 1).
  double uniform();

  [[nodiscard]] std::uint64_t draws() const { return draws_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  Vec mean_;
  double sd_;
  bool has_spare_ = false;
  double spare_ = 0.0;
  std::uint64_t draws_ = 0;
};

/// One stream per worker, seeded by derive_seed(master, i).
std::vector<SampleStream> make_worker_streams(const ProblemSpec& spec, std::uint64_t master_seed);

/// grad of |theta - z|^2 with respect to theta: 2 (theta - z).
Vec stoch_grad_loss(std::span<const double> theta_i, std::span<const double> z);

/// Dual correction held in a worker inbox: s (J g(b_bar)) lambda as
/// broadcast by the server at iteration issued_at.
struct DelayedDualTerm {
  Vec payload;
  Iteration issued_at = 0;
  Tick deliver_at = 0;

  static DelayedDualTerm initial(std::size_t d) { return {Vec(d, 0.0), 0, 0}; }
};

/// G_i = grad l_i(theta_i; z) + inbox payload.
Vec delayed_primal_gradient(std::span<const double> theta_i, const DelayedDualTerm& inbox, std::span<const double> z);

/// G_lambda = g(b_bar) - upsilon lambda, b_bar the mean of the buffered models.
Vec dual_gradient(const ProblemSpec& spec, const std::vector<Vec>& buffer, std::span<const double> lambda);

}  // namespace apd
