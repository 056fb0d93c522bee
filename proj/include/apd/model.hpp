#pragma once

// Resource-allocation problem with coupled constraints on the averaged
// decision, its Tikhonov-regularized Lagrangian
//
//   L(theta, lambda) = sum_i f_i(theta_i) + lambda^T g(theta_bar) - (upsilon/2) |lambda|^2,
//
// exact gradients, box projections and the smoothness/monotonicity
// constants of the primal-dual gradient map.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apd/types.hpp"

namespace apd {

/// Row-major d x m matrix; column j is the gradient of g_j.
struct Jacobian {
  std::size_t rows = 0;  // d
  std::size_t cols = 0;  // m
  Vec data;

  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  /// J * lambda, a d-vector.
  [[nodiscard]] Vec apply(std::span<const double> lambda) const;
};

/// Coupling constraint map g: R^d -> R^m evaluated at the averaged decision.
/// Each component must be convex for the saddle point to be unique.
class ConstraintMap {
 public:
  virtual ~ConstraintMap() = default;

  [[nodiscard]] virtual std::size_t input_dim() const = 0;
  [[nodiscard]] virtual std::size_t count() const = 0;
  [[nodiscard]] virtual Vec value(std::span<const double> avg) const = 0;
  [[nodiscard]] virtual Jacobian jacobian(std::span<const double> avg) const = 0;
  /// Per-component smoothness L_j.
  [[nodiscard]] virtual Vec smoothness() const = 0;
  /// Range of each g_j over the box prod_c [lo_c, hi_c].
  [[nodiscard]] virtual std::vector<Interval> value_range(std::span<const Interval> hull) const = 0;
  /// Entry-wise range of the Jacobian over the same box, row-major d x m.
  [[nodiscard]] virtual std::vector<Interval> jacobian_range(std::span<const Interval> hull) const = 0;
  [[nodiscard]] virtual std::string describe() const = 0;

  /// Non-null when g(x) = A x - c.
  [[nodiscard]] virtual const class AffineConstraint* as_affine() const { return nullptr; }
};

/// g_j(x) = <a_j, x> - c_j.
class AffineConstraint final : public ConstraintMap {
 public:
  /// coeffs is row-major m x d, offsets has length m.
  AffineConstraint(std::size_t dim, Vec coeffs, Vec offsets);

  /// Single constraint sum_c x_c - capacity (d = 1 gives x - capacity).
  static std::shared_ptr<const AffineConstraint> capacity(std::size_t dim, double capacity);

  [[nodiscard]] std::size_t input_dim() const override { return dim_; }
  [[nodiscard]] std::size_t count() const override { return offsets_.size(); }
  [[nodiscard]] Vec value(std::span<const double> avg) const override;
  [[nodiscard]] Jacobian jacobian(std::span<const double> avg) const override;
  [[nodiscard]] Vec smoothness() const override { return Vec(count(), 0.0); }
  [[nodiscard]] std::vector<Interval> value_range(std::span<const Interval> hull) const override;
  [[nodiscard]] std::vector<Interval> jacobian_range(std::span<const Interval> hull) const override;
  [[nodiscard]] std::string describe() const override;
  [[nodiscard]] const AffineConstraint* as_affine() const override { return this; }

  [[nodiscard]] double coeff(std::size_t j, std::size_t c) const { return coeffs_[j * dim_ + c]; }
  [[nodiscard]] double offset(std::size_t j) const { return offsets_[j]; }

 private:
  std::size_t dim_;
  Vec coeffs_;
  Vec offsets_;
};

/// g(x) = 0.5 |x|^2 - radius_sq. Convex and 1-smooth; used to exercise the
/// non-affine code paths.
class SquaredNormConstraint final : public ConstraintMap {
 public:
  SquaredNormConstraint(std::size_t dim, double radius_sq);

  [[nodiscard]] std::size_t input_dim() const override { return dim_; }
  [[nodiscard]] std::size_t count() const override { return 1; }
  [[nodiscard]] Vec value(std::span<const double> avg) const override;
  [[nodiscard]] Jacobian jacobian(std::span<const double> avg) const override;
  [[nodiscard]] Vec smoothness() const override { return {1.0}; }
  [[nodiscard]] std::vector<Interval> value_range(std::span<const Interval> hull) const override;
  [[nodiscard]] std::vector<Interval> jacobian_range(std::span<const Interval> hull) const override;
  [[nodiscard]] std::string describe() const override;

 private:
  std::size_t dim_;
  double radius_sq_;
};

/// Problem instance. The local loss is l_i(theta; z) = |theta - z|^2 with
/// z ~ N(mean_i, noise_sd^2 I).
struct ProblemSpec {
  std::size_t n = 0;
  std::size_t d = 1;
  std::vector<Vec> means;       // n entries of length d
  double noise_sd = 0.0;
  std::vector<Interval> boxes;  // per worker, applied to every coordinate
  double dual_max = 0.0;        // Lambda = [0, dual_max]^m
  double upsilon = 0.0;
  /// On: the worker coupling term carries the 1/n factor.
  bool dual_scaling = true;
  std::shared_ptr<const ConstraintMap> constraint;

  [[nodiscard]] std::size_t m() const { return constraint ? constraint->count() : 0; }
  [[nodiscard]] double coupling_scale() const { return dual_scaling ? 1.0 / static_cast<double>(n) : 1.0; }
  [[nodiscard]] Interval dual_box() const { return {0.0, dual_max}; }
  /// Throws SpecError listing the first violated invariant.
  void validate() const;

  /// n = 5 workers, means 10,10,10,12,12, sigma = 2, g = theta_bar - 5,
  /// boxes [0,7]x3 and [0,10]x2, Lambda = [0,10], upsilon = 1e-5.
  static ProblemSpec resource_allocation_example(bool dual_scaling);
};

/// Joint primal-dual point.
struct Iterate {
  std::vector<Vec> theta;  // n x d
  Vec lambda;              // m
};

Vec mean_decision(const std::vector<Vec>& theta);

void check_dimensions(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda);

/// (theta_i - mean_i)^2 summed over coordinates; the additive sigma^2 of
/// E[(theta - Z)^2] is dropped.
double eval_expected_loss(const ProblemSpec& spec, std::size_t i, std::span<const double> theta_i);

Vec grad_expected_loss(const ProblemSpec& spec, std::size_t i, std::span<const double> theta_i);

/// s * (J g(avg)) lambda with s = coupling_scale().
Vec dual_coupling(const ProblemSpec& spec, std::span<const double> avg, std::span<const double> lambda);

Vec grad_primal(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda, std::size_t i);

/// g(avg) - upsilon * lambda.
Vec dual_residual(const ProblemSpec& spec, std::span<const double> avg, std::span<const double> lambda);

Vec grad_dual(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda);

/// Regularized Lagrangian with expected losses.
double lagrangian(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda);

double project_box(double x, Interval box);
Vec project_box(std::span<const double> x, Interval box);

Vec flatten(const Iterate& w);
Iterate unflatten(const ProblemSpec& spec, std::span<const double> flat);

/// Stacked (grad_theta L, -grad_lambda L), length n*d + m.
Vec gradient_map(const ProblemSpec& spec, const Iterate& w);

struct SmoothnessConstants {
  std::size_t n = 0;
  double upsilon = 0.0;
  Vec mu_i;
  Vec L_i;
  Vec L_j;
  Vec sigma_sq;  // sigma_i^2
  double sigma_max_sq = 0.0;
  double M = 0.0;
  double D = 0.0;
  double L_max = 0.0;
  double L_g = 0.0;
  double mu = 0.0;
  double L = 0.0;
};

/// D is the larger of the joint primal and the dual diameters. M bounds the
/// constraint gradients and the sampled primal/dual gradient norms over the
/// boxes, with samples restricted to mean +- truncation * sigma.
SmoothnessConstants compute_constants(const ProblemSpec& spec, double truncation = 6.0);

/// L = sqrt((L_max + M + D L_g)^2 + (M + upsilon)^2).
double composite_lipschitz(double L_max, double M, double D, double L_g, double upsilon);

}  // namespace apd
