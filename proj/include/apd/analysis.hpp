#pragma once

#include <optional>
#include <string>
#include <vector>

#include "apd/model.hpp"
#include "apd/stepsize.hpp"

namespace apd {

struct SaddlePoint {
  std::vector<Vec> theta;
  Vec lambda;
  double residual = 0.0;  // KKT residual at (theta, lambda)
  std::string method;     // "closed-form" or "dual-ascent"
};

/// |theta - P_C[theta - grad_theta L]| + |lambda - P_Lambda[lambda + grad_lambda L]|.
double kkt_residual(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda);

/// Explicit solution for affine g with quadratic losses, available when the
/// unconstrained stationary point is feasible:
///   lambda* = (upsilon I + (s/2) A A^T)^{-1} (A z_bar - c),
///   theta_i* = z_bar_i - (s/2) A^T lambda*.
/// Also covers the inactive case lambda* = 0, theta_i* = z_bar_i.
std::optional<SaddlePoint> closed_form_saddle(const ProblemSpec& spec);

/// Iterative solve. For fixed lambda the primal problem is strongly convex
/// and is minimized by projected gradient; lambda is then moved along
/// g(theta_bar(lambda)) - upsilon lambda (bisection when m = 1). Throws
/// std::runtime_error if the KKT residual stays above `tolerance`.
SaddlePoint numerical_saddle(const ProblemSpec& spec, double tolerance, std::size_t max_outer = 200000);

/// Closed form when it applies, the iterative solve otherwise.
SaddlePoint saddle_oracle(const ProblemSpec& spec, double tolerance = 1e-10);

/// sum_i |theta_i - theta_i*|^2 + |lambda - lambda*|^2.
double error_metric(const std::vector<Vec>& theta, std::span<const double> lambda, const SaddlePoint& saddle);

struct BoundConstants {
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  double C4 = 0.0;
  double C = 0.0;  // B (n C1 + C2) + C3 + C4
  std::uint64_t p = 1;
  std::uint64_t B = 1;
  Iteration tau_bar = 0;
  double mu = 0.0;
  double b_sq = 0.0;       // smallest b^2 with gamma_s - gamma_{s+B-1} <= b^2 gamma_s^2
  double b_guidance = 0.0; // B / (a0 (a1 + 1)) for the inverse rule
  bool applicable = false; // step-size conditions verified
};

BoundConstants compute_bound_constants(const SmoothnessConstants& constants, std::uint64_t p, std::uint64_t B,
                                       Iteration tau_bar, const StepSizeRule& rule, Iteration horizon);
/// Same with b^2 given directly.
BoundConstants compute_bound_constants(const SmoothnessConstants& constants, std::uint64_t p, std::uint64_t B,
                                       Iteration tau_bar, double b_sq);

/// Right-hand side bounding E[Delta^{k+1}]:
///   prod_{i=1}^{q} (1 - p mu gamma_{k-iB+2}) Delta0 + (2 C / (p mu)) gamma_{k-B+2},
/// q = floor((k+1)/B), with gamma_j = gamma_1 for j <= 0.
double theorem_bound(Iteration k, double delta0, const BoundConstants& bc, const StepSizeRule& rule);

struct AuxLemmaReport {
  bool step_ok = false;        // gamma_1 < 2/a
  bool ratio_ok = false;       // gamma_{k-1}^p / gamma_k^p <= 1 + (a/2) gamma_k^p
  std::optional<Iteration> first_ratio_violation;
  double max_ratio = 0.0;      // max_k LHS_k / RHS_k over k = 2..horizon
  Iteration argmax = 0;
  std::optional<Iteration> first_exceed;  // first k with LHS_k > RHS_k
  [[nodiscard]] bool preconditions() const { return step_ok && ratio_ok; }
  [[nodiscard]] bool holds() const { return max_ratio <= 1.0; }
};

/// LHS_k = sum_{j=1}^{k} gamma_j^{p+1} prod_{l=j+1}^{k} (1 - gamma_l a) against
/// RHS_k = (2/a) gamma_k^p.
AuxLemmaReport aux_lemma_check(double a, unsigned p_exp, const StepSizeRule& rule, Iteration horizon);

}  // namespace apd
