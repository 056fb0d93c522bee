#include "apd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apd {

double kkt_residual(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda) {
  check_dimensions(spec, theta, lambda);
  double primal_sq = 0.0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Vec g = grad_primal(spec, theta, lambda, i);
    for (std::size_t c = 0; c < spec.d; ++c) {
      const double r = theta[i][c] - project_box(theta[i][c] - g[c], spec.boxes[i]);
      primal_sq += r * r;
    }
  }
  const Vec gl = grad_dual(spec, theta, lambda);
  double dual_sq = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    const double r = lambda[j] - project_box(lambda[j] + gl[j], spec.dual_box());
    dual_sq += r * r;
  }
  return std::sqrt(primal_sq) + std::sqrt(dual_sq);
}

namespace {

// Dense solve with partial pivoting; m is the number of constraints.
std::optional<Vec> solve_dense(std::vector<Vec> a, Vec b) {
  const std::size_t m = b.size();
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-300) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < m; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(m);
  for (std::size_t r = m; r-- > 0;) {
    double acc = b[r];
    for (std::size_t c = r + 1; c < m; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return x;
}

bool feasible(const ProblemSpec& spec, const std::vector<Vec>& theta, const Vec& lambda) {
  for (std::size_t i = 0; i < spec.n; ++i)
    for (double v : theta[i])
      if (!spec.boxes[i].contains(v)) return false;
  return std::all_of(lambda.begin(), lambda.end(), [&](double l) { return spec.dual_box().contains(l); });
}

// argmin_theta sum_i f_i(theta_i) + s n lambda^T g(theta_bar) over the boxes.
std::vector<Vec> primal_response(const ProblemSpec& spec, const Vec& lambda, std::vector<Vec> theta, double tol) {
  const Vec Lj = spec.constraint->smoothness();
  double curvature = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) curvature += lambda[j] * Lj[j];
  const double step = 1.0 / (2.0 + spec.coupling_scale() * curvature);
  for (int it = 0; it < 1000000; ++it) {
    double moved = 0.0;
    std::vector<Vec> next = theta;
    for (std::size_t i = 0; i < spec.n; ++i) {
      const Vec g = grad_primal(spec, theta, lambda, i);
      for (std::size_t c = 0; c < spec.d; ++c) {
        next[i][c] = project_box(theta[i][c] - step * g[c], spec.boxes[i]);
        moved = std::max(moved, std::abs(next[i][c] - theta[i][c]));
      }
    }
    theta = std::move(next);
    if (moved <= tol) break;
  }
  return theta;
}

}  // namespace

std::optional<SaddlePoint> closed_form_saddle(const ProblemSpec& spec) {
  spec.validate();
  const AffineConstraint* aff = spec.constraint->as_affine();
  if (!aff) return std::nullopt;
  const std::size_t m = spec.m(), d = spec.d;
  const double s = spec.coupling_scale();

  const Vec zbar = mean_decision(spec.means);
  const Vec gz = aff->value(zbar);

  auto finish = [&](Vec lambda) -> std::optional<SaddlePoint> {
    SaddlePoint sp;
    sp.theta.assign(spec.n, Vec(d));
    for (std::size_t i = 0; i < spec.n; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        double shift = 0.0;
        for (std::size_t j = 0; j < m; ++j) shift += aff->coeff(j, c) * lambda[j];
        sp.theta[i][c] = spec.means[i][c] - 0.5 * s * shift;
      }
    if (!feasible(spec, sp.theta, lambda)) return std::nullopt;
    sp.lambda = std::move(lambda);
    sp.residual = kkt_residual(spec, sp.theta, sp.lambda);
    sp.method = "closed-form";
    return sp;
  };

  if (std::all_of(gz.begin(), gz.end(), [](double v) { return v <= 0.0; })) return finish(Vec(m, 0.0));

  std::vector<Vec> system(m, Vec(m, 0.0));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t l = 0; l < m; ++l) {
      double aa = 0.0;
      for (std::size_t c = 0; c < d; ++c) aa += aff->coeff(j, c) * aff->coeff(l, c);
      system[j][l] = 0.5 * s * aa + (j == l ? spec.upsilon : 0.0);
    }
  auto lambda = solve_dense(std::move(system), gz);
  if (!lambda) return std::nullopt;
  return finish(std::move(*lambda));
}

SaddlePoint numerical_saddle(const ProblemSpec& spec, double tolerance, std::size_t max_outer) {
  spec.validate();
  if (!(tolerance > 0.0)) throw SpecError("saddle_oracle: tolerance must be positive");
  const std::size_t m = spec.m();
  const double inner_tol = tolerance * 1e-3;
  const Interval dual_box = spec.dual_box();

  std::vector<Vec> theta(spec.n, Vec(spec.d, 0.0));
  for (std::size_t i = 0; i < spec.n; ++i)
    for (std::size_t c = 0; c < spec.d; ++c) theta[i][c] = project_box(spec.means[i][c], spec.boxes[i]);

  auto dual_slope = [&](const Vec& lambda, std::vector<Vec>& th) {
    th = primal_response(spec, lambda, std::move(th), inner_tol);
    return dual_residual(spec, mean_decision(th), lambda);
  };

  Vec lambda(m, 0.0);
  if (m == 1) {
    // h(lambda) = g(theta_bar(lambda)) - upsilon lambda is decreasing.
    double lo = dual_box.lo, hi = dual_box.hi;
    std::vector<Vec> th = theta;
    if (dual_slope({lo}, th)[0] <= 0.0) {
      lambda[0] = lo;
    } else if (dual_slope({hi}, th)[0] >= 0.0) {
      lambda[0] = hi;
    } else {
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (dual_slope({mid}, th)[0] > 0.0 ? lo : hi) = mid;
      }
      lambda[0] = 0.5 * (lo + hi);
    }
  } else {
    std::vector<Interval> hull(spec.d);
    for (std::size_t c = 0; c < spec.d; ++c) {
      for (const Interval& b : spec.boxes) {
        hull[c].lo += b.lo / static_cast<double>(spec.n);
        hull[c].hi += b.hi / static_cast<double>(spec.n);
      }
    }
    double jac_sq = 0.0;
    for (const Interval& e : spec.constraint->jacobian_range(hull)) jac_sq += e.max_abs() * e.max_abs();
    const double step = 1.0 / (spec.upsilon + spec.coupling_scale() * jac_sq / 2.0);
    std::vector<Vec> th = theta;
    for (std::size_t it = 0; it < max_outer; ++it) {
      const Vec h = dual_slope(lambda, th);
      double moved = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double next = project_box(lambda[j] + step * h[j], dual_box);
        moved = std::max(moved, std::abs(next - lambda[j]));
        lambda[j] = next;
      }
      if (moved <= inner_tol) break;
    }
  }

  SaddlePoint sp;
  sp.theta = primal_response(spec, lambda, theta, inner_tol);
  sp.lambda = std::move(lambda);
  sp.residual = kkt_residual(spec, sp.theta, sp.lambda);
  sp.method = "dual-ascent";
  if (!(sp.residual <= tolerance))
    throw std::runtime_error("saddle_oracle: KKT residual " + std::to_string(sp.residual) + " above tolerance");
  return sp;
}

SaddlePoint saddle_oracle(const ProblemSpec& spec, double tolerance) {
  if (!(tolerance > 0.0)) throw SpecError("saddle_oracle: tolerance must be positive");
  if (auto cf = closed_form_saddle(spec); cf && cf->residual <= tolerance) return *cf;
  return numerical_saddle(spec, tolerance);
}

double error_metric(const std::vector<Vec>& theta, std::span<const double> lambda, const SaddlePoint& saddle) {
  if (theta.size() != saddle.theta.size() || lambda.size() != saddle.lambda.size())
    throw DimensionError("error_metric: iterate and saddle point differ in shape");
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) total += squared_distance(theta[i], saddle.theta[i]);
  return total + squared_distance(lambda, saddle.lambda);
}

// ---------------------------------------------------------------------------

BoundConstants compute_bound_constants(const SmoothnessConstants& k, std::uint64_t p, std::uint64_t B,
                                       Iteration tau_bar, double b_sq) {
  if (p == 0 || B == 0) throw SpecError("compute_bound_constants: p and B must be positive");
  BoundConstants bc;
  bc.p = p;
  bc.B = B;
  bc.tau_bar = tau_bar;
  bc.mu = k.mu;
  bc.b_sq = b_sq;

  const double n = static_cast<double>(k.n);
  const double D2 = k.D * k.D, M = k.M, D = k.D;
  const double Bd = static_cast<double>(B), pd = static_cast<double>(p);
  bc.C1 = 3.0 * (k.sigma_max_sq + (k.sigma_max_sq + k.L_max * k.L_max) * D2 + 6.0 * M * M * D2 / (n * n));
  bc.C2 = 2.0 * D2 * (M * M + 2.0 * k.upsilon * k.upsilon);
  bc.C3 = 2.0 * pd * (n + 1.0) * M * (b_sq * D + Bd * D * k.L + Bd * M);
  bc.C4 = 2.0 * pd * static_cast<double>(tau_bar) * D * M * (M + 1.0);
  bc.C = Bd * (n * bc.C1 + bc.C2) + bc.C3 + bc.C4;
  return bc;
}

BoundConstants compute_bound_constants(const SmoothnessConstants& k, std::uint64_t p, std::uint64_t B,
                                       Iteration tau_bar, const StepSizeRule& rule, Iteration horizon) {
  const double b = rule.ratio_constant(B, horizon);
  BoundConstants bc = compute_bound_constants(k, p, B, tau_bar, b * b);
  if (rule.kind == StepSizeRule::Kind::InverseIteration)
    bc.b_guidance = static_cast<double>(B) / (rule.a0 * (rule.a1 + 1.0));
  return bc;
}

double theorem_bound(Iteration k, double delta0, const BoundConstants& bc, const StepSizeRule& rule) {
  const auto kk = static_cast<std::int64_t>(k);
  const auto B = static_cast<std::int64_t>(bc.B);
  const double pmu = static_cast<double>(bc.p) * bc.mu;
  const std::int64_t q = (kk + 1) / B;
  double contraction = 1.0;
  for (std::int64_t i = 1; i <= q; ++i) contraction *= 1.0 - pmu * rule(kk - i * B + 2);
  return contraction * delta0 + (2.0 * bc.C / pmu) * rule(kk - B + 2);
}

AuxLemmaReport aux_lemma_check(double a, unsigned p_exp, const StepSizeRule& rule, Iteration horizon) {
  if (!(a > 0.0) || p_exp == 0) throw SpecError("aux_lemma_check: need a > 0 and p >= 1");
  AuxLemmaReport r;
  const double pe = static_cast<double>(p_exp);
  r.step_ok = rule(1) < 2.0 / a;
  r.ratio_ok = true;
  double lhs = std::pow(rule(1), pe + 1.0);
  for (Iteration k = 2; k <= horizon; ++k) {
    const double g = rule(static_cast<std::int64_t>(k));
    const double gprev = rule(static_cast<std::int64_t>(k) - 1);
    if (std::pow(gprev, pe) / std::pow(g, pe) > 1.0 + 0.5 * a * std::pow(g, pe) && r.ratio_ok) {
      r.ratio_ok = false;
      r.first_ratio_violation = k;
    }
    lhs = (1.0 - g * a) * lhs + std::pow(g, pe + 1.0);
    const double ratio = lhs / ((2.0 / a) * std::pow(g, pe));
    if (ratio > r.max_ratio) {
      r.max_ratio = ratio;
      r.argmax = k;
    }
    if (ratio > 1.0 && !r.first_exceed) r.first_exceed = k;
  }
  return r;
}

}  // namespace apd
