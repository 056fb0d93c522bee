#include "apd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace apd {

double Interval::max_abs() const { return std::max(std::abs(lo), std::abs(hi)); }

Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }

Interval operator*(Interval a, Interval b) {
  const double p[] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  return {*std::min_element(std::begin(p), std::end(p)), *std::max_element(std::begin(p), std::end(p))};
}

Interval operator*(double s, Interval a) {
  return s >= 0.0 ? Interval{s * a.lo, s * a.hi} : Interval{s * a.hi, s * a.lo};
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("squared_distance: size mismatch");
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

Vec Jacobian::apply(std::span<const double> lambda) const {
  if (lambda.size() != cols) throw DimensionError("Jacobian::apply: lambda has wrong length");
  Vec out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += at(r, c) * lambda[c];
  return out;
}

// ---------------------------------------------------------------------------
// AffineConstraint

AffineConstraint::AffineConstraint(std::size_t dim, Vec coeffs, Vec offsets)
    : dim_(dim), coeffs_(std::move(coeffs)), offsets_(std::move(offsets)) {
  if (dim_ == 0 || offsets_.empty() || coeffs_.size() != dim_ * offsets_.size())
    throw SpecError("AffineConstraint: coefficient matrix must be m x d with m, d > 0");
}

std::shared_ptr<const AffineConstraint> AffineConstraint::capacity(std::size_t dim, double capacity) {
  return std::make_shared<const AffineConstraint>(dim, Vec(dim, 1.0), Vec{capacity});
}

Vec AffineConstraint::value(std::span<const double> avg) const {
  if (avg.size() != dim_) throw DimensionError("AffineConstraint::value: wrong input dimension");
  Vec g(count());
  for (std::size_t j = 0; j < count(); ++j) {
    double s = -offsets_[j];
    for (std::size_t c = 0; c < dim_; ++c) s += coeff(j, c) * avg[c];
    g[j] = s;
  }
  return g;
}

Jacobian AffineConstraint::jacobian(std::span<const double> avg) const {
  if (avg.size() != dim_) throw DimensionError("AffineConstraint::jacobian: wrong input dimension");
  Jacobian J{dim_, count(), Vec(dim_ * count())};
  for (std::size_t c = 0; c < dim_; ++c)
    for (std::size_t j = 0; j < count(); ++j) J.at(c, j) = coeff(j, c);
  return J;
}

std::vector<Interval> AffineConstraint::value_range(std::span<const Interval> hull) const {
  std::vector<Interval> out(count());
  for (std::size_t j = 0; j < count(); ++j) {
    Interval acc{-offsets_[j], -offsets_[j]};
    for (std::size_t c = 0; c < dim_; ++c) acc = acc + coeff(j, c) * hull[c];
    out[j] = acc;
  }
  return out;
}

std::vector<Interval> AffineConstraint::jacobian_range(std::span<const Interval>) const {
  std::vector<Interval> out(dim_ * count());
  for (std::size_t c = 0; c < dim_; ++c)
    for (std::size_t j = 0; j < count(); ++j) out[c * count() + j] = {coeff(j, c), coeff(j, c)};
  return out;
}

std::string AffineConstraint::describe() const {
  std::ostringstream os;
  os << "affine(m=" << count() << ", d=" << dim_ << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// SquaredNormConstraint

SquaredNormConstraint::SquaredNormConstraint(std::size_t dim, double radius_sq) : dim_(dim), radius_sq_(radius_sq) {
  if (dim_ == 0) throw SpecError("SquaredNormConstraint: dimension must be positive");
}

Vec SquaredNormConstraint::value(std::span<const double> avg) const {
  if (avg.size() != dim_) throw DimensionError("SquaredNormConstraint::value: wrong input dimension");
  return {0.5 * dot(avg, avg) - radius_sq_};
}

Jacobian SquaredNormConstraint::jacobian(std::span<const double> avg) const {
  if (avg.size() != dim_) throw DimensionError("SquaredNormConstraint::jacobian: wrong input dimension");
  return Jacobian{dim_, 1, Vec(avg.begin(), avg.end())};
}

std::vector<Interval> SquaredNormConstraint::value_range(std::span<const Interval> hull) const {
  Interval acc{-radius_sq_, -radius_sq_};
  for (const Interval& h : hull) {
    const double lo_sq = (h.lo <= 0.0 && h.hi >= 0.0) ? 0.0 : std::min(h.lo * h.lo, h.hi * h.hi);
    acc = acc + Interval{0.5 * lo_sq, 0.5 * std::max(h.lo * h.lo, h.hi * h.hi)};
  }
  return {acc};
}

std::vector<Interval> SquaredNormConstraint::jacobian_range(std::span<const Interval> hull) const {
  return {hull.begin(), hull.end()};
}

std::string SquaredNormConstraint::describe() const {
  std::ostringstream os;
  os << "squared_norm(d=" << dim_ << ", r2=" << radius_sq_ << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// ProblemSpec

void ProblemSpec::validate() const {
  if (n == 0) throw SpecError("problem: n must be positive");
  if (d == 0) throw SpecError("problem: d must be positive");
  if (!constraint) throw SpecError("problem: constraint map missing");
  if (constraint->input_dim() != d) throw SpecError("problem: constraint input dimension differs from d");
  if (constraint->count() == 0) throw SpecError("problem: m must be positive");
  if (means.size() != n) throw SpecError("problem: means must have n entries");
  for (const Vec& mean : means)
    if (mean.size() != d) throw SpecError("problem: every mean must have d coordinates");
  if (boxes.size() != n) throw SpecError("problem: boxes must have n entries");
  for (const Interval& b : boxes) {
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi)) throw SpecError("problem: boxes must be bounded");
    if (b.lo > b.hi) throw SpecError("problem: box with lo > hi");
  }
  if (!(noise_sd >= 0.0)) throw SpecError("problem: noise_sd must be >= 0");
  if (!(dual_max > 0.0) || !std::isfinite(dual_max)) throw SpecError("problem: dual_max must be positive and finite");
  if (!(upsilon > 0.0)) throw SpecError("problem: upsilon must be positive");
}

ProblemSpec ProblemSpec::resource_allocation_example(bool dual_scaling) {
  ProblemSpec spec;
  spec.n = 5;
  spec.d = 1;
  spec.means = {{10.0}, {10.0}, {10.0}, {12.0}, {12.0}};
  spec.noise_sd = 2.0;
  spec.boxes = {{0.0, 7.0}, {0.0, 7.0}, {0.0, 7.0}, {0.0, 10.0}, {0.0, 10.0}};
  spec.dual_max = 10.0;
  spec.upsilon = 1e-5;
  spec.dual_scaling = dual_scaling;
  spec.constraint = AffineConstraint::capacity(1, 5.0);
  return spec;
}

// ---------------------------------------------------------------------------
// Gradients

Vec mean_decision(const std::vector<Vec>& theta) {
  if (theta.empty()) throw DimensionError("mean_decision: no workers");
  Vec avg(theta.front().size(), 0.0);
  for (const Vec& t : theta) {
    if (t.size() != avg.size()) throw DimensionError("mean_decision: ragged decisions");
    for (std::size_t c = 0; c < avg.size(); ++c) avg[c] += t[c];
  }
  for (double& a : avg) a /= static_cast<double>(theta.size());
  return avg;
}

void check_dimensions(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda) {
  if (theta.size() != spec.n) throw DimensionError("theta must have n blocks");
  for (const Vec& t : theta)
    if (t.size() != spec.d) throw DimensionError("every theta block must have d coordinates");
  if (lambda.size() != spec.m()) throw DimensionError("lambda must have m entries");
}

double eval_expected_loss(const ProblemSpec& spec, std::size_t i, std::span<const double> theta_i) {
  return squared_distance(theta_i, spec.means.at(i));
}

Vec grad_expected_loss(const ProblemSpec& spec, std::size_t i, std::span<const double> theta_i) {
  const Vec& mean = spec.means.at(i);
  if (theta_i.size() != mean.size()) throw DimensionError("grad_expected_loss: wrong dimension");
  Vec g(theta_i.size());
  for (std::size_t c = 0; c < g.size(); ++c) g[c] = 2.0 * (theta_i[c] - mean[c]);
  return g;
}

Vec dual_coupling(const ProblemSpec& spec, std::span<const double> avg, std::span<const double> lambda) {
  Vec term = spec.constraint->jacobian(avg).apply(lambda);
  const double s = spec.coupling_scale();
  for (double& t : term) t *= s;
  return term;
}

Vec grad_primal(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda, std::size_t i) {
  check_dimensions(spec, theta, lambda);
  if (i >= spec.n) throw DimensionError("grad_primal: worker index out of range");
  Vec g = grad_expected_loss(spec, i, theta[i]);
  const Vec coupling = dual_coupling(spec, mean_decision(theta), lambda);
  for (std::size_t c = 0; c < g.size(); ++c) g[c] += coupling[c];
  return g;
}

Vec dual_residual(const ProblemSpec& spec, std::span<const double> avg, std::span<const double> lambda) {
  Vec g = spec.constraint->value(avg);
  if (lambda.size() != g.size()) throw DimensionError("dual_residual: lambda has wrong length");
  for (std::size_t j = 0; j < g.size(); ++j) g[j] -= spec.upsilon * lambda[j];
  return g;
}

Vec grad_dual(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda) {
  check_dimensions(spec, theta, lambda);
  return dual_residual(spec, mean_decision(theta), lambda);
}

double lagrangian(const ProblemSpec& spec, const std::vector<Vec>& theta, std::span<const double> lambda) {
  check_dimensions(spec, theta, lambda);
  double total = 0.0;
  for (std::size_t i = 0; i < spec.n; ++i) total += eval_expected_loss(spec, i, theta[i]);
  total += dot(lambda, spec.constraint->value(mean_decision(theta)));
  total -= 0.5 * spec.upsilon * dot(lambda, lambda);
  return total;
}

double project_box(double x, Interval box) { return std::clamp(x, box.lo, box.hi); }

Vec project_box(std::span<const double> x, Interval box) {
  Vec out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [box](double v) { return project_box(v, box); });
  return out;
}

Vec flatten(const Iterate& w) {
  Vec flat;
  for (const Vec& t : w.theta) flat.insert(flat.end(), t.begin(), t.end());
  flat.insert(flat.end(), w.lambda.begin(), w.lambda.end());
  return flat;
}

Iterate unflatten(const ProblemSpec& spec, std::span<const double> flat) {
  if (flat.size() != spec.n * spec.d + spec.m()) throw DimensionError("unflatten: wrong length");
  Iterate w;
  w.theta.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) w.theta[i].assign(flat.begin() + i * spec.d, flat.begin() + (i + 1) * spec.d);
  w.lambda.assign(flat.begin() + spec.n * spec.d, flat.end());
  return w;
}

Vec gradient_map(const ProblemSpec& spec, const Iterate& w) {
  check_dimensions(spec, w.theta, w.lambda);
  const Vec avg = mean_decision(w.theta);
  const Vec coupling = dual_coupling(spec, avg, w.lambda);
  Vec out;
  out.reserve(spec.n * spec.d + spec.m());
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Vec gi = grad_expected_loss(spec, i, w.theta[i]);
    for (std::size_t c = 0; c < spec.d; ++c) out.push_back(gi[c] + coupling[c]);
  }
  for (double r : dual_residual(spec, avg, w.lambda)) out.push_back(-r);
  return out;
}

// ---------------------------------------------------------------------------
// Constants

double composite_lipschitz(double L_max, double M, double D, double L_g, double upsilon) {
  const double a = L_max + M + D * L_g;
  const double b = M + upsilon;
  return std::sqrt(a * a + b * b);
}

SmoothnessConstants compute_constants(const ProblemSpec& spec, double truncation) {
  spec.validate();
  if (!(truncation > 0.0)) throw SpecError("compute_constants: truncation must be positive");

  const std::size_t n = spec.n, d = spec.d, m = spec.m();
  const double s = spec.coupling_scale();
  const Interval dual_range = spec.dual_box();

  SmoothnessConstants k;
  k.n = n;
  k.upsilon = spec.upsilon;
  // Hessian of |theta - z|^2 is 2 I.
  k.mu_i.assign(n, 2.0);
  k.L_i.assign(n, 2.0);
  k.L_j = spec.constraint->smoothness();
  k.sigma_sq.assign(n, 4.0 * spec.noise_sd * spec.noise_sd * static_cast<double>(d));
  k.sigma_max_sq = *std::max_element(k.sigma_sq.begin(), k.sigma_sq.end());
  k.L_max = *std::max_element(k.L_i.begin(), k.L_i.end());
  k.L_g = std::sqrt(std::inner_product(k.L_j.begin(), k.L_j.end(), k.L_j.begin(), 0.0));
  k.mu = std::min(spec.upsilon, *std::min_element(k.mu_i.begin(), k.mu_i.end()));

  double primal_sq = 0.0;
  for (const Interval& b : spec.boxes) primal_sq += static_cast<double>(d) * b.width() * b.width();
  const double dual_diam = std::sqrt(static_cast<double>(m)) * spec.dual_max;
  k.D = std::max(std::sqrt(primal_sq), dual_diam);

  // theta_bar ranges over [mean lo, mean hi] in every coordinate.
  Interval avg{0.0, 0.0};
  for (const Interval& b : spec.boxes) avg = avg + b;
  avg = (1.0 / static_cast<double>(n)) * avg;
  const std::vector<Interval> hull(d, avg);
  const std::vector<Interval> jac = spec.constraint->jacobian_range(hull);
  const std::vector<Interval> gval = spec.constraint->value_range(hull);

  double M = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += jac[c * m + j].max_abs() * jac[c * m + j].max_abs();
    M = std::max(M, std::sqrt(sq));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double z = spec.means[i][c];
      const double half = truncation * spec.noise_sd;
      Interval g = 2.0 * (spec.boxes[i] + Interval{-z - half, -z + half});
      for (std::size_t j = 0; j < m; ++j) g = g + s * (jac[c * m + j] * dual_range);
      sq += g.max_abs() * g.max_abs();
    }
    M = std::max(M, std::sqrt(sq));
  }
  double dual_sq = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const Interval r = gval[j] + (-spec.upsilon) * dual_range;
    dual_sq += r.max_abs() * r.max_abs();
  }
  k.M = std::max(M, std::sqrt(dual_sq));
  k.L = composite_lipschitz(k.L_max, k.M, k.D, k.L_g, spec.upsilon);
  return k;
}

}  // namespace apd
