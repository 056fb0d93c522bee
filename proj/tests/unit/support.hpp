#pragma once

#include <random>

#include "apd/model.hpp"

namespace apd::testing {

inline ProblemSpec widened_example(bool dual_scaling, double dual_max = 100.0) {
  ProblemSpec spec = ProblemSpec::resource_allocation_example(dual_scaling);
  spec.dual_max = dual_max;
  return spec;
}

/// Two workers in R^2 with a 0.5|x|^2 - r^2 constraint.
inline ProblemSpec squared_norm_example(double radius_sq = 2.0) {
  ProblemSpec spec;
  spec.n = 2;
  spec.d = 2;
  spec.means = {{3.0, 1.0}, {2.0, 4.0}};
  spec.noise_sd = 1.0;
  spec.boxes = {{-5.0, 5.0}, {-5.0, 5.0}};
  spec.dual_max = 50.0;
  spec.upsilon = 1e-3;
  spec.dual_scaling = true;
  spec.constraint = std::make_shared<SquaredNormConstraint>(2, radius_sq);
  return spec;
}

/// Three workers in R^2 with two affine constraints.
inline ProblemSpec two_constraint_example() {
  ProblemSpec spec;
  spec.n = 3;
  spec.d = 2;
  spec.means = {{4.0, 1.0}, {3.0, 2.0}, {5.0, 3.0}};
  spec.noise_sd = 0.5;
  spec.boxes = {{-10.0, 10.0}, {-10.0, 10.0}, {-10.0, 10.0}};
  spec.dual_max = 100.0;
  spec.upsilon = 1e-4;
  spec.dual_scaling = true;
  spec.constraint = std::make_shared<AffineConstraint>(2, Vec{1.0, 1.0, 1.0, -1.0}, Vec{3.0, 1.0});
  return spec;
}

inline Iterate random_iterate(const ProblemSpec& spec, std::mt19937_64& rng) {
  Iterate w;
  w.theta.assign(spec.n, Vec(spec.d));
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::uniform_real_distribution<double> u(spec.boxes[i].lo, spec.boxes[i].hi);
    for (double& v : w.theta[i]) v = u(rng);
  }
  std::uniform_real_distribution<double> ul(0.0, spec.dual_max);
  w.lambda.assign(spec.m(), 0.0);
  for (double& l : w.lambda) l = ul(rng);
  return w;
}

}  // namespace apd::testing
