#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "apd/types.hpp"

namespace apd {

/// gamma_k = a0 / (a1 + k) or gamma_k = a0. Indices k <= 0 evaluate to
/// gamma_1, the edge convention used by the window recursion.
struct StepSizeRule {
  enum class Kind { Constant, InverseIteration };

  Kind kind = Kind::Constant;
  double a0 = 0.0;
  double a1 = 0.0;

  static StepSizeRule constant(double gamma) { return {Kind::Constant, gamma, 0.0}; }
  static StepSizeRule inverse(double a0, double a1) { return {Kind::InverseIteration, a0, a1}; }

  [[nodiscard]] double operator()(std::int64_t k) const;
  [[nodiscard]] std::string describe() const;
  /// Throws SpecError unless gamma_k > 0 for every k >= 1.
  void validate() const;

  /// Smallest b with gamma_s - gamma_{s+B-1} <= b^2 gamma_s^2 for every
  /// window start s in [1, horizon]. Zero for constant steps.
  [[nodiscard]] double ratio_constant(std::uint64_t B, std::uint64_t horizon) const;
};

struct StepsizeReport {
  bool sup_ok = false;
  bool ratio_ok = false;
  double sup_gamma = 0.0;
  double sup_limit = 0.0;  // 2 / (p mu)
  /// First step index j = k - l B + 2 whose window ratio fails, and the
  /// earliest (k, l) pair that exercises it.
  std::optional<std::int64_t> first_bad_index;
  std::optional<std::int64_t> first_bad_k;
  std::optional<std::int64_t> first_bad_window;
  double worst_ratio_excess = 0.0;  // max of lhs - rhs over checked indices

  [[nodiscard]] bool pass() const { return sup_ok && ratio_ok; }
};

/// Checks sup_k gamma_k <= 2/(p mu) and, for every k <= horizon and window
/// l in [1, floor((k+1)/B)],
///   gamma_{k-(l+1)B+2} / gamma_{k-lB+2} <= 1 + (p mu / 2) gamma_{k-lB+2}.
StepsizeReport check_stepsize_conditions(const StepSizeRule& rule, std::uint64_t p, std::uint64_t B, double mu,
                                         std::uint64_t horizon);

}  // namespace apd
