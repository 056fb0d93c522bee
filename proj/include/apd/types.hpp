#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace apd {

using Vec = std::vector<double>;
using Tick = std::uint64_t;
using Iteration = std::uint64_t;

inline constexpr Tick kNeverTick = std::numeric_limits<Tick>::max();

/// Closed interval [lo, hi], applied coordinate-wise when used as a box.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool contains(double x) const { return lo <= x && x <= hi; }
  [[nodiscard]] double width() const { return hi - lo; }
  [[nodiscard]] double max_abs() const;
};

Interval operator+(Interval a, Interval b);
Interval operator*(Interval a, Interval b);
Interval operator*(double s, Interval a);

/// Thrown when vector sizes disagree with the problem dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for malformed problem instances or run configurations.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace apd
