#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace rskelly {

struct QuadratureConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  std::size_t max_intervals = 4000;
  /// Probability mass of the Erlang law allowed beyond the truncation point.
  double tail_mass = 1e-14;
};

struct Interval {
  double a = 0.0;
  double b = 0.0;
};

/// Writes `out.size()` integrand components at `t`.
using VectorIntegrand = std::function<void(double t, std::span<double> out)>;

struct QuadratureResult {
  std::vector<double> value;
  std::vector<double> error;
  std::vector<Interval> partition;
};

/// Adaptive Gauss-Kronrod (7/15) over [a, b], bisecting the worst interval until every
/// component meets max(rel_tol * |I|, abs_tol). Throws QuadratureNotConverged when
/// max_intervals is reached first.
QuadratureResult integrate_adaptive(const VectorIntegrand& f, std::size_t dim, double a, double b,
                                    const QuadratureConfig& config);

/// 15-point Kronrod rule on each interval of a fixed partition. Reusing one partition for
/// nearby integrands makes their discretization errors vary smoothly, which keeps finite
/// differences of quadrature values clean.
std::vector<double> integrate_on_partition(const VectorIntegrand& f, std::size_t dim,
                                           std::span<const Interval> partition);

}  // namespace rskelly
