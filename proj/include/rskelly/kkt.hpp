#pragma once

#include <cstddef>
#include <vector>

#include "rskelly/objective.hpp"
#include "rskelly/payoff.hpp"

namespace rskelly {

/// Components with K_i above this take the equality branch of the optimality conditions.
inline constexpr double kActivityTol = 1e-9;

/// Necessary-condition check of a candidate allocation.
///
/// The residual of alternative i is
///   g_i = E[R_i/W] - (rho/n) E[L R_i/W] + (rho/n) E[L] E[R_i/W],   W = <K, R>, L = log W,
/// which equals n du/dK_i. With the simplex multiplier fixed at 1 an optimum needs g_i = 1
/// for every active component and g_i <= 1 for every inactive one; 1 - g_i is then the
/// nonnegativity multiplier of an inactive component.
struct KktReport {
  std::vector<double> residuals;
  std::vector<bool> active;
  bool satisfied = false;
  double max_violation = 0.0;
};

std::vector<double> kkt_residuals(const GrowthMoments& moments, const RiskSpec& spec);

std::vector<double> kkt_residuals(const CompoundReturnDistribution& dist, const AllocationVector& k,
                                  const RiskSpec& spec);

KktReport certify(const GrowthMoments& moments, const AllocationVector& k, const RiskSpec& spec,
                  double tol);

KktReport certify(const Evaluator& evaluator, const AllocationVector& k, const RiskSpec& spec,
                  double tol);

KktReport certify(const CompoundReturnDistribution& dist, const AllocationVector& k,
                  const RiskSpec& spec, double tol);

/// Derivative of g_i along K_2 with K_1 = 1 - K_2 (two alternatives, exact atom sums).
double residual_slope(const CompoundReturnDistribution& dist, const AllocationVector& k,
                      const RiskSpec& spec, std::size_t i);

/// Optimal stake K_2* of the single-period +-1/2 bet won with probability p: the root of
/// g_2 - g_1 on [0, 1] (where g_1 = g_2 = 1), or the vertex whose inactive residual is at
/// most 1 + tol when no interior root exists. Bisection to a width of 1e-12 safeguards
/// Newton steps driven by residual_slope.
/// Throws NoConvergence if the residual does not change sign the expected way.
double solve_two_asset_betting(double p, double rho, double tol = 1e-12);

}  // namespace rskelly
