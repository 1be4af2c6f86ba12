#include "rskelly/kkt.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "rskelly/error.hpp"

namespace rskelly {

std::vector<double> kkt_residuals(const GrowthMoments& moments, const RiskSpec& spec) {
  const double c = spec.rho / spec.n;
  std::vector<double> g(moments.ratio.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(moments.ratio[i])) {
      g[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    g[i] = moments.ratio[i] - c * moments.log_ratio[i] + c * moments.mean_log * moments.ratio[i];
  }
  return g;
}

std::vector<double> kkt_residuals(const CompoundReturnDistribution& dist, const AllocationVector& k,
                                  const RiskSpec& spec) {
  if (dist.n != spec.n) {
    throw DimensionMismatch(
        fmt::format("distribution compounded over n = {} but risk spec has n = {}", dist.n, spec.n));
  }
  return kkt_residuals(discrete_moments(dist, k.values()), spec);
}

KktReport certify(const GrowthMoments& moments, const AllocationVector& k, const RiskSpec& spec,
                  double tol) {
  if (!(tol > 0.0)) throw DomainError(fmt::format("tolerance {} must be positive", tol));
  if (moments.ratio.size() != k.size()) {
    throw DimensionMismatch(fmt::format("allocation has {} components, moments have {}", k.size(),
                                        moments.ratio.size()));
  }
  KktReport report;
  report.residuals = kkt_residuals(moments, spec);
  report.active.resize(k.size());
  report.satisfied = true;
  for (std::size_t i = 0; i < k.size(); ++i) {
    report.active[i] = k[i] > kActivityTol;
    const double g = report.residuals[i];
    const double margin = report.active[i] ? std::abs(g - 1.0) : g - 1.0;
    if (!(margin <= tol)) {
      report.satisfied = false;
      report.max_violation = std::max(report.max_violation, margin);
    }
  }
  return report;
}

KktReport certify(const Evaluator& evaluator, const AllocationVector& k, const RiskSpec& spec,
                  double tol) {
  if (evaluator.period() != spec.n) {
    throw DimensionMismatch(fmt::format("evaluator period {} but risk spec has n = {}",
                                        evaluator.period(), spec.n));
  }
  return certify(evaluator.moments(k.values()), k, spec, tol);
}

KktReport certify(const CompoundReturnDistribution& dist, const AllocationVector& k,
                  const RiskSpec& spec, double tol) {
  return certify(DiscreteEvaluator(dist), k, spec, tol);
}

double residual_slope(const CompoundReturnDistribution& dist, const AllocationVector& k,
                      const RiskSpec& spec, std::size_t i) {
  if (dist.dimension() != 2 || k.size() != 2) {
    throw DimensionMismatch("residual slope is defined for two alternatives");
  }
  const double c = spec.rho / spec.n;
  double a = 0.0, b = 0.0, mean = 0.0;
  double da = 0.0, db = 0.0, dmean = 0.0;
  for (const ReturnAtom& atom : dist.atoms) {
    const double w = k[0] * atom.r[0] + k[1] * atom.r[1];
    if (!(w > 0.0)) throw NonPositiveReturn(fmt::format("<K, R> = {}", w));
    const double l = std::log(w);
    const double dir = atom.r[1] - atom.r[0];
    const double q = atom.prob * atom.r[i] / w;
    a += q;
    b += q * l;
    mean += atom.prob * l;
    da -= q * dir / w;
    db += q * dir * (1.0 - l) / w;
    dmean += atom.prob * dir / w;
  }
  return da - c * db + c * (dmean * a + mean * da);
}

double solve_two_asset_betting(double p, double rho, double tol) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(fmt::format("p = {} not in (0, 1)", p));
  const RiskSpec spec(rho, 1);
  if (!(tol > 0.0)) throw DomainError(fmt::format("tolerance {} must be positive", tol));
  const CompoundReturnDistribution dist = build_discrete_compound(betting_model(p), 1);

  auto at = [](double k2) { return AllocationVector({1.0 - k2, k2}); };
  // g_2 - g_1 is n du/dK_2 along the simplex. Since (1 - K_2) g_1 + K_2 g_2 = 1, it vanishes
  // exactly where both residuals equal 1, and at a vertex its sign is the inactive condition.
  auto excess = [&](double k2) {
    const std::vector<double> g = kkt_residuals(dist, at(k2), spec);
    return g[1] - g[0];
  };

  const double h0 = excess(0.0);
  const double h1 = excess(1.0);
  if (h0 <= 0.0) {
    if (h1 > tol) {
      throw NoConvergence(fmt::format(
          "residual rises from {:.3g} at K2 = 0 to {:.3g} at K2 = 1; no bracket", h0, h1));
    }
    return 0.0;
  }
  if (h1 >= -tol) return 1.0;

  constexpr double kBracketWidth = 1e-12;
  constexpr int kMaxIterations = 200;
  double lo = 0.0, hi = 1.0;
  double x = 0.5;
  for (int it = 0; it < kMaxIterations; ++it) {
    const double h = excess(x);
    if (!std::isfinite(h)) throw NoConvergence(fmt::format("residual not finite at K2 = {}", x));
    if (h > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (std::abs(h) <= tol || hi - lo <= kBracketWidth) return x;
    const double slope =
        residual_slope(dist, at(x), spec, 1) - residual_slope(dist, at(x), spec, 0);
    const double newton = x - h / slope;
    x = (std::isfinite(newton) && newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
  }
  throw NoConvergence(fmt::format("no root within {} iterations for p = {}, rho = {}",
                                  kMaxIterations, p, rho));
}

}  // namespace rskelly
