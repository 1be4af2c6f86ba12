#include "rskelly/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "rskelly/error.hpp"
#include "rskelly/rng.hpp"

namespace rskelly {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kTieTol = 1e-12;
constexpr double kGradientCap = 1e8;
constexpr int kMaxHalvings = 80;
constexpr std::size_t kStallLimit = 50;
constexpr double kMinTrialStep = 1e-10;
constexpr double kMaxTrialStep = 1e10;

// Divergent partial derivatives (the log barrier at an empty cash position) become large
// finite pushes so that projected steps stay well defined.
std::vector<double> capped(std::vector<double> g) {
  for (double& x : g) {
    if (std::isnan(x)) throw NoConvergence("objective gradient is NaN");
    x = std::clamp(x, -kGradientCap, kGradientCap);
  }
  return g;
}

bool better(double u, const AllocationVector& k, double best_u, const AllocationVector& best_k) {
  if (u > best_u + kTieTol) return true;
  return std::abs(u - best_u) <= kTieTol && k[0] > best_k[0];
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

AllocationVector step_from(const AllocationVector& k, const std::vector<double>& g, double s) {
  std::vector<double> v(k.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = k[i] + s * g[i];
  return project_to_simplex(v);
}

OptimizationResult ascend(const Evaluator& evaluator, const RiskSpec& spec,
                          const OptimizerOptions& opts, AllocationVector start) {
  OptimizationResult res;
  res.k_star = std::move(start);
  GrowthMoments mom = evaluator.moments(res.k_star.values());
  ObjectiveValue val = assemble_objective(mom, spec);
  std::vector<double> g = capped(objective_gradient(mom, spec));
  if (opts.record_trace) res.trace.emplace_back(0, val.u);

  std::size_t stalls = 0;
  double first_step = opts.step_init;
  res.reason = StopReason::kMaxIterations;
  std::size_t it = 0;
  for (; it < opts.max_iters; ++it) {
    // Gradient mapping at unit step; zero exactly at stationary points of the constrained problem.
    const AllocationVector probe = step_from(res.k_star, g, 1.0);
    if (max_abs_diff(probe.values(), res.k_star.values()) <= opts.grad_tol) {
      res.reason = StopReason::kStationary;
      break;
    }

    bool accepted = false;
    double s = first_step;
    std::optional<AllocationVector> trial;
    GrowthMoments trial_mom;
    ObjectiveValue trial_val;
    for (int h = 0; h < kMaxHalvings; ++h, s *= opts.backtrack) {
      trial.emplace(step_from(res.k_star, g, s));
      double ascent = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) ascent += g[i] * ((*trial)[i] - res.k_star[i]);
      if (!(ascent > 0.0)) break;
      trial_mom = evaluator.moments(trial->values());
      trial_val = assemble_objective(trial_mom, spec);
      if (trial_val.u >= val.u + kArmijo * ascent) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.reason = StopReason::kLineSearchExhausted;
      break;
    }
    stalls = trial_val.u > val.u ? 0 : stalls + 1;
    std::vector<double> g_next = capped(objective_gradient(trial_mom, spec));
    // Barzilai-Borwein trial step for the next iteration: |dK|^2 / -<dK, dg>.
    double dk_dk = 0.0, dk_dg = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double dk = (*trial)[i] - res.k_star[i];
      dk_dk += dk * dk;
      dk_dg += dk * (g_next[i] - g[i]);
    }
    first_step = dk_dg < 0.0 ? std::clamp(dk_dk / -dk_dg, kMinTrialStep, kMaxTrialStep)
                             : opts.step_init;
    res.k_star = std::move(*trial);
    mom = std::move(trial_mom);
    val = trial_val;
    g = std::move(g_next);
    if (opts.record_trace) res.trace.emplace_back(it + 1, val.u);
    if (stalls >= kStallLimit) {
      res.reason = StopReason::kNoImprovement;
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.u_star = val.u;
  res.kkt = certify(mom, res.k_star, spec, opts.kkt_tol);
  const bool stopped_cleanly =
      res.reason == StopReason::kStationary || res.reason == StopReason::kLineSearchExhausted;
  res.converged = stopped_cleanly && res.kkt.satisfied;
  return res;
}

AllocationVector random_simplex_point(std::size_t m, SplitMix64& rng) {
  std::vector<double> e(m);
  for (double& x : e) x = -std::log(rng.uniform_open_closed());
  const double total = std::accumulate(e.begin(), e.end(), 0.0);
  for (double& x : e) x /= total;
  return project_to_simplex(e);
}

void require_period(const Evaluator& evaluator, const RiskSpec& spec) {
  if (evaluator.period() != spec.n) {
    throw DimensionMismatch(fmt::format("evaluator period {} but risk spec has n = {}",
                                        evaluator.period(), spec.n));
  }
}

}  // namespace

void OptimizerOptions::validate() const {
  if (max_iters == 0) throw DomainError("max_iters must be positive");
  if (!(step_init > 0.0)) throw DomainError("step_init must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw DomainError("backtrack factor must be in (0, 1)");
  if (!(grad_tol > 0.0)) throw DomainError("grad_tol must be positive");
  if (!(kkt_tol > 0.0)) throw DomainError("kkt_tol must be positive");
  if (restarts == 0) throw DomainError("restarts must be positive");
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kStationary:
      return "stationary";
    case StopReason::kLineSearchExhausted:
      return "line-search-exhausted";
    case StopReason::kMaxIterations:
      return "max-iterations";
    case StopReason::kNoImprovement:
      return "no-improvement";
    case StopReason::kGrid:
      return "grid";
  }
  return "unknown";
}

AllocationVector project_to_simplex(std::span<const double> v) {
  const std::size_t m = v.size();
  if (m == 0) throw DomainError("cannot project an empty vector");
  std::size_t infinite = 0;
  for (double x : v) {
    if (std::isnan(x)) throw DomainError("cannot project a vector containing NaN");
    if (x == std::numeric_limits<double>::infinity()) ++infinite;
  }
  if (infinite > 0) {
    std::vector<double> k(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (std::isinf(v[i]) && v[i] > 0) k[i] = 1.0 / static_cast<double>(infinite);
    }
    return AllocationVector(std::move(k));
  }

  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  const bool feasible = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
  if (feasible && std::abs(sum - 1.0) <= 1e-15) {
    return AllocationVector(std::vector<double>(v.begin(), v.end()));
  }

  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> k(m);
  for (std::size_t i = 0; i < m; ++i) k[i] = std::max(v[i] - theta, 0.0);
  return AllocationVector(std::move(k));
}

OptimizationResult maximize(const Evaluator& evaluator, const RiskSpec& spec,
                            const OptimizerOptions& opts, const std::optional<AllocationVector>& init) {
  opts.validate();
  require_period(evaluator, spec);
  const std::size_t m = evaluator.dimension();

  std::vector<AllocationVector> starts;
  if (init) {
    if (init->size() != m) {
      throw DimensionMismatch(
          fmt::format("initial allocation has {} components, model has {}", init->size(), m));
    }
    starts.push_back(*init);
  }
  starts.push_back(AllocationVector::uniform(m));
  SplitMix64 rng(opts.seed);
  const std::size_t wanted = std::max<std::size_t>(opts.restarts, init ? 2 : 1);
  while (starts.size() < wanted) starts.push_back(random_simplex_point(m, rng));
  if (opts.restarts == 1) starts.erase(starts.begin() + 1, starts.end());

  std::optional<OptimizationResult> best;
  for (const AllocationVector& start : starts) {
    OptimizationResult r = ascend(evaluator, spec, opts, start);
    if (!best || better(r.u_star, r.k_star, best->u_star, best->k_star)) best = std::move(r);
  }
  return std::move(*best);
}

OptimizationResult grid_refine(const Evaluator& evaluator, const RiskSpec& spec,
                               std::size_t levels, std::size_t points_per_level, double kkt_tol) {
  require_period(evaluator, spec);
  const std::size_t m = evaluator.dimension();
  if (m > 3) {
    throw DimensionTooLarge(fmt::format("grid search supports at most 3 alternatives, got {}", m));
  }
  if (levels == 0 || points_per_level < 2) {
    throw DomainError("grid search needs at least one level and two points per axis");
  }

  auto value_at = [&](const AllocationVector& k) {
    return assemble_objective(evaluator.moments(k.values()), spec).u;
  };

  OptimizationResult res;
  res.k_star = AllocationVector::vertex(m, 0);
  res.u_star = value_at(res.k_star);
  res.reason = StopReason::kGrid;
  res.iterations = levels;

  if (m > 1) {
    const std::size_t free_dims = m - 1;
    std::vector<double> lo(free_dims, 0.0), hi(free_dims, 1.0);
    const std::size_t p = points_per_level;
    std::vector<std::size_t> idx(free_dims, 0);
    std::vector<double> raw(m);
    for (std::size_t level = 0; level < levels; ++level) {
      std::fill(idx.begin(), idx.end(), 0);
      while (true) {
        double used = 0.0;
        for (std::size_t d = 0; d < free_dims; ++d) {
          raw[d + 1] = lo[d] + (hi[d] - lo[d]) * static_cast<double>(idx[d]) / static_cast<double>(p - 1);
          used += raw[d + 1];
        }
        raw[0] = 1.0 - used;
        const AllocationVector k = project_to_simplex(raw);
        const double u = value_at(k);
        if (better(u, k, res.u_star, res.k_star)) {
          res.u_star = u;
          res.k_star = k;
        }
        std::size_t d = 0;
        while (d < free_dims && ++idx[d] == p) idx[d++] = 0;
        if (d == free_dims) break;
      }
      for (std::size_t d = 0; d < free_dims; ++d) {
        const double spacing = (hi[d] - lo[d]) / static_cast<double>(p - 1);
        lo[d] = std::max(0.0, res.k_star[d + 1] - 2.0 * spacing);
        hi[d] = std::min(1.0, res.k_star[d + 1] + 2.0 * spacing);
      }
    }
  }
  res.kkt = certify(evaluator, res.k_star, spec, kkt_tol);
  res.converged = res.kkt.satisfied;
  return res;
}

std::vector<SweepRow> sweep_rho(const Evaluator& evaluator, int n, std::span<const double> rho_values,
                                const OptimizerOptions& opts,
                                const std::optional<AllocationVector>& init) {
  if (rho_values.empty()) throw DomainError("rho sweep needs at least one value");
  std::vector<SweepRow> rows;
  rows.reserve(rho_values.size());
  std::optional<AllocationVector> warm = init;
  for (double rho : rho_values) {
    SweepRow row;
    row.rho = rho;
    try {
      OptimizationResult r = maximize(evaluator, RiskSpec(rho, n), opts, warm);
      warm = r.k_star;
      row.result = std::move(r);
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rskelly
