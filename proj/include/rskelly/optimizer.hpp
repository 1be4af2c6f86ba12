#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rskelly/kkt.hpp"
#include "rskelly/objective.hpp"

namespace rskelly {

struct OptimizerOptions {
  std::size_t max_iters = 10'000;
  double step_init = 1.0;
  double backtrack = 0.5;
  double grad_tol = 1e-10;
  double kkt_tol = 1e-6;
  std::size_t restarts = 5;
  std::uint64_t seed = 0;  ///< random restart points
  bool record_trace = false;

  void validate() const;
};

enum class StopReason { kStationary, kLineSearchExhausted, kMaxIterations, kNoImprovement, kGrid };

std::string to_string(StopReason reason);

struct OptimizationResult {
  AllocationVector k_star = AllocationVector::uniform(1);
  double u_star = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  StopReason reason = StopReason::kMaxIterations;
  KktReport kkt;
  std::vector<std::pair<std::size_t, double>> trace;
};

/// Euclidean projection onto the unit simplex (sort and threshold). Feasible inputs are
/// returned unchanged.
AllocationVector project_to_simplex(std::span<const double> v);

/// Projected gradient ascent with backtracking (Armijo) line search, started from `init`
/// (when given), the simplex centre and seeded random points until `opts.restarts` starts
/// have run. Returns the best start; ties within 1e-12 in u go to the larger weight on
/// alternative 0. The result is certified against the optimality conditions and only
/// reported as converged when the certificate holds at opts.kkt_tol.
OptimizationResult maximize(const Evaluator& evaluator, const RiskSpec& spec,
                            const OptimizerOptions& opts = {},
                            const std::optional<AllocationVector>& init = std::nullopt);

/// Exhaustive simplex grid search for m <= 3, re-centred on the incumbent and shrunk
/// `levels` times. Throws DimensionTooLarge for m > 3.
OptimizationResult grid_refine(const Evaluator& evaluator, const RiskSpec& spec,
                               std::size_t levels = 8, std::size_t points_per_level = 21,
                               double kkt_tol = 1e-6);

struct SweepRow {
  double rho = 0.0;
  std::optional<OptimizationResult> result;
  std::string error;  ///< set when the solve for this row failed
};

/// One warm-started solve per rho, rows in input order. A failing row records its error
/// and the sweep continues.
std::vector<SweepRow> sweep_rho(const Evaluator& evaluator, int n, std::span<const double> rho_values,
                                const OptimizerOptions& opts = {},
                                const std::optional<AllocationVector>& init = std::nullopt);

}  // namespace rskelly
