#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rskelly/payoff.hpp"
#include "rskelly/quadrature.hpp"

namespace rskelly {

/// Feedback gain K: the fraction of wealth placed in each alternative. Always a point
/// of the unit simplex (components >= -1e-12, clamped to 0; sum within 1e-10 of 1).
class AllocationVector {
 public:
  static constexpr double kNegativeTol = 1e-12;
  static constexpr double kSumTol = 1e-10;

  /// Throws DomainError if `k` is not on the simplex.
  explicit AllocationVector(std::vector<double> k);

  static AllocationVector uniform(std::size_t m);
  static AllocationVector vertex(std::size_t m, std::size_t i);

  std::span<const double> values() const noexcept { return k_; }
  std::size_t size() const noexcept { return k_.size(); }
  double operator[](std::size_t i) const { return k_[i]; }

 private:
  std::vector<double> k_;
};

/// Risk aversion rho >= 0 and decision period n >= 1.
struct RiskSpec {
  double rho = 0.0;
  int n = 1;

  RiskSpec(double rho, int n);
};

struct ObjectiveValue {
  double u = 0.0;         ///< mean_log - rho / (2 n^2) * var_log
  double mean_log = 0.0;  ///< E[log<K, R_n>] / n
  double var_log = 0.0;   ///< var(log<K, R_n>)
};

/// Expectations of the log-growth L = log<K, R_n> that the objective, its gradient and
/// the optimality residuals are assembled from.
struct GrowthMoments {
  double mean_log = 0.0;     ///< E[L]
  double mean_log_sq = 0.0;  ///< E[L^2]
  double var_log = 0.0;      ///< var(L), computed in centred form where possible
  std::vector<double> ratio;      ///< E[R_i / <K, R>]
  std::vector<double> log_ratio;  ///< E[L R_i / <K, R>]
};

/// u = E[L]/n - rho/(2 n^2) var(L). var values in (-1e-12, 0) are clamped to 0.
ObjectiveValue assemble_objective(const GrowthMoments& m, const RiskSpec& spec);

/// du/dK_i ignoring the simplex constraint. A divergent ratio (the continuous model at
/// K_1 = 0) yields +inf for that component.
std::vector<double> objective_gradient(const GrowthMoments& m, const RiskSpec& spec);

/// Source of growth moments for one payoff model and decision period.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::size_t dimension() const = 0;
  virtual int period() const = 0;
  /// Moments at arbitrary weights; callers outside the simplex must keep <K, R> > 0.
  virtual GrowthMoments moments(std::span<const double> weights) const = 0;
  virtual std::string method() const = 0;
};

/// Exact atom sums over a compound distribution.
class DiscreteEvaluator final : public Evaluator {
 public:
  explicit DiscreteEvaluator(CompoundReturnDistribution dist, std::string method = "exact");
  std::size_t dimension() const override { return dist_.dimension(); }
  int period() const override { return dist_.n; }
  GrowthMoments moments(std::span<const double> weights) const override;
  std::string method() const override { return method_; }
  const CompoundReturnDistribution& distribution() const noexcept { return dist_; }

 private:
  CompoundReturnDistribution dist_;
  std::string method_;
};

/// Quadrature in the Erlang variable for the cash + uniform(-1, x_max] model.
class ContinuousEvaluator final : public Evaluator {
 public:
  ContinuousEvaluator(double x_max, int n, QuadratureConfig quad = {});
  std::size_t dimension() const override { return 2; }
  int period() const override { return n_; }
  GrowthMoments moments(std::span<const double> weights) const override;
  std::string method() const override { return "quadrature"; }

 private:
  double x_max_;
  int n_;
  QuadratureConfig quad_;
};

/// Exact evaluator for discrete models; quadrature for the uniform model; sample-average
/// approximation over `samples` draws when exact compounding exceeds `atom_cap` or the model
/// has no exact route.
std::unique_ptr<Evaluator> make_evaluator(const PayoffModel& model, int n,
                                          std::size_t atom_cap = kDefaultAtomCap,
                                          std::uint64_t seed = 0, std::size_t samples = 200'000,
                                          const QuadratureConfig& quad = {});

GrowthMoments discrete_moments(const CompoundReturnDistribution& dist,
                               std::span<const double> weights);

GrowthMoments continuous_moments(double x_max, int n, std::span<const double> weights,
                                 const QuadratureConfig& quad = {});

/// Erlang(n, 1) truncation point T with negligible mass (and second moment) beyond it.
double erlang_truncation(int n, double tail_mass);

ObjectiveValue evaluate_exact(const CompoundReturnDistribution& dist, const AllocationVector& k,
                              const RiskSpec& spec);

double log_variance(const CompoundReturnDistribution& dist, const AllocationVector& k);

ObjectiveValue evaluate_continuous(double x_max, const AllocationVector& k, const RiskSpec& spec,
                                   const QuadratureConfig& quad = {});

std::vector<double> gradient_exact(const CompoundReturnDistribution& dist,
                                   const AllocationVector& k, const RiskSpec& spec);

struct McConfig {
  std::uint64_t seed = 0;
  std::size_t samples = 1'000'000;
  std::size_t batch = 65'536;
  unsigned threads = 1;
};

/// Running count, mean and central moment sums of the log-growth, mergeable in any
/// grouping (Pebay's pairwise update).
struct LogGrowthStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;

  void push(double x);
  static LogGrowthStats merge(const LogGrowthStats& a, const LogGrowthStats& b);
};

/// Log-growth statistics over sample indices [first_index, first_index + count). Batches
/// of `batch` samples are reduced independently (optionally on `threads` threads) and
/// merged in index order, so the result does not depend on the thread count.
LogGrowthStats mc_log_growth_stats(const PayoffModel& model, const AllocationVector& k, int n,
                                   std::uint64_t seed, std::uint64_t first_index,
                                   std::size_t count, std::size_t batch, unsigned threads = 1);

struct McEstimate {
  ObjectiveValue value;
  double stderr_u = 0.0;
};

/// Unbiased variance; delta-method standard error of u.
McEstimate finish_mc(const LogGrowthStats& stats, const RiskSpec& spec);

McEstimate evaluate_mc(const PayoffModel& model, const AllocationVector& k, const RiskSpec& spec,
                       const McConfig& mc);

/// Closed-form d^2/dK_2^2 var(log<K, R_1>) for the +-1/2 bet.
double betting_logvar_second_derivative(double p, double k2);

inline constexpr double kGradientCheckStep = 1e-6;
inline constexpr double kSecondDerivativeStep = 1e-4;

/// var(log(1 + k2 X_n)) for the cash + uniform model, K = (1 - k2, k2).
double continuous_log_variance(double x_max, int n, double k2, const QuadratureConfig& quad = {});

/// Second difference (step kSecondDerivativeStep) of continuous_log_variance in k2. The three
/// evaluations share one quadrature partition. The stencil is centred unless that would push
/// <K, R> to zero, in which case it is shifted one step inwards.
double continuous_logvar_second_derivative(double x_max, int n, double k2,
                                           const QuadratureConfig& quad = {});

}  // namespace rskelly
