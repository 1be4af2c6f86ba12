#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

namespace rskelly {

/// One joint outcome of a single stage: the payoff of every alternative.
struct PayoffAtom {
  std::vector<double> x;
  double prob = 0.0;
};

struct DiscreteJoint {
  std::vector<PayoffAtom> atoms;
};

/// Two alternatives: a zero-rate risk-free asset and a payoff uniform on (-1, x_max].
struct ContinuousUniform {
  double x_max = 1.0;
};

/// Every alternative pays the same sure rate each stage.
struct Deterministic {
  double rate = 0.0;
  std::size_t m = 1;
};

enum class PayoffKind { kDiscreteJoint, kContinuousUniform, kDeterministic };

/// Per-stage joint payoff distribution, i.i.d. across stages. Instances are
/// validated on construction and immutable afterwards.
class PayoffModel {
 public:
  static PayoffModel discrete(std::vector<PayoffAtom> atoms);
  static PayoffModel continuous_uniform(double x_max);
  static PayoffModel deterministic(double rate, std::size_t m);

  PayoffKind kind() const noexcept;
  std::size_t dimension() const noexcept;

  const DiscreteJoint& as_discrete() const;
  const ContinuousUniform& as_continuous() const;
  const Deterministic& as_deterministic() const;

 private:
  using Storage = std::variant<DiscreteJoint, ContinuousUniform, Deterministic>;
  explicit PayoffModel(Storage s) : storage_(std::move(s)) {}
  Storage storage_;
};

/// The single-bet model: cash at zero rate, and a bet winning +1/2 with probability p
/// and losing -1/2 otherwise.
PayoffModel betting_model(double p);

/// Cash at zero rate plus a uniform(-1, x_max] demand-driven payoff.
PayoffModel inventory_model(double x_max);

struct ReturnAtom {
  std::vector<double> r;
  double prob = 0.0;
};

/// Finite law of the n-stage compound return vector R_n.
struct CompoundReturnDistribution {
  std::vector<ReturnAtom> atoms;
  int n = 1;

  std::size_t dimension() const noexcept { return atoms.empty() ? 0 : atoms.front().r.size(); }
};

inline constexpr std::size_t kDefaultAtomCap = 100'000;

/// Number of multisets of size n drawn from `outcomes` kinds, saturating at SIZE_MAX.
std::size_t multiset_count(std::size_t outcomes, int n) noexcept;

/// Exact law of R_n for a discrete model. Stage outcomes are combined as
/// multisets (the product is order-invariant) and near-identical return vectors
/// (relative distance below 1e-12) are merged.
/// Throws CapExceeded when the multiset count exceeds `atom_cap`.
CompoundReturnDistribution build_discrete_compound(const PayoffModel& model, int n,
                                                   std::size_t atom_cap = kDefaultAtomCap);

/// Equal-weight empirical distribution of a set of sampled return vectors.
CompoundReturnDistribution empirical_distribution(std::vector<std::vector<double>> samples, int n);

/// Law of X_n = prod_k (1 + X(k)) - 1 for X(k) i.i.d. uniform on (-1, x_max].
struct ErlangCompoundDensity {
  int n = 1;
  double x_max = 1.0;

  ErlangCompoundDensity(int n, double x_max);

  double support_upper() const;  ///< (1 + x_max)^n - 1
  double log_scale() const;      ///< n log(1 + x_max)
  /// Erlang variable t = log((1 + x_max)^n / (1 + z)); t ~ Erlang(n, 1).
  double erlang_variable(double z) const;
};

double erlang_compound_pdf(double z, const ErlangCompoundDensity& density);
double erlang_compound_cdf(double z, const ErlangCompoundDensity& density);

/// P(Erlang(n, 1) > t), the regularized upper incomplete gamma at integer order.
double erlang_survival(int n, double t);

/// y = -log((1 + x) / (1 + x_max)). Maps uniform(-1, x_max] to exp(1).
/// Throws DomainError unless -1 < x <= x_max.
double uniform_to_exponential(double x, double x_max);

/// `count` i.i.d. draws of R_n, sample indices first_index .. first_index + count - 1
/// of the counter-based stream for `seed` (see stream_for). Splitting an index range
/// into consecutive pieces reproduces the same samples.
std::vector<std::vector<double>> sample_compound(const PayoffModel& model, int n,
                                                 std::uint64_t seed, std::size_t count,
                                                 std::uint64_t first_index = 0);

/// Draws sample `index` of the stream into `out` (size = model dimension).
void sample_compound_into(const PayoffModel& model, int n, std::uint64_t seed,
                          std::uint64_t index, std::vector<double>& out);

}  // namespace rskelly
