#include "rskelly/payoff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <fmt/format.h>

#include "rskelly/error.hpp"
#include "rskelly/rng.hpp"

namespace rskelly {

namespace {

constexpr double kProbSumTol = 1e-12;
constexpr double kMergeRelTol = 1e-12;

void validate_discrete(const DiscreteJoint& d) {
  if (d.atoms.empty()) throw ValidationError("discrete model needs at least one atom");
  const std::size_t m = d.atoms.front().x.size();
  if (m == 0) throw ValidationError("discrete model needs at least one alternative");
  double total = 0.0;
  for (std::size_t j = 0; j < d.atoms.size(); ++j) {
    const PayoffAtom& a = d.atoms[j];
    if (a.x.size() != m) {
      throw ValidationError(
          fmt::format("atom {} has {} payoffs, expected {}", j, a.x.size(), m));
    }
    if (!(a.prob > 0.0 && a.prob <= 1.0)) {
      throw ValidationError(
          fmt::format("atom {} probability {} is outside (0, 1]", j, a.prob));
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (!(a.x[i] > -1.0) || !std::isfinite(a.x[i])) {
        throw ValidationError(fmt::format(
            "atom {} payoff {} = {} violates payoff > -1 (returns must stay positive)", j, i,
            a.x[i]));
      }
    }
    total += a.prob;
  }
  if (std::abs(total - 1.0) > kProbSumTol) {
    throw ValidationError(
        fmt::format("atom probabilities sum to {:.15g}, expected 1 (probability-sum invariant)",
                    total));
  }
}

bool nearly_same(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (std::abs(a[i] - b[i]) > kMergeRelTol * scale) return false;
  }
  return true;
}

// Multinomial coefficient n! / prod c_j!, as a product of binomials. Falls back to
// log space once the running product is no longer an exact double.
double multinomial_weight(const std::vector<int>& counts, const std::vector<double>& probs) {
  double coef = 1.0;
  int running = 0;
  bool exact = true;
  for (int c : counts) {
    for (int k = 1; k <= c; ++k) {
      coef = coef * static_cast<double>(running + k) / static_cast<double>(k);
    }
    running += c;
    if (!(coef < 0x1.0p53)) {
      exact = false;
      break;
    }
  }
  if (exact) {
    double w = coef;
    for (std::size_t j = 0; j < counts.size(); ++j) w *= std::pow(probs[j], counts[j]);
    return w;
  }
  running = std::accumulate(counts.begin(), counts.end(), 0);
  double log_w = std::lgamma(static_cast<double>(running) + 1.0);
  for (std::size_t j = 0; j < counts.size(); ++j) {
    log_w += counts[j] * std::log(probs[j]) - std::lgamma(counts[j] + 1.0);
  }
  return std::exp(log_w);
}

}  // namespace

PayoffModel PayoffModel::discrete(std::vector<PayoffAtom> atoms) {
  DiscreteJoint d{std::move(atoms)};
  validate_discrete(d);
  return PayoffModel(std::move(d));
}

PayoffModel PayoffModel::continuous_uniform(double x_max) {
  if (!(x_max > 0.0) || !std::isfinite(x_max)) {
    throw ValidationError(fmt::format("x_max = {} violates x_max > 0", x_max));
  }
  return PayoffModel(ContinuousUniform{x_max});
}

PayoffModel PayoffModel::deterministic(double rate, std::size_t m) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) {
    throw ValidationError(fmt::format("rate = {} violates rate >= 0", rate));
  }
  if (m == 0) throw ValidationError("deterministic model needs at least one alternative");
  return PayoffModel(Deterministic{rate, m});
}

PayoffKind PayoffModel::kind() const noexcept {
  return static_cast<PayoffKind>(storage_.index());
}

std::size_t PayoffModel::dimension() const noexcept {
  switch (kind()) {
    case PayoffKind::kDiscreteJoint:
      return std::get<DiscreteJoint>(storage_).atoms.front().x.size();
    case PayoffKind::kContinuousUniform:
      return 2;
    case PayoffKind::kDeterministic:
      return std::get<Deterministic>(storage_).m;
  }
  return 0;
}

const DiscreteJoint& PayoffModel::as_discrete() const {
  if (const auto* d = std::get_if<DiscreteJoint>(&storage_)) return *d;
  throw DomainError("payoff model is not discrete");
}

const ContinuousUniform& PayoffModel::as_continuous() const {
  if (const auto* c = std::get_if<ContinuousUniform>(&storage_)) return *c;
  throw DomainError("payoff model is not continuous-uniform");
}

const Deterministic& PayoffModel::as_deterministic() const {
  if (const auto* d = std::get_if<Deterministic>(&storage_)) return *d;
  throw DomainError("payoff model is not deterministic");
}

PayoffModel betting_model(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError(fmt::format("win probability {} not in (0, 1)", p));
  return PayoffModel::discrete({{{0.0, 0.5}, p}, {{0.0, -0.5}, 1.0 - p}});
}

PayoffModel inventory_model(double x_max) { return PayoffModel::continuous_uniform(x_max); }

std::size_t multiset_count(std::size_t outcomes, int n) noexcept {
  if (outcomes == 0) return 0;
  unsigned __int128 result = 1;
  constexpr auto kMax = static_cast<unsigned __int128>(std::numeric_limits<std::size_t>::max());
  for (std::size_t k = 1; k < outcomes; ++k) {
    // C(n + k, k) = C(n + k - 1, k - 1) * (n + k) / k, exact at every step.
    result = result * static_cast<unsigned __int128>(static_cast<std::size_t>(n) + k) / k;
    if (result > kMax) return std::numeric_limits<std::size_t>::max();
  }
  return static_cast<std::size_t>(result);
}

CompoundReturnDistribution build_discrete_compound(const PayoffModel& model, int n,
                                                   std::size_t atom_cap) {
  if (n < 1) throw DomainError(fmt::format("decision period n = {} must be >= 1", n));
  if (model.kind() == PayoffKind::kDeterministic) {
    const Deterministic& det = model.as_deterministic();
    return {{{std::vector<double>(det.m, std::pow(1.0 + det.rate, n)), 1.0}}, n};
  }
  const DiscreteJoint& d = model.as_discrete();
  const std::size_t outcomes = d.atoms.size();
  const std::size_t m = model.dimension();
  const std::size_t count = multiset_count(outcomes, n);
  if (count > atom_cap) {
    throw CapExceeded(fmt::format(
        "{} stage outcomes over n = {} give {} compound atoms, above the cap of {}", outcomes, n,
        count, atom_cap));
  }

  std::vector<double> probs(outcomes);
  for (std::size_t j = 0; j < outcomes; ++j) probs[j] = d.atoms[j].prob;

  CompoundReturnDistribution out;
  out.n = n;
  out.atoms.reserve(count);

  std::vector<int> c(outcomes, 0);
  auto emit = [&] {
    ReturnAtom atom;
    atom.r.assign(m, 1.0);
    for (std::size_t j = 0; j < outcomes; ++j) {
      if (c[j] == 0) continue;
      for (std::size_t i = 0; i < m; ++i) atom.r[i] *= std::pow(1.0 + d.atoms[j].x[i], c[j]);
    }
    atom.prob = multinomial_weight(c, probs);
    out.atoms.push_back(std::move(atom));
  };
  // Every count vector c with sum n; slot j takes 0..left, the last slot takes the rest.
  auto walk = [&](auto&& self, std::size_t j, int left) -> void {
    if (j + 1 == outcomes) {
      c[j] = left;
      emit();
      return;
    }
    for (int k = 0; k <= left; ++k) {
      c[j] = k;
      self(self, j + 1, left - k);
    }
  };
  walk(walk, 0, n);

  std::sort(out.atoms.begin(), out.atoms.end(),
            [](const ReturnAtom& a, const ReturnAtom& b) { return a.r < b.r; });
  std::vector<ReturnAtom> merged;
  merged.reserve(out.atoms.size());
  for (ReturnAtom& a : out.atoms) {
    if (!merged.empty() && nearly_same(merged.back().r, a.r)) {
      merged.back().prob += a.prob;
    } else {
      merged.push_back(std::move(a));
    }
  }
  out.atoms = std::move(merged);
  return out;
}

CompoundReturnDistribution empirical_distribution(std::vector<std::vector<double>> samples,
                                                  int n) {
  if (samples.empty()) throw DomainError("empirical distribution needs at least one sample");
  CompoundReturnDistribution out;
  out.n = n;
  const double w = 1.0 / static_cast<double>(samples.size());
  out.atoms.reserve(samples.size());
  for (auto& s : samples) out.atoms.push_back({std::move(s), w});
  return out;
}

ErlangCompoundDensity::ErlangCompoundDensity(int n_, double x_max_) : n(n_), x_max(x_max_) {
  if (n < 1) throw DomainError(fmt::format("n = {} must be >= 1", n));
  if (!(x_max > 0.0)) throw DomainError(fmt::format("x_max = {} must be > 0", x_max));
}

double ErlangCompoundDensity::log_scale() const { return n * std::log1p(x_max); }

double ErlangCompoundDensity::support_upper() const { return std::expm1(log_scale()); }

double ErlangCompoundDensity::erlang_variable(double z) const {
  return log_scale() - std::log1p(z);
}

double erlang_compound_pdf(double z, const ErlangCompoundDensity& density) {
  if (!(z > -1.0) || !(z < density.support_upper())) return 0.0;
  const double t = density.erlang_variable(z);
  if (density.n == 1) return std::exp(-density.log_scale());
  if (!(t > 0.0)) return 0.0;
  const double log_f =
      (density.n - 1) * std::log(t) - density.log_scale() - std::lgamma(static_cast<double>(density.n));
  return std::exp(log_f);
}

double erlang_survival(int n, double t) {
  if (!(t > 0.0)) return 1.0;
  double term = std::exp(-t);
  double sum = term;
  for (int k = 1; k < n; ++k) {
    term *= t / k;
    sum += term;
  }
  return std::min(sum, 1.0);
}

double erlang_compound_cdf(double z, const ErlangCompoundDensity& density) {
  if (!(z > -1.0)) return 0.0;
  if (!(z < density.support_upper())) return 1.0;
  // ((1+z)/(1+x_max)^n) * sum_k t^k/k! with (1+z)/(1+x_max)^n = exp(-t).
  return erlang_survival(density.n, density.erlang_variable(z));
}

double uniform_to_exponential(double x, double x_max) {
  if (!(x > -1.0) || !(x <= x_max)) {
    throw DomainError(fmt::format("x = {} outside (-1, x_max = {}]", x, x_max));
  }
  return std::log1p(x_max) - std::log1p(x);
}

void sample_compound_into(const PayoffModel& model, int n, std::uint64_t seed,
                          std::uint64_t index, std::vector<double>& out) {
  const std::size_t m = model.dimension();
  out.assign(m, 1.0);
  SplitMix64 rng = stream_for(seed, index);
  switch (model.kind()) {
    case PayoffKind::kDeterministic: {
      const double g = std::pow(1.0 + model.as_deterministic().rate, n);
      std::fill(out.begin(), out.end(), g);
      return;
    }
    case PayoffKind::kContinuousUniform: {
      const double top = 1.0 + model.as_continuous().x_max;
      double r = 1.0;
      for (int k = 0; k < n; ++k) r *= top * rng.uniform_open_closed();
      out[1] = r;
      return;
    }
    case PayoffKind::kDiscreteJoint: {
      const auto& atoms = model.as_discrete().atoms;
      for (int k = 0; k < n; ++k) {
        const double u = rng.uniform();
        double cum = 0.0;
        std::size_t pick = atoms.size() - 1;
        for (std::size_t j = 0; j + 1 < atoms.size(); ++j) {
          cum += atoms[j].prob;
          if (u < cum) {
            pick = j;
            break;
          }
        }
        for (std::size_t i = 0; i < m; ++i) out[i] *= 1.0 + atoms[pick].x[i];
      }
      return;
    }
  }
}

std::vector<std::vector<double>> sample_compound(const PayoffModel& model, int n,
                                                 std::uint64_t seed, std::size_t count,
                                                 std::uint64_t first_index) {
  if (n < 1) throw DomainError(fmt::format("decision period n = {} must be >= 1", n));
  std::vector<std::vector<double>> out(count);
  for (std::size_t s = 0; s < count; ++s) sample_compound_into(model, n, seed, first_index + s, out[s]);
  return out;
}

}  // namespace rskelly
