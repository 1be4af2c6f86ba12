#include "rskelly/objective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "rskelly/error.hpp"

namespace rskelly {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_period(int dist_n, const RiskSpec& spec) {
  if (dist_n != spec.n) {
    throw DimensionMismatch(
        fmt::format("distribution compounded over n = {} but risk spec has n = {}", dist_n, spec.n));
  }
}

// log(w) for w = 1 + delta, accurate when delta is small.
double log_of(double one_plus_delta, double delta) {
  return std::abs(delta) < 0.5 ? std::log1p(delta) : std::log(one_plus_delta);
}

}  // namespace

AllocationVector::AllocationVector(std::vector<double> k) : k_(std::move(k)) {
  if (k_.empty()) throw DomainError("allocation vector is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < k_.size(); ++i) {
    if (!std::isfinite(k_[i]) || k_[i] < -kNegativeTol) {
      throw DomainError(fmt::format("allocation component {} = {} is negative", i, k_[i]));
    }
    k_[i] = std::max(k_[i], 0.0);
    sum += k_[i];
  }
  if (std::abs(sum - 1.0) > kSumTol) {
    throw DomainError(fmt::format("allocation components sum to {:.15g}, expected 1", sum));
  }
}

AllocationVector AllocationVector::uniform(std::size_t m) {
  return AllocationVector(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

AllocationVector AllocationVector::vertex(std::size_t m, std::size_t i) {
  std::vector<double> k(m, 0.0);
  k.at(i) = 1.0;
  return AllocationVector(std::move(k));
}

RiskSpec::RiskSpec(double rho_, int n_) : rho(rho_), n(n_) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw DomainError(fmt::format("risk aversion rho = {} must be >= 0", rho));
  }
  if (n < 1) throw DomainError(fmt::format("decision period n = {} must be >= 1", n));
}

ObjectiveValue assemble_objective(const GrowthMoments& m, const RiskSpec& spec) {
  ObjectiveValue v;
  const double n = spec.n;
  v.var_log = m.var_log;
  if (v.var_log < 0.0 && v.var_log > -1e-12) v.var_log = 0.0;
  v.mean_log = m.mean_log / n;
  v.u = v.mean_log - spec.rho / (2.0 * n * n) * v.var_log;
  return v;
}

std::vector<double> objective_gradient(const GrowthMoments& m, const RiskSpec& spec) {
  const double n = spec.n;
  const double scale = 1.0 + spec.rho / n * m.mean_log;
  std::vector<double> g(m.ratio.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(m.ratio[i])) {
      g[i] = kInf;
      continue;
    }
    g[i] = m.ratio[i] / n * scale - spec.rho / (n * n) * m.log_ratio[i];
  }
  return g;
}

GrowthMoments discrete_moments(const CompoundReturnDistribution& dist,
                               std::span<const double> weights) {
  const std::size_t m = dist.dimension();
  if (weights.size() != m) {
    throw DimensionMismatch(
        fmt::format("allocation has {} components, distribution has {}", weights.size(), m));
  }
  GrowthMoments out;
  out.ratio.assign(m, 0.0);
  out.log_ratio.assign(m, 0.0);
  std::vector<double> logs(dist.atoms.size());
  for (std::size_t a = 0; a < dist.atoms.size(); ++a) {
    const ReturnAtom& atom = dist.atoms[a];
    double w = 0.0;
    for (std::size_t i = 0; i < m; ++i) w += weights[i] * atom.r[i];
    if (!(w > 0.0)) {
      throw NonPositiveReturn(fmt::format("<K, R> = {} at atom {}", w, a));
    }
    const double l = std::log(w);
    logs[a] = l;
    out.mean_log += atom.prob * l;
    out.mean_log_sq += atom.prob * l * l;
    for (std::size_t i = 0; i < m; ++i) {
      const double q = atom.prob * atom.r[i] / w;
      out.ratio[i] += q;
      out.log_ratio[i] += q * l;
    }
  }
  double var = 0.0;
  for (std::size_t a = 0; a < dist.atoms.size(); ++a) {
    const double d = logs[a] - out.mean_log;
    var += dist.atoms[a].prob * d * d;
  }
  out.var_log = var;
  return out;
}

double erlang_truncation(int n, double tail_mass) {
  // Bound both the mass and E[t^2; t > T] = n(n+1) P(Erlang(n+2) > T).
  const double factor = 1.0 + static_cast<double>(n) * (n + 1);
  double t = n;
  while (factor * erlang_survival(n + 2, t) > tail_mass) t += 1.0;
  return t;
}

GrowthMoments continuous_moments(double x_max, int n, std::span<const double> weights,
                                 const QuadratureConfig& quad) {
  if (weights.size() != 2) {
    throw DimensionMismatch(
        fmt::format("continuous model has 2 alternatives, allocation has {}", weights.size()));
  }
  const ErlangCompoundDensity density(n, x_max);
  const double k1 = weights[0];
  const double k2 = weights[1];
  const double log_scale = density.log_scale();
  // <K, R> ranges over (k1, k1 + k2 (1 + x_max)^n) as R_2 ranges over its support.
  const double w_lo = std::min(k1, k1 + k2 * std::exp(log_scale));
  if (k1 < 0.0 || (w_lo <= 0.0 && !(k1 == 0.0 && k2 > 0.0))) {
    throw NonPositiveReturn(fmt::format("<K, R> reaches {} for K = ({}, {})", w_lo, k1, k2));
  }
  const bool cash_free = k1 == 0.0;
  const double log_gamma_n = std::lgamma(static_cast<double>(n));

  const VectorIntegrand integrand = [&](double t, std::span<double> out) {
    double dens = 0.0;
    if (n == 1) {
      dens = std::exp(-t);
    } else if (t > 0.0) {
      dens = std::exp((n - 1) * std::log(t) - t - log_gamma_n);
    }
    const double s = log_scale - t;
    const double r = std::exp(s);
    const double w = k1 + k2 * r;
    const double l = log_of(w, (k1 + k2 - 1.0) + k2 * std::expm1(s));
    out[0] = dens * l;
    out[1] = dens * l * l;
    out[2] = cash_free ? 0.0 : dens / w;
    out[3] = cash_free ? 0.0 : dens * l / w;
    out[4] = dens * r / w;
    out[5] = dens * l * r / w;
  };

  const double upper = erlang_truncation(n, quad.tail_mass / (1.0 + log_scale * log_scale));
  const QuadratureResult q = integrate_adaptive(integrand, 6, 0.0, upper, quad);

  GrowthMoments out;
  out.mean_log = q.value[0];
  out.mean_log_sq = q.value[1];
  out.var_log = q.value[1] - q.value[0] * q.value[0];
  out.ratio = {cash_free ? kInf : q.value[2], q.value[4]};
  out.log_ratio = {cash_free ? -kInf : q.value[3], q.value[5]};
  return out;
}

DiscreteEvaluator::DiscreteEvaluator(CompoundReturnDistribution dist, std::string method)
    : dist_(std::move(dist)), method_(std::move(method)) {
  if (dist_.atoms.empty()) throw DomainError("compound distribution has no atoms");
}

GrowthMoments DiscreteEvaluator::moments(std::span<const double> weights) const {
  return discrete_moments(dist_, weights);
}

ContinuousEvaluator::ContinuousEvaluator(double x_max, int n, QuadratureConfig quad)
    : x_max_(x_max), n_(n), quad_(quad) {
  ErlangCompoundDensity(n, x_max);  // validates
}

GrowthMoments ContinuousEvaluator::moments(std::span<const double> weights) const {
  return continuous_moments(x_max_, n_, weights, quad_);
}

std::unique_ptr<Evaluator> make_evaluator(const PayoffModel& model, int n, std::size_t atom_cap,
                                          std::uint64_t seed, std::size_t samples,
                                          const QuadratureConfig& quad) {
  switch (model.kind()) {
    case PayoffKind::kContinuousUniform:
      return std::make_unique<ContinuousEvaluator>(model.as_continuous().x_max, n, quad);
    case PayoffKind::kDeterministic:
      return std::make_unique<DiscreteEvaluator>(build_discrete_compound(model, n));
    case PayoffKind::kDiscreteJoint:
      try {
        return std::make_unique<DiscreteEvaluator>(build_discrete_compound(model, n, atom_cap));
      } catch (const CapExceeded&) {
        return std::make_unique<DiscreteEvaluator>(
            empirical_distribution(sample_compound(model, n, seed, samples), n), "sample-average");
      }
  }
  throw DomainError("unknown payoff model kind");
}

ObjectiveValue evaluate_exact(const CompoundReturnDistribution& dist, const AllocationVector& k,
                              const RiskSpec& spec) {
  require_period(dist.n, spec);
  return assemble_objective(discrete_moments(dist, k.values()), spec);
}

double log_variance(const CompoundReturnDistribution& dist, const AllocationVector& k) {
  const double v = discrete_moments(dist, k.values()).var_log;
  return v < 0.0 && v > -1e-12 ? 0.0 : v;
}

ObjectiveValue evaluate_continuous(double x_max, const AllocationVector& k, const RiskSpec& spec,
                                   const QuadratureConfig& quad) {
  return assemble_objective(continuous_moments(x_max, spec.n, k.values(), quad), spec);
}

std::vector<double> gradient_exact(const CompoundReturnDistribution& dist,
                                   const AllocationVector& k, const RiskSpec& spec) {
  require_period(dist.n, spec);
  return objective_gradient(discrete_moments(dist, k.values()), spec);
}

void LogGrowthStats::push(double x) {
  LogGrowthStats one;
  one.count = 1;
  one.mean = x;
  *this = merge(*this, one);
}

LogGrowthStats LogGrowthStats::merge(const LogGrowthStats& a, const LogGrowthStats& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double n = na + nb;
  const double d = b.mean - a.mean;
  const double d_n = d / n;
  const double d2 = d * d_n * na * nb;  // d^2 na nb / n
  LogGrowthStats out;
  out.count = a.count + b.count;
  out.mean = a.mean + d_n * nb;
  out.m2 = a.m2 + b.m2 + d2;
  out.m3 = a.m3 + b.m3 + d2 * d_n * (na - nb) + 3.0 * d_n * (na * b.m2 - nb * a.m2);
  out.m4 = a.m4 + b.m4 + d2 * d_n * d_n * (na * na - na * nb + nb * nb) +
           6.0 * d_n * d_n * (na * na * b.m2 + nb * nb * a.m2) +
           4.0 * d_n * (na * b.m3 - nb * a.m3);
  return out;
}

LogGrowthStats mc_log_growth_stats(const PayoffModel& model, const AllocationVector& k, int n,
                                   std::uint64_t seed, std::uint64_t first_index,
                                   std::size_t count, std::size_t batch, unsigned threads) {
  if (k.size() != model.dimension()) {
    throw DimensionMismatch(fmt::format("allocation has {} components, model has {}", k.size(),
                                        model.dimension()));
  }
  if (batch == 0) throw DomainError("Monte Carlo batch size must be positive");
  const std::size_t batches = (count + batch - 1) / batch;
  std::vector<LogGrowthStats> partial(batches);

  auto run_batch = [&](std::size_t b) {
    std::vector<double> r;
    LogGrowthStats s;
    const std::size_t begin = b * batch;
    const std::size_t end = std::min(count, begin + batch);
    for (std::size_t i = begin; i < end; ++i) {
      sample_compound_into(model, n, seed, first_index + i, r);
      double w = 0.0;
      for (std::size_t c = 0; c < r.size(); ++c) w += k[c] * r[c];
      s.push(std::log(w));
    }
    partial[b] = s;
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(batches)));
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches; ++b) run_batch(b);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < batches; b += workers) run_batch(b);
      });
    }
  }

  LogGrowthStats total;
  for (const LogGrowthStats& s : partial) total = LogGrowthStats::merge(total, s);
  return total;
}

McEstimate finish_mc(const LogGrowthStats& stats, const RiskSpec& spec) {
  if (stats.count < 2) throw DomainError("Monte Carlo needs at least 2 samples");
  const double count = static_cast<double>(stats.count);
  const double n = spec.n;
  GrowthMoments m;
  m.mean_log = stats.mean;
  m.var_log = stats.m2 / (count - 1.0);
  McEstimate est;
  est.value = assemble_objective(m, spec);

  // Influence of one sample on u: L/n - rho/(2n^2) (L - mean)^2.
  const double var = stats.m2 / count;
  const double mu3 = stats.m3 / count;
  const double mu4 = stats.m4 / count;
  const double c = spec.rho / (2.0 * n * n);
  const double psi_var = var / (n * n) + c * c * (mu4 - var * var) - 2.0 * c / n * mu3;
  est.stderr_u = std::sqrt(std::max(psi_var, 0.0) / count);
  return est;
}

McEstimate evaluate_mc(const PayoffModel& model, const AllocationVector& k, const RiskSpec& spec,
                       const McConfig& mc) {
  if (mc.samples < 2) throw DomainError("Monte Carlo needs at least 2 samples");
  return finish_mc(
      mc_log_growth_stats(model, k, spec.n, mc.seed, 0, mc.samples, mc.batch, mc.threads), spec);
}

double betting_logvar_second_derivative(double p, double k2) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(fmt::format("p = {} not in (0, 1)", p));
  if (!(k2 >= 0.0 && k2 < 2.0)) throw DomainError(fmt::format("k2 = {} not in [0, 2)", k2));
  const double denom = k2 * k2 - 4.0;
  return 16.0 * p * (1.0 - p) * (2.0 + k2 * std::log((2.0 + k2) / (2.0 - k2))) / (denom * denom);
}

double continuous_log_variance(double x_max, int n, double k2, const QuadratureConfig& quad) {
  const std::vector<double> w = {1.0 - k2, k2};
  const double v = continuous_moments(x_max, n, w, quad).var_log;
  return v < 0.0 && v > -1e-12 ? 0.0 : v;
}

double continuous_logvar_second_derivative(double x_max, int n, double k2,
                                           const QuadratureConfig& quad) {
  if (!(k2 >= 0.0 && k2 < 1.0)) throw DomainError(fmt::format("k2 = {} not in [0, 1)", k2));
  const ErlangCompoundDensity density(n, x_max);
  const double h = kSecondDerivativeStep;
  // <K, R> = 1 + k2 (R - 1) must stay positive at every stencil point.
  double center = k2;
  if (1.0 - h * density.support_upper() <= 0.0 && k2 < h) center = k2 + h;
  if (k2 + h >= 1.0) center = k2 - h;
  const std::array<double, 3> ks = {center - h, center, center + h};

  const double log_scale = density.log_scale();
  const double log_gamma_n = std::lgamma(static_cast<double>(n));
  const VectorIntegrand integrand = [&](double t, std::span<double> out) {
    double dens = 0.0;
    if (n == 1) {
      dens = std::exp(-t);
    } else if (t > 0.0) {
      dens = std::exp((n - 1) * std::log(t) - t - log_gamma_n);
    }
    const double s = log_scale - t;
    const double em1 = std::expm1(s);
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const double delta = ks[j] * em1;
      const double l = log_of(1.0 + delta, delta);
      out[2 * j] = dens * l;
      out[2 * j + 1] = dens * l * l;
    }
  };
  const double upper = erlang_truncation(n, quad.tail_mass / (1.0 + log_scale * log_scale));
  const QuadratureResult q = integrate_adaptive(integrand, 6, 0.0, upper, quad);
  std::array<double, 3> v{};
  for (std::size_t j = 0; j < 3; ++j) v[j] = q.value[2 * j + 1] - q.value[2 * j] * q.value[2 * j];
  return (v[0] - 2.0 * v[1] + v[2]) / (h * h);
}

}  // namespace rskelly
