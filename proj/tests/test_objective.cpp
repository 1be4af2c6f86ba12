#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rskelly/error.hpp"
#include "rskelly/objective.hpp"

using namespace rskelly;

namespace {

AllocationVector bet(double k2) { return AllocationVector({1.0 - k2, k2}); }

}  // namespace

TEST_CASE("allocation vector and risk spec validation") {
  CHECK_THROWS_AS(AllocationVector({0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(AllocationVector({1.1, -0.1}), DomainError);
  CHECK_THROWS_AS(AllocationVector(std::vector<double>{}), DomainError);
  const AllocationVector k({1.0 + 1e-13, -1e-13});
  CHECK(k[1] == 0.0);
  CHECK(AllocationVector::uniform(4)[2] == 0.25);
  CHECK(AllocationVector::vertex(3, 1)[1] == 1.0);
  CHECK_THROWS_AS(RiskSpec(-0.1, 1), DomainError);
  CHECK_THROWS_AS(RiskSpec(0.0, 0), DomainError);
}

TEST_CASE("bet objective values") {
  const auto d = build_discrete_compound(betting_model(0.6), 1);
  const double mean = 0.6 * std::log(1.2) + 0.4 * std::log(0.8);
  const double var = 0.6 * 0.4 * std::pow(std::log(1.2 / 0.8), 2);

  const auto v0 = evaluate_exact(d, bet(0.4), RiskSpec(0.0, 1));
  CHECK(v0.u == doctest::Approx(mean).epsilon(1e-14));
  CHECK(v0.u == doctest::Approx(0.020136).epsilon(1e-4));
  CHECK(v0.var_log == doctest::Approx(var).epsilon(1e-13));

  const auto v1 = evaluate_exact(d, bet(0.4), RiskSpec(1.0, 1));
  CHECK(v1.u == doctest::Approx(mean - 0.5 * var).epsilon(1e-12));
  CHECK(std::abs(v1.u - 0.000407) <= 5e-7);

  CHECK(log_variance(d, bet(0.4)) == doctest::Approx(oracle::betting_log_variance(0.6, 0.4)));
  CHECK(log_variance(build_discrete_compound(betting_model(0.5), 1), bet(0.0)) == 0.0);
  CHECK(log_variance(build_discrete_compound(PayoffModel::deterministic(0.1, 2), 3), bet(0.7)) == 0.0);

  const auto cash = evaluate_exact(build_discrete_compound(betting_model(0.6), 3), bet(0.0),
                                   RiskSpec(2.0, 3));
  CHECK(cash.u == 0.0);
  CHECK(cash.mean_log == 0.0);
  CHECK(cash.var_log == 0.0);

  CHECK_THROWS_AS(evaluate_exact(d, bet(0.4), RiskSpec(0.0, 2)), DimensionMismatch);
  CHECK_THROWS_AS(evaluate_exact(d, AllocationVector::uniform(3), RiskSpec(0.0, 1)),
                  DimensionMismatch);
}

TEST_CASE("objective forms agree") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rho(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + trial % 3;
    const int n = 1 + trial % 5;
    const auto atoms = oracle::random_atoms(rng, m, 2 + trial % 3);
    const auto paths = oracle::ordered_paths(atoms, n);
    const auto d = build_discrete_compound(PayoffModel::discrete(atoms), n);
    const auto k = oracle::random_simplex_point(rng, m);
    const double r = rho(rng);
    const double u = evaluate_exact(d, AllocationVector(k), RiskSpec(r, n)).u;
    CHECK(std::abs(u - oracle::objective_expanded(paths, k, r, n)) <= 1e-12);
  }
}

TEST_CASE("objective decreases with risk aversion") {
  const auto d = build_discrete_compound(betting_model(0.6), 2);
  double prev = INFINITY;
  for (double r = 0.0; r <= 2.0; r += 0.25) {
    const double u = evaluate_exact(d, bet(0.3), RiskSpec(r, 2)).u;
    CHECK(u <= prev);
    prev = u;
  }
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> rho(0.0, 2.0);
  const double h = kGradientCheckStep;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + trial % 2;
    const int n = 1 + trial % 4;
    const auto d =
        build_discrete_compound(PayoffModel::discrete(oracle::random_atoms(rng, m, 3)), n);
    const auto k = oracle::random_simplex_point(rng, m, 0.05);
    const RiskSpec spec(rho(rng), n);
    const auto g = gradient_exact(d, AllocationVector(k), spec);
    const auto f = [&](const std::vector<double>& w) {
      return assemble_objective(discrete_moments(d, w), spec).u;
    };
    for (std::size_t i = 0; i < m; ++i) {
      auto up = k, down = k;
      up[i] += h;
      down[i] -= h;
      const double fd = (f(up) - f(down)) / (2 * h);
      CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])));
    }
  }
}

TEST_CASE("gradient at the cash vertex") {
  const auto d = build_discrete_compound(betting_model(0.6), 1);
  const auto g = gradient_exact(d, bet(0.0), RiskSpec(0.0, 1));
  CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(1.1).epsilon(1e-15));
  // rho = 0 reduces to E[R_i / W] / n.
  const auto d3 = build_discrete_compound(betting_model(0.6), 3);
  const auto g3 = gradient_exact(d3, bet(0.3), RiskSpec(0.0, 3));
  double e = 0.0;
  for (const auto& a : d3.atoms) e += a.prob * a.r[1] / (0.7 + 0.3 * a.r[1]);
  CHECK(g3[1] == doctest::Approx(e / 3.0).epsilon(1e-14));
}

TEST_CASE("continuous objective") {
  CHECK(evaluate_continuous(1.0, bet(1.0), RiskSpec(0.0, 1)).u ==
        doctest::Approx(std::log(2.0) - 1.0).epsilon(1e-10));
  for (int n : {1, 5, 10}) {
    const auto v = evaluate_continuous(1.0, bet(0.0), RiskSpec(0.7, n));
    CHECK(v.u == 0.0);
    CHECK(v.var_log == 0.0);
  }
  // Independent check of E[log(1 + k X_1)] for uniform X on (-1, 2].
  const double k2 = 0.6, x_max = 2.0;
  const double e = oracle::gauss_legendre(
      [&](double x) { return std::log(1.0 + k2 * x) / (1.0 + x_max); }, -1.0, x_max, 2000);
  const double e2 = oracle::gauss_legendre(
      [&](double x) { return std::pow(std::log(1.0 + k2 * x), 2) / (1.0 + x_max); }, -1.0, x_max,
      2000);
  const auto v = evaluate_continuous(x_max, bet(k2), RiskSpec(1.0, 1));
  CHECK(v.mean_log == doctest::Approx(e).epsilon(1e-10));
  CHECK(v.var_log == doctest::Approx(e2 - e * e).epsilon(1e-9));

  // Monte Carlo oracle at n = 5.
  McConfig mc;
  mc.seed = 8;
  mc.samples = 10'000'000;
  mc.threads = 4;
  const RiskSpec spec(0.5, 5);
  const auto est = evaluate_mc(inventory_model(1.0), bet(0.5), spec, mc);
  const auto q = evaluate_continuous(1.0, bet(0.5), spec);
  CHECK(std::abs(est.value.u - q.u) <= 3.0 * est.stderr_u);
}

TEST_CASE("gradient of the continuous objective") {
  const ContinuousEvaluator ev(1.0, 3);
  const RiskSpec spec(0.4, 3);
  const std::vector<double> k{0.7, 0.3};
  const auto g = objective_gradient(ev.moments(k), spec);
  const double h = kGradientCheckStep;
  for (std::size_t i = 0; i < 2; ++i) {
    auto up = k, down = k;
    up[i] += h;
    down[i] -= h;
    const double fd = (assemble_objective(ev.moments(up), spec).u -
                       assemble_objective(ev.moments(down), spec).u) / (2 * h);
    CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])));
  }
  const auto at_corner = objective_gradient(ev.moments(std::vector<double>{0.0, 1.0}), spec);
  CHECK(std::isinf(at_corner[0]));
}

TEST_CASE("Monte Carlo estimates") {
  McConfig mc;
  mc.samples = 1'000'000;
  const auto det = evaluate_mc(PayoffModel::deterministic(0.0, 2), bet(0.3), RiskSpec(1.0, 4), mc);
  CHECK(det.value.u == 0.0);
  CHECK(det.stderr_u == 0.0);

  const auto d = build_discrete_compound(betting_model(0.6), 1);
  const auto exact = evaluate_exact(d, bet(0.4), RiskSpec(0.0, 1));
  const auto est = evaluate_mc(betting_model(0.6), bet(0.4), RiskSpec(0.0, 1), mc);
  CHECK(est.stderr_u > 0.0);
  CHECK(std::abs(est.value.u - exact.u) <= 3.0 * est.stderr_u);

  // Splitting the index range and merging reproduces the single run bit for bit.
  const auto model = inventory_model(1.0);
  const auto k = bet(0.5);
  const auto whole = mc_log_growth_stats(model, k, 5, 3, 0, 131'072, 65'536, 1);
  const auto a = mc_log_growth_stats(model, k, 5, 3, 0, 65'536, 65'536, 1);
  const auto b = mc_log_growth_stats(model, k, 5, 3, 65'536, 65'536, 65'536, 1);
  const auto merged = LogGrowthStats::merge(a, b);
  CHECK(merged.count == whole.count);
  CHECK(merged.mean == whole.mean);
  CHECK(merged.m2 == whole.m2);
  CHECK(merged.m4 == whole.m4);
  const auto threaded = mc_log_growth_stats(model, k, 5, 3, 0, 131'072, 65'536, 3);
  CHECK(threaded.mean == whole.mean);
  CHECK(threaded.m2 == whole.m2);

  // The merged moments agree with a direct two-pass computation.
  const auto samples = sample_compound(model, 5, 3, 1000);
  std::vector<double> l;
  for (const auto& r : samples) l.push_back(std::log(0.5 + 0.5 * r[1]));
  double mean = 0.0, m2 = 0.0;
  for (double x : l) mean += x / 1000.0;
  for (double x : l) m2 += (x - mean) * (x - mean);
  const auto s = mc_log_growth_stats(model, k, 5, 3, 0, 1000, 128, 2);
  CHECK(s.mean == doctest::Approx(mean).epsilon(1e-13));
  CHECK(s.m2 == doctest::Approx(m2).epsilon(1e-12));
}

TEST_CASE("sample-average evaluator when exact compounding is too large") {
  std::mt19937_64 rng(4);
  const auto model = PayoffModel::discrete(oracle::random_atoms(rng, 2, 12));
  const auto ev = make_evaluator(model, 12, 1000, 1, 5000);
  CHECK(ev->method() == "sample-average");
  CHECK(make_evaluator(betting_model(0.6), 2)->method() == "exact");
  CHECK(make_evaluator(inventory_model(1.0), 2)->method() == "quadrature");
}

TEST_CASE("log-variance curvature of the bet") {
  CHECK(betting_logvar_second_derivative(0.5, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(betting_logvar_second_derivative(0.6, 0.0) == doctest::Approx(0.48).epsilon(1e-15));
  CHECK_THROWS_AS(betting_logvar_second_derivative(1.0, 0.5), DomainError);
  CHECK_THROWS_AS(betting_logvar_second_derivative(0.5, 2.0), DomainError);
  const double h = kSecondDerivativeStep;
  for (double p : {0.55, 0.6, 0.75}) {
    for (int j = 1; j <= 9; ++j) {
      const double k2 = j / 10.0;
      const double fd = (oracle::betting_log_variance(p, k2 + h) -
                         2 * oracle::betting_log_variance(p, k2) +
                         oracle::betting_log_variance(p, k2 - h)) / (h * h);
      CHECK(std::abs(fd - betting_logvar_second_derivative(p, k2)) <= 1e-5);
    }
  }
}

TEST_CASE("log-variance curvature of the compound uniform") {
  for (int n : {1, 5, 10}) {
    for (int j = 1; j <= 49; ++j)
      CHECK(continuous_logvar_second_derivative(1.0, n, j / 50.0) >= -1e-8);
    const double expected = 2.0 * oracle::compound_uniform_variance(1.0, n);
    CHECK(continuous_logvar_second_derivative(1.0, n, 0.0) ==
          doctest::Approx(expected).epsilon(n == 1 ? 1e-3 : 5e-2));
  }
  CHECK(continuous_log_variance(1.0, 1, 0.0) == 0.0);
  CHECK_THROWS_AS(continuous_logvar_second_derivative(1.0, 1, 1.5), DomainError);
}
