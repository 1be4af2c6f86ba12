// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "rskelly/kkt.hpp"
#include "rskelly/objective.hpp"
#include "rskelly/optimizer.hpp"
#include "rskelly/payoff.hpp"

using namespace rskelly;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, std::string note) {
    pass = pass && ok;
    notes.push_back(fmt::format("{}{}", ok ? "" : "[violated] ", note));
  }
};

AllocationVector bet(double k2) { return AllocationVector({1.0 - k2, k2}); }

DiscreteEvaluator bet_evaluator(double p, int n = 1) {
  return DiscreteEvaluator(build_discrete_compound(betting_model(p), n));
}

std::vector<double> rho_grid() {
  std::vector<double> g;
  for (int j = 0; j <= 10; ++j) g.push_back(j / 10.0);
  return g;
}

// Kelly reduction.
Outcome kelly_reduction() {
  Outcome o;
  double solve_err = 0.0, opt_err = 0.0;
  for (double p : {0.51, 0.55, 0.6, 0.65, 0.7}) {
    const double kelly = 2.0 * (2.0 * p - 1.0);
    solve_err = std::max(solve_err, std::abs(solve_two_asset_betting(p, 0.0) - kelly));
    const auto r = maximize(bet_evaluator(p), RiskSpec(0.0, 1));
    opt_err = std::max(opt_err, std::abs(r.k_star[1] - kelly));
  }
  o.require(solve_err <= 1e-6, fmt::format("solver max|K2 - 2(2p-1)| = {:.2e} (tol 1e-6)", solve_err));
  o.require(opt_err <= 1e-6, fmt::format("maximize max|K2 - 2(2p-1)| = {:.2e} (tol 1e-6)", opt_err));
  return o;
}

// Quoted sweep values and the full rho grids for p = 0.6 and p = 0.75.
Outcome rho_sweep() {
  Outcome o;
  struct Point {
    double p, rho, expected, tol;
  };
  for (const Point& pt : {Point{0.6, 0.1, 0.3646, 1e-3}, Point{0.6, 1.0, 0.2035, 1e-3},
                          Point{0.75, 1.0, 0.5643, 1e-3}}) {
    const double k2 = solve_two_asset_betting(pt.p, pt.rho);
    o.require(std::abs(k2 - pt.expected) <= pt.tol,
              fmt::format("p={} rho={}: K2 = {:.6f} vs {} (tol {})", pt.p, pt.rho, k2, pt.expected,
                          pt.tol));
  }
  o.require(solve_two_asset_betting(0.75, 0.0) == 1.0, "p=0.75 rho=0: solver K2 == 1 exactly");

  const auto grid = rho_grid();
  for (double p : {0.6, 0.75}) {
    const auto ev = bet_evaluator(p);
    const auto rows = sweep_rho(ev, 1, grid);
    bool ok = true;
    double max_gap = 0.0, prev = 2.0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      ok = ok && rows[j].result && rows[j].result->converged;
      if (!rows[j].result) continue;
      const double k2 = rows[j].result->k_star[1];
      ok = ok && k2 <= prev + 1e-12;
      prev = k2;
      max_gap = std::max(max_gap, std::abs(k2 - solve_two_asset_betting(p, grid[j])));
    }
    o.require(ok && max_gap <= 1e-6,
              fmt::format("p={} sweep: 11 converged nonincreasing rows, max|sweep - solver| = "
                          "{:.2e} (tol 1e-6)", p, max_gap));
    if (p == 0.75 && rows.front().result)
      o.require(rows.front().result->k_star[1] == 1.0, "p=0.75 rho=0: sweep K2 == 1 exactly");
  }
  return o;
}

// Inventory corner solution.
Outcome inventory_corner() {
  Outcome o;
  const ContinuousEvaluator ev(1.0, 5);
  const RiskSpec spec(0.5, 5);
  const auto r = maximize(ev, spec);
  const double err = std::max(std::abs(r.k_star[0] - 1.0), std::abs(r.k_star[1]));
  o.require(err <= 1e-6, fmt::format("|K* - (1, 0)| = {:.2e} (tol 1e-6)", err));
  const auto cert = certify(ev, r.k_star, spec, 1e-6);
  o.require(cert.satisfied,
            fmt::format("certificate at tol 1e-6, max violation {:.2e}", cert.max_violation));
  return o;
}

// Convexity of the log-variance.
Outcome convexity() {
  Outcome o;
  double worst = INFINITY;
  for (int n : {1, 5, 10})
    for (int j = 1; j <= 49; ++j)
      worst = std::min(worst, continuous_logvar_second_derivative(1.0, n, j / 50.0));
  o.require(worst >= -1e-8,
            fmt::format("compound uniform: min d2v over 147 points = {:.4g} (floor -1e-8)", worst));

  double bet_min = INFINITY, fd_err = 0.0;
  const double h = kSecondDerivativeStep;
  for (double p : {0.51, 0.6, 0.75, 0.9}) {
    const auto dist = build_discrete_compound(betting_model(p), 1);
    const auto v = [&](double k2) {
      return discrete_moments(dist, std::vector<double>{1.0 - k2, k2}).var_log;
    };
    for (int j = 0; j <= 190; ++j) {
      const double k2 = j / 100.0;
      const double b = betting_logvar_second_derivative(p, k2);
      bet_min = std::min(bet_min, b);
      if (k2 < h) continue;
      const double fd = (v(k2 + h) - 2.0 * v(k2) + v(k2 - h)) / (h * h);
      fd_err = std::max(fd_err, std::abs(fd - b) / std::max(1.0, std::abs(b)));
    }
  }
  o.require(bet_min >= 0.0, fmt::format("bet: min d2v on [0, 1.9] = {:.4g} (floor 0)", bet_min));
  o.require(fd_err <= 1e-5,
            fmt::format("bet: max |closed form - second difference| / max(1, |d2v|) = {:.2e} "
                        "(tol 1e-5)", fd_err));
  return o;
}

// Compound uniform density suite.
Outcome density_suite() {
  Outcome o;
  double mass_err = 0.0, deriv_err = 0.0, ks_max = 0.0;
  std::uint64_t seed = 1;
  for (int n = 1; n <= 8; ++n) {
    for (double x_max : {0.5, 1.0, 2.0}) {
      const ErlangCompoundDensity d(n, x_max);
      const double c = std::pow(1.0 + x_max, n);
      const double mass = oracle::gauss_legendre(
          [&](double w) {
            const double w7 = std::pow(w, 7);
            return 8.0 * c * w7 * erlang_compound_pdf(-1.0 + c * w7 * w, d);
          },
          0.0, 1.0, 4000);
      mass_err = std::max(mass_err, std::abs(mass - 1.0));

      for (int j = 1; j < 100; ++j) {
        const double z = -1.0 + c * j / 100.0;
        const double hz = 1e-5 * c;
        const double fd =
            (erlang_compound_cdf(z + hz, d) - erlang_compound_cdf(z - hz, d)) / (2.0 * hz);
        deriv_err = std::max(deriv_err, std::abs(fd - erlang_compound_pdf(z, d)));
      }

      const auto samples = sample_compound(inventory_model(x_max), n, seed++, 1'000'000);
      std::vector<double> z;
      z.reserve(samples.size());
      for (const auto& r : samples) z.push_back(r[1] - 1.0);
      std::sort(z.begin(), z.end());
      const double count = static_cast<double>(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double f = erlang_compound_cdf(z[i], d);
        ks_max = std::max({ks_max, std::abs(f - i / count), std::abs(f - (i + 1) / count)});
      }
    }
  }
  o.require(mass_err <= 1e-8, fmt::format("max |integral of pdf - 1| = {:.2e} (tol 1e-8)", mass_err));
  o.require(deriv_err <= 1e-6,
            fmt::format("max |cdf difference quotient - pdf| = {:.2e} (tol 1e-6)", deriv_err));
  o.require(ks_max <= 0.002, fmt::format("max KS distance, 1e6 samples = {:.5f} (tol 0.002)", ks_max));
  return o;
}

// Objective forms, residual identity, gradient and oracle agreement.
Outcome property_suites() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> rho_dist(0.0, 3.0);

  double form_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + trial % 3;
    const int n = 1 + trial % 5;
    const auto atoms = oracle::random_atoms(rng, m, 2 + trial % 3);
    const auto d = build_discrete_compound(PayoffModel::discrete(atoms), n);
    const auto k = oracle::random_simplex_point(rng, m);
    const double rho = rho_dist(rng);
    const double u = evaluate_exact(d, AllocationVector(k), RiskSpec(rho, n)).u;
    form_err = std::max(form_err,
                        std::abs(u - oracle::objective_expanded(oracle::ordered_paths(atoms, n), k,
                                                                rho, n)));
  }
  o.require(form_err <= 1e-12,
            fmt::format("objective forms, 200 models: max diff = {:.2e} (tol 1e-12)", form_err));

  double id_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + trial % 3;
    const RiskSpec spec(rho_dist(rng), 1 + trial % 4);
    const auto k = oracle::random_simplex_point(rng, m);
    std::vector<double> g;
    if (trial % 10 == 9) {
      // Every tenth pair uses the compound uniform model (two alternatives).
      const std::vector<double> k2{k[0], 1.0 - k[0]};
      g = kkt_residuals(continuous_moments(0.5 + trial % 3, spec.n, k2), spec);
      id_err = std::max(id_err, std::abs(k2[0] * g[0] + k2[1] * g[1] - 1.0));
      continue;
    }
    const auto d = build_discrete_compound(
        PayoffModel::discrete(oracle::random_atoms(rng, m, 2 + trial % 3)), spec.n);
    g = kkt_residuals(d, AllocationVector(k), spec);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += k[i] * g[i];
    id_err = std::max(id_err, std::abs(s - 1.0));
  }
  o.require(id_err <= 1e-10,
            fmt::format("sum K_i g_i = 1, 1000 pairs: max diff = {:.2e} (tol 1e-10)", id_err));

  double grad_err = 0.0;
  const double h = kGradientCheckStep;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + trial % 2;
    const int n = 1 + trial % 4;
    const auto d =
        build_discrete_compound(PayoffModel::discrete(oracle::random_atoms(rng, m, 3)), n);
    const auto k = oracle::random_simplex_point(rng, m, 0.05);
    const RiskSpec spec(rho_dist(rng), n);
    const auto g = gradient_exact(d, AllocationVector(k), spec);
    for (std::size_t i = 0; i < m; ++i) {
      auto up = k, down = k;
      up[i] += h;
      down[i] -= h;
      const double fd = (assemble_objective(discrete_moments(d, up), spec).u -
                         assemble_objective(discrete_moments(d, down), spec).u) / (2.0 * h);
      grad_err = std::max(grad_err, std::abs(fd - g[i]) / std::abs(g[i]));
    }
  }
  o.require(grad_err <= 1e-6,
            fmt::format("gradient vs central differences, 100 points: max rel err = {:.2e} "
                        "(tol 1e-6)", grad_err));

  double k_gap = 0.0;
  const auto compare = [&](const Evaluator& ev, const RiskSpec& spec) {
    const auto a = maximize(ev, spec);
    const auto b = grid_refine(ev, spec);
    for (std::size_t i = 0; i < ev.dimension(); ++i)
      k_gap = std::max(k_gap, std::abs(a.k_star[i] - b.k_star[i]));
  };
  for (double p : {0.6, 0.75})
    for (double rho : rho_grid()) compare(bet_evaluator(p), RiskSpec(rho, 1));
  for (int n : {1, 5, 10}) compare(ContinuousEvaluator(1.0, n), RiskSpec(0.5, n));
  o.require(k_gap <= 1e-4,
            fmt::format("maximize vs grid_refine, 25 fixtures: max |dK| = {:.2e} (tol 1e-4)", k_gap));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 means none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Kelly reduction", 1.0, kelly_reduction},
      {2, "rho-sweep values", 5.0, rho_sweep},
      {3, "inventory corner solution", 10.0, inventory_corner},
      {4, "log-variance convexity", 0.0, convexity},
      {5, "compound uniform density", 0.0, density_suite},
      {6, "objective and optimality properties", 0.0, property_suites},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, fmt::format("threw: {}", e.what()));
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0.0)
      o.require(secs < c.time_limit, fmt::format("runtime {:.2f} s (limit {} s)", secs, c.time_limit));
    else
      o.notes.push_back(fmt::format("runtime {:.2f} s", secs));
    failed += o.pass ? 0 : 1;
    fmt::print("{} {} {}: ", o.pass ? "PASS" : "FAIL", c.id, c.name);
    for (std::size_t i = 0; i < o.notes.size(); ++i)
      fmt::print("{}{}", i ? "; " : "", o.notes[i]);
    fmt::print("\n");
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
