#include "rskelly/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "rskelly/error.hpp"
#include "rskelly/kkt.hpp"
#include "rskelly/objective.hpp"
#include "rskelly/optimizer.hpp"
#include "rskelly/scenario.hpp"

namespace rskelly::cli {

namespace {

struct Flags {
  std::string scenario;
  std::string rho_grid;
  std::string k;
  std::string n_list;
  std::string method = "auto";
  std::string output;
  std::string format = "csv";
  std::optional<std::size_t> grid_points;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::size_t levels = 8;
  std::optional<double> tol;
};

double parse_real(std::string_view token) {
  while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
  while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(fmt::format("'{}' is not a number", token));
  }
  return value;
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::uint64_t parse_u64(const std::string& text, const char* what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(fmt::format("{} '{}' is not a nonnegative integer", what, text));
  }
  return value;
}

// Seed precedence: --seed, then RSKELLY_SEED, then the scenario.
void apply_overrides(Scenario& s, const Flags& flags) {
  std::optional<std::uint64_t> seed = flags.seed;
  if (!seed) {
    if (auto e = env("RSKELLY_SEED")) seed = parse_u64(*e, "RSKELLY_SEED");
  }
  McConfig mc = s.mc.value_or(McConfig{});
  if (seed) {
    mc.seed = *seed;
    s.solver.seed = *seed;
  }
  if (auto e = env("RSKELLY_THREADS")) {
    mc.threads = static_cast<unsigned>(std::max<std::uint64_t>(1, parse_u64(*e, "RSKELLY_THREADS")));
  }
  if (flags.samples) mc.samples = *flags.samples;
  if (mc.samples < 2) throw ValidationError("Monte Carlo needs at least 2 samples");
  s.mc = mc;
}

std::vector<int> periods(const Scenario& s, const Flags& flags) {
  if (flags.n_list.empty()) return {s.risk.n};
  std::vector<int> out;
  for (double v : parse_real_list(flags.n_list)) {
    if (v < 1.0 || std::floor(v) != v) throw ValidationError(fmt::format("--n-list entry {} is not a period >= 1", v));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string k_header(std::size_t m) {
  std::string h;
  for (std::size_t i = 0; i < m; ++i) h += fmt::format(",k{}", i + 1);
  return h;
}

std::string k_cells(const AllocationVector& k) {
  std::string c;
  for (double x : k.values()) c += "," + format_number(x);
  return c;
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

AllocationVector allocation_from(const Flags& flags, std::size_t m) {
  if (flags.k.empty()) return AllocationVector::uniform(m);
  std::vector<double> k = parse_real_list(flags.k);
  if (k.size() != m) {
    throw DimensionMismatch(fmt::format("--k has {} components, model has {}", k.size(), m));
  }
  return AllocationVector(std::move(k));
}

std::unique_ptr<Evaluator> evaluator_for(const Scenario& s, int n) {
  return make_evaluator(s.model, n, s.atom_cap, s.mc->seed, s.mc->samples);
}

int cmd_evaluate(const Scenario& s, const Flags& flags, std::ostream& os) {
  const std::size_t m = s.model.dimension();
  const AllocationVector k = allocation_from(flags, m);
  std::string method = flags.method;
  const bool continuous = s.model.kind() == PayoffKind::kContinuousUniform;
  if (method == "auto") {
    if (continuous) {
      method = "quadrature";
    } else if (s.model.kind() == PayoffKind::kDiscreteJoint &&
               multiset_count(s.model.as_discrete().atoms.size(), s.risk.n) > s.atom_cap) {
      method = "mc";
    } else {
      method = "exact";
    }
  }

  ObjectiveValue v;
  double stderr_u = 0.0;
  if (method == "mc") {
    const McEstimate est = evaluate_mc(s.model, k, s.risk, *s.mc);
    v = est.value;
    stderr_u = est.stderr_u;
  } else if (method == "quadrature") {
    if (!continuous) throw ValidationError("quadrature evaluation needs a continuous_uniform model");
    v = evaluate_continuous(s.model.as_continuous().x_max, k, s.risk);
  } else if (method == "exact") {
    if (continuous) throw ValidationError("exact evaluation needs a discrete or deterministic model");
    const DiscreteEvaluator ev = [&] {
      if (s.model.kind() == PayoffKind::kDiscreteJoint) {
        return DiscreteEvaluator(build_discrete_compound(s.model, s.risk.n, s.atom_cap));
      }
      const Deterministic& d = s.model.as_deterministic();
      CompoundReturnDistribution dist;
      dist.n = s.risk.n;
      dist.atoms.push_back({std::vector<double>(d.m, std::pow(1.0 + d.rate, s.risk.n)), 1.0});
      return DiscreteEvaluator(std::move(dist));
    }();
    v = evaluate_exact(ev.distribution(), k, s.risk);
  } else {
    throw ValidationError(fmt::format("unknown --method '{}' (auto, exact, quadrature, mc)", method));
  }

  os << "method,rho,n" << k_header(m) << ",u,mean_log,var_log,stderr_u\n";
  os << method << ',' << format_number(s.risk.rho) << ',' << s.risk.n << k_cells(k) << ','
     << format_number(v.u) << ',' << format_number(v.mean_log) << ',' << format_number(v.var_log)
     << ',' << format_number(stderr_u) << '\n';
  return kOk;
}

int cmd_optimize(const Scenario& s, const Flags& flags, std::ostream& os) {
  const auto ev = evaluator_for(s, s.risk.n);
  std::optional<AllocationVector> init;
  if (!flags.k.empty()) init = allocation_from(flags, ev->dimension());
  std::string method = flags.method == "auto" ? "pga" : flags.method;
  OptimizationResult r;
  if (method == "pga") {
    r = maximize(*ev, s.risk, s.solver, init);
  } else if (method == "grid") {
    r = grid_refine(*ev, s.risk, flags.levels, flags.grid_points.value_or(21), s.solver.kkt_tol);
  } else {
    throw ValidationError(fmt::format("unknown --method '{}' for optimize (pga, grid)", method));
  }
  os << "method,evaluator,rho,n" << k_header(ev->dimension())
     << ",u,iterations,converged,reason,kkt_satisfied,max_violation\n";
  os << method << ',' << ev->method() << ',' << format_number(s.risk.rho) << ',' << s.risk.n
     << k_cells(r.k_star) << ',' << format_number(r.u_star) << ',' << r.iterations << ','
     << yes_no(r.converged) << ',' << to_string(r.reason) << ',' << yes_no(r.kkt.satisfied) << ','
     << format_number(r.kkt.max_violation) << '\n';
  return r.converged ? kOk : kNumericalError;
}

int cmd_kkt_check(const Scenario& s, const Flags& flags, std::ostream& os, std::ostream& err) {
  if (flags.k.empty()) throw ValidationError("kkt-check needs --k");
  const auto ev = evaluator_for(s, s.risk.n);
  const AllocationVector k = allocation_from(flags, ev->dimension());
  const double tol = flags.tol.value_or(s.solver.kkt_tol);
  const KktReport report = certify(*ev, k, s.risk, tol);
  os << "i,k,g,active,margin,ok\n";
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double g = report.residuals[i];
    const double margin = report.active[i] ? std::abs(g - 1.0) : g - 1.0;
    os << i + 1 << ',' << format_number(k[i]) << ',' << format_number(g) << ','
       << yes_no(report.active[i]) << ',' << format_number(margin) << ',' << yes_no(margin <= tol)
       << '\n';
  }
  err << (report.satisfied
              ? fmt::format("optimality conditions hold within {}\n", tol)
              : fmt::format("optimality conditions violated by {}\n", format_number(report.max_violation)));
  return report.satisfied ? kOk : kKktViolated;
}

int cmd_sweep(const Scenario& s, const Flags& flags, std::ostream& os, std::ostream& err) {
  const std::vector<double> rhos = parse_rho_grid(flags.rho_grid.empty() ? "0:1:0.1" : flags.rho_grid);
  const auto ev = evaluator_for(s, s.risk.n);
  std::optional<AllocationVector> init;
  if (!flags.k.empty()) init = allocation_from(flags, ev->dimension());
  const std::vector<SweepRow> rows = sweep_rho(*ev, s.risk.n, rhos, s.solver, init);
  os << "rho" << k_header(ev->dimension()) << ",u,iterations,converged,kkt_satisfied,error\n";
  bool failed = false;
  for (const SweepRow& row : rows) {
    os << format_number(row.rho);
    if (row.result) {
      const OptimizationResult& r = *row.result;
      os << k_cells(r.k_star) << ',' << format_number(r.u_star) << ',' << r.iterations << ','
         << yes_no(r.converged) << ',' << yes_no(r.kkt.satisfied) << ",\n";
      failed = failed || !r.converged;
    } else {
      os << std::string(ev->dimension(), ',') << ",,,,\"" << row.error << "\"\n";
      err << fmt::format("rho = {}: {}\n", format_number(row.rho), row.error);
      failed = true;
    }
  }
  return failed ? kNumericalError : kOk;
}

int cmd_density(const Scenario& s, const Flags& flags, std::ostream& os) {
  if (s.model.kind() != PayoffKind::kContinuousUniform) {
    throw ValidationError("density needs a continuous_uniform model");
  }
  const double x_max = s.model.as_continuous().x_max;
  const std::size_t points = flags.grid_points.value_or(101);
  if (points == 0) throw ValidationError("--grid-points must be positive");
  os << "n,z,pdf,cdf\n";
  for (int n : periods(s, flags)) {
    const ErlangCompoundDensity density(n, x_max);
    const double width = density.support_upper() + 1.0;
    for (std::size_t j = 1; j <= points; ++j) {
      const double z = -1.0 + width * static_cast<double>(j) / static_cast<double>(points + 1);
      os << n << ',' << format_number(z) << ',' << format_number(erlang_compound_pdf(z, density))
         << ',' << format_number(erlang_compound_cdf(z, density)) << '\n';
    }
  }
  return kOk;
}

int cmd_convexity(const Scenario& s, const Flags& flags, std::ostream& os) {
  if (s.model.dimension() != 2) throw ValidationError("convexity needs a two-alternative model");
  const std::size_t points = flags.grid_points.value_or(49);
  if (points == 0) throw ValidationError("--grid-points must be positive");
  os << "n,k2,d2v\n";
  for (int n : periods(s, flags)) {
    std::function<double(double)> d2v;
    std::optional<CompoundReturnDistribution> dist;
    if (s.model.kind() == PayoffKind::kContinuousUniform) {
      const double x_max = s.model.as_continuous().x_max;
      d2v = [x_max, n](double k2) { return continuous_logvar_second_derivative(x_max, n, k2); };
    } else {
      const auto ev = evaluator_for(s, n);
      const auto* discrete = dynamic_cast<const DiscreteEvaluator*>(ev.get());
      dist = discrete->distribution();
      d2v = [&dist](double k2) {
        const double h = kSecondDerivativeStep;
        auto v = [&](double x) {
          const std::vector<double> w = {1.0 - x, x};
          return discrete_moments(*dist, w).var_log;
        };
        return (v(k2 - h) - 2.0 * v(k2) + v(k2 + h)) / (h * h);
      };
    }
    for (std::size_t j = 1; j <= points; ++j) {
      const double k2 = static_cast<double>(j) / static_cast<double>(points + 1);
      os << n << ',' << format_number(k2) << ',' << format_number(d2v(k2)) << '\n';
    }
  }
  return kOk;
}

}  // namespace

std::string format_number(double x) {
  if (x == 0.0) return "0";
  return fmt::format("{:.12g}", x);
}

std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
    out.push_back(parse_real(text.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_rho_grid(std::string_view text) {
  const std::size_t c1 = text.find(':');
  const std::size_t c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos) {
    throw ParseError(fmt::format("--rho-grid '{}' must look like a:b:step", text));
  }
  const double a = parse_real(text.substr(0, c1));
  const double b = parse_real(text.substr(c1 + 1, c2 - c1 - 1));
  const double step = parse_real(text.substr(c2 + 1));
  if (!(step > 0.0) || !(b >= a) || !(a >= 0.0)) {
    throw ValidationError(fmt::format("--rho-grid '{}' needs 0 <= a <= b and step > 0", text));
  }
  constexpr double kSnap = 1e-12;
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + kSnap * 1e3)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double v = a + static_cast<double>(i) * step;
    v = std::round(v / kSnap) * kSnap;
    if (std::abs(v - b) <= kSnap * std::max(1.0, std::abs(b))) v = b;
    out.push_back(std::min(v, b));
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Risk-sensitive growth-optimal allocation: evaluate, optimize, certify, sweep",
               "rskelly"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", flags.scenario, "Scenario JSON file")->required();
    sub->add_option("--output", flags.output, "Write the table here instead of stdout");
    sub->add_option("--format", flags.format, "Output format (csv)");
    sub->add_option("--seed", flags.seed, "Seed for Monte Carlo and random restarts");
  };

  CLI::App* evaluate = app.add_subcommand("evaluate", "Objective value at one allocation");
  add_common(evaluate);
  evaluate->add_option("--k", flags.k, "Allocation, e.g. \"0.6,0.4\" (default: uniform)");
  evaluate->add_option("--method", flags.method, "auto, exact, quadrature or mc");
  evaluate->add_option("--samples", flags.samples, "Monte Carlo sample count");

  CLI::App* optimize = app.add_subcommand("optimize", "Maximize the objective over the simplex");
  add_common(optimize);
  optimize->add_option("--k", flags.k, "Initial allocation");
  optimize->add_option("--method", flags.method, "pga (projected gradient) or grid");
  optimize->add_option("--grid-points", flags.grid_points, "Grid points per axis and level");
  optimize->add_option("--levels", flags.levels, "Grid refinement levels");
  optimize->add_option("--samples", flags.samples, "Samples for the sample-average evaluator");

  CLI::App* kkt = app.add_subcommand("kkt-check", "Check the optimality conditions at --k");
  add_common(kkt);
  kkt->add_option("--k", flags.k, "Allocation to certify")->required();
  kkt->add_option("--tol", flags.tol, "Tolerance (default: solver.kkt_tol)");
  kkt->add_option("--samples", flags.samples, "Samples for the sample-average evaluator");

  CLI::App* sweep = app.add_subcommand("sweep", "Optimal allocation for each rho of a grid");
  add_common(sweep);
  sweep->add_option("--rho-grid", flags.rho_grid, "a:b:step, inclusive (default 0:1:0.1)");
  sweep->add_option("--k", flags.k, "Initial allocation for the first row");
  sweep->add_option("--samples", flags.samples, "Samples for the sample-average evaluator");

  CLI::App* density = app.add_subcommand("density", "Density and CDF of the compound payoff");
  add_common(density);
  density->add_option("--grid-points", flags.grid_points, "Interior support points (default 101)");
  density->add_option("--n-list", flags.n_list, "Periods, e.g. \"1,5,10\" (default: risk.n)");

  CLI::App* convexity = app.add_subcommand("convexity", "Second derivative of the log-variance in K2");
  add_common(convexity);
  convexity->add_option("--grid-points", flags.grid_points, "Interior K2 points (default 49)");
  convexity->add_option("--n-list", flags.n_list, "Periods, e.g. \"1,5,10\" (default: risk.n)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (flags.format != "csv") throw ValidationError(fmt::format("unsupported --format '{}'", flags.format));
    Scenario s = parse_scenario(flags.scenario);
    apply_overrides(s, flags);

    std::ofstream file;
    if (!flags.output.empty()) {
      file.open(flags.output, std::ios::binary);
      if (!file) throw ValidationError(fmt::format("cannot write '{}'", flags.output));
    }
    std::ostream& os = flags.output.empty() ? out : file;

    if (evaluate->parsed()) return cmd_evaluate(s, flags, os);
    if (optimize->parsed()) return cmd_optimize(s, flags, os);
    if (kkt->parsed()) return cmd_kkt_check(s, flags, os, err);
    if (sweep->parsed()) return cmd_sweep(s, flags, os, err);
    if (density->parsed()) return cmd_density(s, flags, os);
    if (convexity->parsed()) return cmd_convexity(s, flags, os);
    return kInputError;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kInputError;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kInputError;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kInputError;
  } catch (const DimensionMismatch& e) {
    err << "invalid input: " << e.what() << '\n';
    return kInputError;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  }
}

}  // namespace rskelly::cli
