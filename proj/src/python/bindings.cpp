#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rskelly/error.hpp"
#include "rskelly/kkt.hpp"
#include "rskelly/objective.hpp"
#include "rskelly/optimizer.hpp"
#include "rskelly/payoff.hpp"
#include "rskelly/scenario.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace rskelly;

namespace {

py::dict to_dict(const ObjectiveValue& v) {
  return py::dict("u"_a = v.u, "mean_log"_a = v.mean_log, "var_log"_a = v.var_log);
}

py::dict to_dict(const KktReport& r) {
  return py::dict("residuals"_a = r.residuals, "active"_a = r.active, "satisfied"_a = r.satisfied,
                  "max_violation"_a = r.max_violation);
}

py::dict to_dict(const OptimizationResult& r) {
  const auto k = r.k_star.values();
  return py::dict("k_star"_a = std::vector<double>(k.begin(), k.end()), "u_star"_a = r.u_star,
                  "iterations"_a = r.iterations, "converged"_a = r.converged,
                  "reason"_a = to_string(r.reason), "kkt"_a = to_dict(r.kkt));
}

std::unique_ptr<Evaluator> evaluator_for(const PayoffModel& model, int n) {
  return make_evaluator(model, n);
}

OptimizerOptions options(std::size_t restarts, double kkt_tol) {
  OptimizerOptions o;
  o.restarts = restarts;
  o.kkt_tol = kkt_tol;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Risk-sensitive growth-optimal allocation on the unit simplex";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
  py::register_exception<CapExceeded>(m, "CapExceeded", base.ptr());
  py::register_exception<NonPositiveReturn>(m, "NonPositiveReturn", base.ptr());
  py::register_exception<QuadratureNotConverged>(m, "QuadratureNotConverged", base.ptr());
  py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
  py::register_exception<DimensionTooLarge>(m, "DimensionTooLarge", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());

  py::class_<PayoffModel>(m, "PayoffModel")
      .def_static(
          "discrete",
          [](const std::vector<std::pair<std::vector<double>, double>>& atoms) {
            std::vector<PayoffAtom> a;
            for (const auto& [x, p] : atoms) a.push_back({x, p});
            return PayoffModel::discrete(std::move(a));
          },
          "atoms"_a, "Atoms as (payoff vector, probability) pairs.")
      .def_static("continuous_uniform", &PayoffModel::continuous_uniform, "x_max"_a)
      .def_static("deterministic", &PayoffModel::deterministic, "rate"_a, "m"_a)
      .def_property_readonly("dimension", &PayoffModel::dimension);

  m.def("betting_model", &betting_model, "p"_a);
  m.def("inventory_model", &inventory_model, "x_max"_a);

  m.def(
      "build_discrete_compound",
      [](const PayoffModel& model, int n, std::size_t atom_cap) {
        const CompoundReturnDistribution d = build_discrete_compound(model, n, atom_cap);
        std::vector<std::pair<std::vector<double>, double>> out;
        for (const ReturnAtom& a : d.atoms) out.emplace_back(a.r, a.prob);
        return out;
      },
      "model"_a, "n"_a, "atom_cap"_a = kDefaultAtomCap);

  m.def(
      "erlang_compound_pdf",
      [](double z, int n, double x_max) { return erlang_compound_pdf(z, {n, x_max}); }, "z"_a,
      "n"_a, "x_max"_a);
  m.def(
      "erlang_compound_cdf",
      [](double z, int n, double x_max) { return erlang_compound_cdf(z, {n, x_max}); }, "z"_a,
      "n"_a, "x_max"_a);
  m.def("uniform_to_exponential", &uniform_to_exponential, "x"_a, "x_max"_a);
  m.def("sample_compound", &sample_compound, "model"_a, "n"_a, "seed"_a, "count"_a,
        "first_index"_a = 0);

  m.def(
      "evaluate",
      [](const PayoffModel& model, const std::vector<double>& k, double rho, int n) {
        const auto ev = evaluator_for(model, n);
        return to_dict(assemble_objective(ev->moments(AllocationVector(k).values()), RiskSpec(rho, n)));
      },
      "model"_a, "k"_a, "rho"_a, "n"_a,
      "Objective by exact atom sums (discrete) or quadrature (continuous uniform).");
  m.def(
      "evaluate_mc",
      [](const PayoffModel& model, const std::vector<double>& k, double rho, int n,
         std::uint64_t seed, std::size_t samples) {
        McConfig mc;
        mc.seed = seed;
        mc.samples = samples;
        const McEstimate e = evaluate_mc(model, AllocationVector(k), RiskSpec(rho, n), mc);
        py::dict d = to_dict(e.value);
        d["stderr_u"] = e.stderr_u;
        return d;
      },
      "model"_a, "k"_a, "rho"_a, "n"_a, "seed"_a = 0, "samples"_a = 1'000'000);
  m.def(
      "gradient",
      [](const PayoffModel& model, const std::vector<double>& k, double rho, int n) {
        const auto ev = evaluator_for(model, n);
        return objective_gradient(ev->moments(AllocationVector(k).values()), RiskSpec(rho, n));
      },
      "model"_a, "k"_a, "rho"_a, "n"_a);
  m.def(
      "certify",
      [](const PayoffModel& model, const std::vector<double>& k, double rho, int n, double tol) {
        const auto ev = evaluator_for(model, n);
        return to_dict(certify(*ev, AllocationVector(k), RiskSpec(rho, n), tol));
      },
      "model"_a, "k"_a, "rho"_a, "n"_a, "tol"_a = 1e-6);

  m.def("solve_two_asset_betting", &solve_two_asset_betting, "p"_a, "rho"_a, "tol"_a = 1e-12);
  m.def("betting_logvar_second_derivative", &betting_logvar_second_derivative, "p"_a, "k2"_a);
  m.def(
      "continuous_logvar_second_derivative",
      [](double x_max, int n, double k2) { return continuous_logvar_second_derivative(x_max, n, k2); },
      "x_max"_a, "n"_a, "k2"_a);

  m.def(
      "project_to_simplex",
      [](const std::vector<double>& v) {
        const AllocationVector k = project_to_simplex(v);
        return std::vector<double>(k.values().begin(), k.values().end());
      },
      "v"_a);
  m.def(
      "maximize",
      [](const PayoffModel& model, double rho, int n, std::size_t restarts, double kkt_tol) {
        const auto ev = evaluator_for(model, n);
        return to_dict(maximize(*ev, RiskSpec(rho, n), options(restarts, kkt_tol)));
      },
      "model"_a, "rho"_a, "n"_a, "restarts"_a = 5, "kkt_tol"_a = 1e-6);
  m.def(
      "grid_refine",
      [](const PayoffModel& model, double rho, int n, std::size_t levels, std::size_t points) {
        const auto ev = evaluator_for(model, n);
        return to_dict(grid_refine(*ev, RiskSpec(rho, n), levels, points));
      },
      "model"_a, "rho"_a, "n"_a, "levels"_a = 8, "points_per_level"_a = 21);
  m.def(
      "sweep_rho",
      [](const PayoffModel& model, int n, const std::vector<double>& rhos) {
        const auto ev = evaluator_for(model, n);
        py::list rows;
        for (const SweepRow& row : sweep_rho(*ev, n, rhos)) {
          py::dict d("rho"_a = row.rho, "error"_a = row.error);
          if (row.result) d["result"] = to_dict(*row.result);
          rows.append(d);
        }
        return rows;
      },
      "model"_a, "n"_a, "rhos"_a);
}
