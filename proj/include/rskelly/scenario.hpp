#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "rskelly/objective.hpp"
#include "rskelly/optimizer.hpp"
#include "rskelly/payoff.hpp"

namespace rskelly {

inline constexpr int kScenarioSchemaVersion = 1;

/// A validated problem description loaded from a JSON scenario file.
///
///   {
///     "schema_version": 1,
///     "labels": {"name": "betting p=0.6"},
///     "model": {"kind": "discrete_joint",
///               "atoms": [{"x": [0, 0.5], "prob": 0.6}, {"x": [0, -0.5], "prob": 0.4}]},
///     "risk": {"rho": 0.0, "n": 1},
///     "solver": {"max_iters": 10000, "step_init": 1.0, "backtrack": 0.5, "grad_tol": 1e-10,
///                "kkt_tol": 1e-6, "restarts": 5, "seed": 0},
///     "mc": {"seed": 0, "samples": 1000000, "batch": 65536, "threads": 1},
///     "evaluation": {"atom_cap": 100000}
///   }
///
/// Model kinds: "discrete_joint" (atoms), "continuous_uniform" (x_max), "deterministic"
/// (rate, m). "labels", "solver", "mc" and "evaluation" are optional; unknown keys are errors.
struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  PayoffModel model = PayoffModel::deterministic(0.0, 1);
  RiskSpec risk{0.0, 1};
  OptimizerOptions solver;
  std::optional<McConfig> mc;
  std::size_t atom_cap = kDefaultAtomCap;
  std::map<std::string, std::string> labels;
};

/// Throws ParseError (syntax, type, missing or unknown keys; with line or field path) or
/// ValidationError (a model invariant is violated).
Scenario parse_scenario_text(std::string_view text);

Scenario parse_scenario(const std::filesystem::path& path);

}  // namespace rskelly
