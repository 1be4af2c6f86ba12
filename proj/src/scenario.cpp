#include "rskelly/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "rskelly/error.hpp"

namespace rskelly {

namespace {

using nlohmann::json;

// Typed access to one JSON object, tracking its field path for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : j_.items()) {
      bool known = false;
      for (std::string_view k : keys) known = known || key == k;
      if (!known) throw ParseError(fmt::format("unknown key '{}'", field(key)));
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) const {
    if (!j_.contains(key)) throw ParseError(fmt::format("missing required key '{}'", field(key)));
    return j_.at(key);
  }

  Node object(const std::string& key) const { return Node(at(key), field(key)); }

  double number(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) throw ParseError(fmt::format("'{}' must be a number", field(key)));
    return v.get<double>();
  }

  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::int64_t integer(const std::string& key) const {
    const json& v = at(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    throw ParseError(fmt::format("'{}' must be an integer", field(key)));
  }

  std::size_t count_or(const std::string& key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    const std::int64_t v = integer(key);
    if (v < 0) throw ValidationError(fmt::format("'{}' must be nonnegative", field(key)));
    return static_cast<std::size_t>(v);
  }

  std::uint64_t seed_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    return static_cast<std::uint64_t>(integer(key));
  }

  std::string string(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) throw ParseError(fmt::format("'{}' must be a string", field(key)));
    return v.get<std::string>();
  }

  std::string field(std::string_view key) const {
    return path_.empty() ? std::string(key) : fmt::format("{}.{}", path_, key);
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(std::string_view what) const {
    throw ParseError(fmt::format("{}: {}", path_.empty() ? "<root>" : path_, what));
  }

 private:
  const json& j_;
  std::string path_;
};

PayoffModel parse_model(const Node& node) {
  const std::string kind = node.string("kind");
  if (kind == "discrete_joint") {
    node.allow_only({"kind", "atoms"});
    const json& atoms = node.at("atoms");
    if (!atoms.is_array()) throw ParseError(fmt::format("'{}' must be an array", node.field("atoms")));
    std::vector<PayoffAtom> parsed;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      const Node atom(atoms[j], fmt::format("{}[{}]", node.field("atoms"), j));
      atom.allow_only({"x", "prob"});
      const json& x = atom.at("x");
      if (!x.is_array()) throw ParseError(fmt::format("'{}' must be an array", atom.field("x")));
      PayoffAtom a;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!x[i].is_number()) {
          throw ParseError(fmt::format("'{}[{}]' must be a number", atom.field("x"), i));
        }
        a.x.push_back(x[i].get<double>());
      }
      a.prob = atom.number("prob");
      parsed.push_back(std::move(a));
    }
    return PayoffModel::discrete(std::move(parsed));
  }
  if (kind == "continuous_uniform") {
    node.allow_only({"kind", "x_max"});
    return PayoffModel::continuous_uniform(node.number("x_max"));
  }
  if (kind == "deterministic") {
    node.allow_only({"kind", "rate", "m"});
    const std::int64_t m = node.integer("m");
    if (m < 1) throw ValidationError(fmt::format("'{}' must be >= 1", node.field("m")));
    return PayoffModel::deterministic(node.number("rate"), static_cast<std::size_t>(m));
  }
  throw ParseError(fmt::format(
      "'{}' = '{}' is not one of discrete_joint, continuous_uniform, deterministic",
      node.field("kind"), kind));
}

}  // namespace

Scenario parse_scenario_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("invalid JSON: {}", e.what()));
  }

  const Node root(doc, "");
  root.allow_only({"schema_version", "labels", "model", "risk", "solver", "mc", "evaluation"});

  Scenario s;
  s.schema_version = static_cast<int>(root.integer("schema_version"));
  if (s.schema_version != kScenarioSchemaVersion) {
    throw ParseError(fmt::format("schema_version {} is not supported (expected {})",
                                      s.schema_version, kScenarioSchemaVersion));
  }

  if (root.has("labels")) {
    const Node labels = root.object("labels");
    for (const auto& [key, value] : labels.raw().items()) {
      s.labels[key] = labels.string(key);
    }
  }

  s.model = parse_model(root.object("model"));

  const Node risk = root.object("risk");
  risk.allow_only({"rho", "n"});
  const double rho = risk.number("rho");
  const std::int64_t n = risk.integer("n");
  if (!(rho >= 0.0)) throw ValidationError(fmt::format("risk.rho = {} violates rho >= 0", rho));
  if (n < 1 || n > std::numeric_limits<int>::max()) {
    throw ValidationError(fmt::format("risk.n = {} violates n >= 1", n));
  }
  s.risk = RiskSpec(rho, static_cast<int>(n));

  if (root.has("solver")) {
    const Node solver = root.object("solver");
    solver.allow_only(
        {"max_iters", "step_init", "backtrack", "grad_tol", "kkt_tol", "restarts", "seed"});
    OptimizerOptions& o = s.solver;
    o.max_iters = solver.count_or("max_iters", o.max_iters);
    o.step_init = solver.number_or("step_init", o.step_init);
    o.backtrack = solver.number_or("backtrack", o.backtrack);
    o.grad_tol = solver.number_or("grad_tol", o.grad_tol);
    o.kkt_tol = solver.number_or("kkt_tol", o.kkt_tol);
    o.restarts = solver.count_or("restarts", o.restarts);
    o.seed = solver.seed_or("seed", o.seed);
    try {
      o.validate();
    } catch (const DomainError& e) {
      throw ValidationError(fmt::format("solver: {}", e.what()));
    }
  }

  if (root.has("mc")) {
    const Node mc = root.object("mc");
    mc.allow_only({"seed", "samples", "batch", "threads"});
    McConfig c;
    c.seed = mc.seed_or("seed", c.seed);
    c.samples = mc.count_or("samples", c.samples);
    c.batch = mc.count_or("batch", c.batch);
    c.threads = static_cast<unsigned>(mc.count_or("threads", c.threads));
    if (c.samples < 2) throw ValidationError("mc.samples must be >= 2");
    if (c.batch < 1) throw ValidationError("mc.batch must be >= 1");
    s.mc = c;
  }

  if (root.has("evaluation")) {
    const Node ev = root.object("evaluation");
    ev.allow_only({"atom_cap"});
    s.atom_cap = ev.count_or("atom_cap", s.atom_cap);
    if (s.atom_cap < 1) throw ValidationError("evaluation.atom_cap must be >= 1");
  }
  return s;
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open scenario file '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace rskelly
