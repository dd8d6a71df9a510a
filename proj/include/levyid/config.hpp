#ifndef LEVYID_CONFIG_HPP
#define LEVYID_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levyid/core.hpp"
#include "levyid/error.hpp"
#include "levyid/permanental.hpp"
#include "levyid/statlab.hpp"

// JSON run configurations. A document has the sections
//   process   family and parameters (required)
//   identity  a, plus optional ladder / mixing / split settings
//   grid      evaluation times (path families)
//   panel     Laplace functional entries {alphas, times} or {alphas, states}
//   mc        {N, B, z_crit}
//   seed      unsigned 64-bit integer
// Unknown keys are rejected so that typos surface as config errors. A suite
// document instead holds "runs", an array of run documents that inherit the
// top-level mc and seed. README.md lists every field.

namespace levyid::config {

using json = nlohmann::ordered_json;

struct RunConfig {
  std::string name;
  ProcessSpec process;
  double a = 1.0;             // path families
  std::size_t state_a = 0;    // permanental
  TimeGrid grid{{0.5, 1.0, 1.5, 2.0, 3.0}};
  LevyFunctionalPanel panel;  // path families
  StatePanel state_panel;     // permanental
  McOptions mc;
  std::uint64_t seed = 1;
  std::vector<double> deltas;  // empty: no limit ladder
  std::size_t max_replicates = 1000000;
  std::vector<double> mixing_means{1.0, 3.0};
  std::vector<double> split_points;

  bool permanental() const { return std::holds_alternative<PermanentalSpec>(process); }
};

struct SuiteConfig {
  std::vector<RunConfig> runs;
  std::uint64_t seed = 1;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where.empty() ? what : where + ": " + what);
}

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) fail(where, "unknown key '" + k + "'");
}

inline const json& need(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) fail(where, std::string("missing '") + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

inline double number(const json& j, const std::string& where, const char* key) {
  return number(need(j, where, key), where + "." + key);
}

inline double number_or(const json& j, const std::string& where, const char* key, double fallback) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

inline std::uint64_t count(const json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) fail(where, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline JumpSizeLaw parse_jump_size(const json& j, const std::string& where) {
  const auto type = need(j, where, "type");
  if (!type.is_string()) fail(where + ".type", "expected a string");
  const std::string t = type.get<std::string>();
  if (t == "exponential") {
    allow_keys(j, where, {"type", "mean"});
    return ExponentialJumps{number(j, where, "mean")};
  }
  if (t == "gamma") {
    allow_keys(j, where, {"type", "shape", "rate"});
    return GammaJumps{number(j, where, "shape"), number(j, where, "rate")};
  }
  if (t == "constant") {
    allow_keys(j, where, {"type", "value"});
    return ConstantJumps{number(j, where, "value")};
  }
  if (t == "discrete") {
    allow_keys(j, where, {"type", "atoms", "probs"});
    return DiscreteJumps{numbers(need(j, where, "atoms"), where + ".atoms"), numbers(need(j, where, "probs"), where + ".probs")};
  }
  fail(where + ".type", "unknown jump law '" + t + "'");
}

inline JumpLawSpec parse_jump_law(const json& j, const std::string& where) {
  allow_keys(j, where, {"rate", "law"});
  return JumpLawSpec{number(j, where, "rate"), parse_jump_size(need(j, where, "law"), where + ".law")};
}

inline Kernel parse_kernel(const json& j, const std::string& where) {
  const auto type = need(j, where, "type");
  if (!type.is_string()) fail(where + ".type", "expected a string");
  const std::string t = type.get<std::string>();
  if (t == "indicator") {
    allow_keys(j, where, {"type", "length"});
    return IndicatorKernel{number(j, where, "length")};
  }
  if (t == "exp_decay") {
    allow_keys(j, where, {"type", "decay"});
    return ExpDecayKernel{number(j, where, "decay")};
  }
  if (t == "power_cutoff") {
    allow_keys(j, where, {"type", "power", "cutoff"});
    return PowerCutoffKernel{number(j, where, "power"), number(j, where, "cutoff")};
  }
  if (t == "tabulated") {
    allow_keys(j, where, {"type", "knots", "values"});
    return TabulatedKernel{numbers(need(j, where, "knots"), where + ".knots"), numbers(need(j, where, "values"), where + ".values")};
  }
  fail(where + ".type", "unknown kernel '" + t + "'");
}

inline KilledChain parse_chain(const json& j, const std::string& where) {
  const auto& rates = need(j, where, "rates");
  const auto kill = numbers(need(j, where, "kill"), where + ".kill");
  const auto n = static_cast<Eigen::Index>(kill.size());
  if (!rates.is_array() || static_cast<Eigen::Index>(rates.size()) != n) fail(where + ".rates", "expected an n x n array");
  KilledChain chain{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = numbers(rates[static_cast<std::size_t>(i)], where + ".rates[" + std::to_string(i) + "]");
    if (static_cast<Eigen::Index>(row.size()) != n) fail(where + ".rates", "expected an n x n array");
    for (Eigen::Index k = 0; k < n; ++k) chain.rates(i, k) = i == k ? 0.0 : row[static_cast<std::size_t>(k)];
    chain.kill(i) = kill[static_cast<std::size_t>(i)];
  }
  return chain;
}

inline ProcessSpec parse_process(const json& j) {
  const std::string where = "process";
  const auto& fam = need(j, where, "family");
  if (!fam.is_string()) fail(where + ".family", "expected a string");
  const std::string f = fam.get<std::string>();
  ProcessSpec spec;
  if (f == "poisson") {
    allow_keys(j, where, {"family", "lambda"});
    spec = PoissonSpec{number_or(j, where, "lambda", 1.0)};
  } else if (f == "tempered_stable") {
    allow_keys(j, where, {"family", "alpha"});
    spec = TemperedStableSpec{number_or(j, where, "alpha", 0.5)};
  } else if (f == "sato") {
    allow_keys(j, where, {"family", "H", "bdlp", "s_max"});
    SatoSpec s;
    s.H = number_or(j, where, "H", 1.0);
    s.bdlp = parse_jump_law(need(j, where, "bdlp"), where + ".bdlp");
    if (j.contains("s_max")) s.s_max = number(j.at("s_max"), where + ".s_max");
    spec = s;
  } else if (f == "convolution") {
    allow_keys(j, where, {"family", "kernel", "driver"});
    spec = ConvSpec{parse_kernel(need(j, where, "kernel"), where + ".kernel"), parse_jump_law(need(j, where, "driver"), where + ".driver")};
  } else if (f == "permanental") {
    allow_keys(j, where, {"family", "rates", "kill", "beta"});
    spec = PermanentalSpec{parse_chain(j, where), number_or(j, where, "beta", 1.0)};
  } else {
    fail(where + ".family", "unknown family '" + f + "'");
  }
  try {
    validate(spec);
  } catch (const DomainError& e) {
    fail(where, e.what());
  }
  return spec;
}

// --- serialization of the resolved configuration ------------------------------

inline json to_json(const JumpSizeLaw& law) {
  return std::visit(overloaded{
                        [](const ExponentialJumps& l) { return json{{"type", "exponential"}, {"mean", l.mean}}; },
                        [](const GammaJumps& l) { return json{{"type", "gamma"}, {"shape", l.shape}, {"rate", l.rate}}; },
                        [](const ConstantJumps& l) { return json{{"type", "constant"}, {"value", l.value}}; },
                        [](const DiscreteJumps& l) { return json{{"type", "discrete"}, {"atoms", l.atoms}, {"probs", l.probs}}; },
                    },
                    law);
}

inline json to_json(const JumpLawSpec& s) { return json{{"rate", s.rate}, {"law", to_json(s.law)}}; }

inline json to_json(const Kernel& k) {
  return std::visit(overloaded{
                        [](const IndicatorKernel& x) { return json{{"type", "indicator"}, {"length", x.length}}; },
                        [](const ExpDecayKernel& x) { return json{{"type", "exp_decay"}, {"decay", x.decay}}; },
                        [](const PowerCutoffKernel& x) { return json{{"type", "power_cutoff"}, {"power", x.power}, {"cutoff", x.cutoff}}; },
                        [](const TabulatedKernel& x) { return json{{"type", "tabulated"}, {"knots", x.knots}, {"values", x.values}}; },
                    },
                    k);
}

inline json to_json(const ProcessSpec& spec) {
  return std::visit(overloaded{
                        [](const PoissonSpec& s) { return json{{"family", "poisson"}, {"lambda", s.lambda}}; },
                        [](const TemperedStableSpec& s) { return json{{"family", "tempered_stable"}, {"alpha", s.alpha}}; },
                        [](const SatoSpec& s) {
                          json j{{"family", "sato"}, {"H", s.H}, {"bdlp", to_json(s.bdlp)}};
                          if (s.s_max) j["s_max"] = *s.s_max;
                          return j;
                        },
                        [](const ConvSpec& s) {
                          return json{{"family", "convolution"}, {"kernel", to_json(s.kernel)}, {"driver", to_json(s.driver)}};
                        },
                        [](const PermanentalSpec& s) {
                          const auto n = s.chain.rates.rows();
                          json rates = json::array();
                          for (Eigen::Index i = 0; i < n; ++i) {
                            json row = json::array();
                            for (Eigen::Index k = 0; k < n; ++k) row.push_back(i == k ? 0.0 : s.chain.rates(i, k));
                            rates.push_back(row);
                          }
                          std::vector<double> kill(s.chain.kill.data(), s.chain.kill.data() + s.chain.kill.size());
                          return json{{"family", "permanental"}, {"rates", rates}, {"kill", kill}, {"beta", s.beta}};
                        },
                    },
                    spec);
}

inline json mc_json(const McOptions& mc) {
  return json{{"N", mc.replicates}, {"B", mc.bootstrap}, {"z_crit", mc.z_crit}};
}

inline McOptions parse_mc(const json& j, McOptions base) {
  const std::string where = "mc";
  allow_keys(j, where, {"N", "B", "z_crit"});
  if (j.contains("N")) base.replicates = count(j.at("N"), "mc.N");
  if (j.contains("B")) base.bootstrap = static_cast<int>(count(j.at("B"), "mc.B"));
  if (j.contains("z_crit")) base.z_crit = number(j.at("z_crit"), "mc.z_crit");
  if (base.replicates < 2) fail(where, "N must be at least 2");
  if (base.bootstrap < 2) fail(where, "B must be at least 2");
  if (!(base.z_crit > 0.0)) fail(where, "z_crit must be > 0");
  return base;
}

inline std::uint64_t parse_seed(const json& j) {
  return count(j, "seed");
}

}  // namespace detail

/// The configuration as the run sees it, with every default filled in.
inline json resolved(const RunConfig& c) {
  json identity;
  if (c.permanental()) {
    identity["a"] = c.state_a;
  } else {
    identity["a"] = c.a;
    if (!c.deltas.empty()) {
      identity["deltas"] = c.deltas;
      identity["max_replicates"] = c.max_replicates;
    }
    if (std::holds_alternative<PoissonSpec>(c.process)) identity["mixing_means"] = c.mixing_means;
    identity["split_points"] = c.split_points;
  }
  json panel = json::array();
  if (c.permanental()) {
    for (const auto& e : c.state_panel) panel.push_back(json{{"alphas", e.alphas}, {"states", e.states}});
  } else {
    for (const auto& e : c.panel.entries) panel.push_back(json{{"alphas", e.alphas}, {"times", e.times}});
  }
  json out;
  if (!c.name.empty()) out["name"] = c.name;
  out["process"] = detail::to_json(c.process);
  out["identity"] = identity;
  if (!c.permanental()) out["grid"] = std::vector<double>(c.grid.points().begin(), c.grid.points().end());
  out["panel"] = panel;
  out["mc"] = detail::mc_json(c.mc);
  out["seed"] = c.seed;
  return out;
}

/// Parses one run document. `defaults` supplies mc and seed for suite members.
inline RunConfig parse_run(const json& j, const RunConfig& defaults = {}) {
  using namespace detail;
  allow_keys(j, "", {"name", "process", "identity", "grid", "panel", "mc", "seed"});
  RunConfig c;
  c.mc = defaults.mc;
  c.seed = defaults.seed;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) fail("name", "expected a string");
    c.name = j.at("name").get<std::string>();
  }
  c.process = parse_process(need(j, "", "process"));
  if (j.contains("mc")) c.mc = parse_mc(j.at("mc"), c.mc);
  if (j.contains("seed")) c.seed = parse_seed(j.at("seed"));

  const json identity = j.contains("identity") ? j.at("identity") : json::object();
  if (c.permanental()) {
    allow_keys(identity, "identity", {"a"});
    c.state_a = identity.contains("a") ? count(identity.at("a"), "identity.a") : 0;
    const auto n = std::get<PermanentalSpec>(c.process).chain.size();
    if (c.state_a >= n) fail("identity.a", "state index out of range");
  } else {
    allow_keys(identity, "identity", {"a", "deltas", "max_replicates", "mixing_means", "split_points"});
    c.a = number_or(identity, "identity", "a", 1.0);
    if (identity.contains("deltas")) c.deltas = numbers(identity.at("deltas"), "identity.deltas");
    if (identity.contains("max_replicates")) c.max_replicates = count(identity.at("max_replicates"), "identity.max_replicates");
    if (identity.contains("mixing_means")) {
      c.mixing_means = numbers(identity.at("mixing_means"), "identity.mixing_means");
      if (c.mixing_means.size() != 2) fail("identity.mixing_means", "expected two means");
      for (double m : c.mixing_means)
        if (!(m > 0.0)) fail("identity.mixing_means", "means must be > 0");
    }
    c.split_points = identity.contains("split_points") ? numbers(identity.at("split_points"), "identity.split_points")
                                                       : std::vector<double>{c.a};
    if (!(c.a > 0.0)) fail("identity.a", "a must be > 0");
  }

  try {
    if (!c.permanental() && j.contains("grid")) c.grid = TimeGrid(numbers(j.at("grid"), "grid"));
    if (!c.permanental() && !c.grid.contains(c.a)) fail("identity.a", "a must be a grid point");
    const json panel = j.contains("panel") ? j.at("panel") : json::array();
    if (!panel.is_array()) fail("panel", "expected an array of entries");
    for (std::size_t i = 0; i < panel.size(); ++i) {
      const std::string where = "panel[" + std::to_string(i) + "]";
      const auto alphas = numbers(need(panel[i], where, "alphas"), where + ".alphas");
      if (c.permanental()) {
        allow_keys(panel[i], where, {"alphas", "states"});
        std::vector<std::size_t> states;
        const auto& s = need(panel[i], where, "states");
        if (!s.is_array()) fail(where + ".states", "expected an array of state indices");
        for (const auto& x : s) states.push_back(count(x, where + ".states"));
        StatePanelEntry e{alphas, states};
        validate(e, std::get<PermanentalSpec>(c.process).chain.size());
        c.state_panel.push_back(std::move(e));
      } else {
        allow_keys(panel[i], where, {"alphas", "times"});
        PanelEntry e{alphas, numbers(need(panel[i], where, "times"), where + ".times")};
        validate(e, c.grid);
        c.panel.entries.push_back(std::move(e));
      }
    }
    if (panel.empty()) {
      if (c.permanental())
        c.state_panel.push_back(StatePanelEntry{{1.0}, {c.state_a}});
      else
        c.panel.entries.push_back(point_entry(1.0, c.a));
    }
  } catch (const DomainError& e) {
    fail("", e.what());
  }
  return c;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

/// Reads a run document, or a suite document holding "runs".
inline SuiteConfig parse_suite(const json& j) {
  using namespace detail;
  if (!j.is_object()) fail("", "config must be a JSON object");
  if (!j.contains("runs")) {
    SuiteConfig s;
    s.runs.push_back(parse_run(j));
    s.seed = s.runs.front().seed;
    return s;
  }
  allow_keys(j, "", {"runs", "mc", "seed"});
  RunConfig defaults;
  if (j.contains("mc")) defaults.mc = parse_mc(j.at("mc"), defaults.mc);
  if (j.contains("seed")) defaults.seed = parse_seed(j.at("seed"));
  const auto& runs = j.at("runs");
  if (!runs.is_array() || runs.empty()) fail("runs", "expected a nonempty array");
  SuiteConfig s;
  s.seed = defaults.seed;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    try {
      s.runs.push_back(parse_run(runs[i], defaults));
    } catch (const ConfigError& e) {
      throw ConfigError("runs[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return s;
}

}  // namespace levyid::config

#endif
