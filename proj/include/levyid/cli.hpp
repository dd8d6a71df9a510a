#ifndef LEVYID_CLI_HPP
#define LEVYID_CLI_HPP

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levyid/config.hpp"
#include "levyid/identities.hpp"
#include "levyid/levymeasure.hpp"
#include "levyid/limits.hpp"
#include "levyid/permanental.hpp"
#include "levyid/processes.hpp"
#include "levyid/report.hpp"

// Command-line front end. Exit codes: 0 when the report verdict passes (see
// report.hpp), 1 when it fails, 2 for usage, configuration or numerical errors.

namespace levyid::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

inline constexpr double kSplitTolerance = 1e-8;

using json = nlohmann::ordered_json;
using config::RunConfig;
using report::Report;

namespace detail {

inline void require_path_family(const RunConfig& c, const std::string& command) {
  if (c.permanental()) throw ConfigError(command + " needs a path-indexed family, not permanental");
}

inline std::string prefixed(const RunConfig& c, const std::string& check) {
  return c.name.empty() ? check : c.name + "/" + check;
}

inline void simulate(const RunConfig& c, const StreamFactory& streams, unsigned workers, Report& out,
                     std::vector<std::vector<double>>* draws) {
  McOptions mc = c.mc;
  mc.workers = workers;
  IdentityReport r;
  r.identity = "mean";
  r.family = family_name(c.process);
  r.z_crit = mc.z_crit;
  const auto path_streams = streams.fork("simulate/paths");
  if (c.permanental()) {
    const auto& spec = std::get<PermanentalSpec>(c.process);
    const Eigen::MatrixXd g = green_matrix(spec.chain);
    const PermanentalSampler sampler(g, spec.beta);
    const std::size_t n = spec.chain.size();
    PanelSamples samples(mc.replicates, n);
    parallel_for(mc.replicates, workers, [&](std::size_t i) {
      RngStream rng = path_streams.stream(i);
      const auto y = sampler(rng);
      std::copy(y.begin(), y.end(), samples.row(i).begin());
    });
    const auto est = bootstrap_panel(samples, {}, Normalization::self, mc.bootstrap, streams.fork("simulate/boot"), workers);
    const auto mean = permanental_mean(g, spec.beta);
    for (std::size_t x = 0; x < n; ++x) r.add("E y[" + std::to_string(x) + "]", est[x], exact(mean[x]));
    if (draws)
      for (std::size_t i = 0; i < mc.replicates; ++i) draws->emplace_back(samples.row(i).begin(), samples.row(i).end());
  } else {
    const std::size_t m = c.grid.size();
    PanelSamples samples(mc.replicates, m);
    parallel_for(mc.replicates, workers, [&](std::size_t i) {
      RngStream rng = path_streams.stream(i);
      const Path p = sample_path(rng, c.process, c.grid);
      for (std::size_t k = 0; k < m; ++k) samples(i, k) = p[k];
    });
    const auto est = bootstrap_panel(samples, {}, Normalization::self, mc.bootstrap, streams.fork("simulate/boot"), workers);
    for (std::size_t k = 0; k < m; ++k)
      r.add("E y(" + Report::format(c.grid[k]) + ")", est[k], exact(mean_function(c.process, c.grid[k])));
    if (draws)
      for (std::size_t i = 0; i < mc.replicates; ++i) draws->emplace_back(samples.row(i).begin(), samples.row(i).end());
  }
  r.finalize();
  out.add(prefixed(c, "simulate"), r);
}

inline void isonat(const RunConfig& c, const StreamFactory& streams, unsigned workers, Report& out) {
  require_path_family(c, "verify-isonat");
  McOptions mc = c.mc;
  mc.workers = workers;
  out.add(prefixed(c, "isonat"), verify_isonat(streams.fork("isonat"), c.process, c.a, c.grid, c.panel, mc));
}

inline void condition(const RunConfig& c, const StreamFactory& streams, unsigned workers, Report& out) {
  require_path_family(c, "verify-condition");
  McOptions mc = c.mc;
  mc.workers = workers;
  out.add(prefixed(c, "condition"), verify_condition(streams.fork("condition"), c.process, c.a, c.grid, c.panel, mc));
}

inline void levy_check(const RunConfig& c, const StreamFactory& streams, unsigned workers, Report& out) {
  require_path_family(c, "levy-check");
  McOptions mc = c.mc;
  mc.workers = workers;
  out.add(prefixed(c, "levy_conditions"), validate_levy_conditions(c.process, c.grid));
  out.add(prefixed(c, "laplace_exponent"), laplace_exponent_check(streams.fork("laplace"), c.process, c.grid, c.panel, mc));
  ProbabilisticOptions opt;
  opt.replicates = mc.replicates;
  opt.bootstrap = mc.bootstrap;
  opt.workers = workers;
  out.add(prefixed(c, "levy_representation"),
          levy_representation_check(streams.fork("representation"), c.process, c.panel, opt, mc.z_crit));
  if (const auto* p = std::get_if<PoissonSpec>(&c.process)) {
    ProbabilisticOptions first = opt, second = opt;
    first.poisson_mixing_mean = c.mixing_means[0];
    second.poisson_mixing_mean = c.mixing_means[1];
    out.add(prefixed(c, "mixing_invariance"),
            poisson_mixing_invariance_check(streams.fork("mixing"), *p, c.panel, first, second, mc.z_crit));
  }
  std::vector<SplitCheck> split;
  for (double a : c.split_points) {
    auto rows = split_additivity(c.process, c.panel, a);
    split.insert(split.end(), rows.begin(), rows.end());
  }
  out.add(prefixed(c, "split_additivity"), split, kSplitTolerance);
}

inline void permanental(const RunConfig& c, const StreamFactory& streams, unsigned workers, Report& out) {
  if (!c.permanental()) throw ConfigError("permanental needs process.family = permanental");
  const auto& spec = std::get<PermanentalSpec>(c.process);
  if (spec.beta != 1.0) throw ConfigError("the permanental identity is checked for beta = 1");
  McOptions mc = c.mc;
  mc.workers = workers;
  out.add(prefixed(c, "permanental_identity"), verify_permanental_identity(streams.fork("identity"), spec.chain, c.state_a, c.state_panel, mc));
  out.add(prefixed(c, "local_time_mean"), check_local_time_moments(streams.fork("local-times"), spec.chain, c.state_a, mc));
}

inline void limit(const RunConfig& c, const StreamFactory& streams, unsigned workers, Report& out) {
  require_path_family(c, "limit");
  LimitOptions opt;
  opt.replicates = c.mc.replicates;
  opt.max_replicates = std::max(c.max_replicates, c.mc.replicates);
  opt.bootstrap = c.mc.bootstrap;
  opt.workers = workers;
  const std::vector<double> deltas = c.deltas.empty() ? std::vector<double>{1.0, 0.3, 0.1, 0.03} : c.deltas;
  out.add(prefixed(c, "limit"), verify_limit(streams.fork("limit"), c.process, c.a, deltas, c.grid, c.panel, opt));
}

/// Every applicable check for one run.
inline void battery(const RunConfig& c, const StreamFactory& streams, unsigned workers, Report& out) {
  if (c.permanental()) {
    permanental(c, streams, workers, out);
    return;
  }
  levy_check(c, streams, workers, out);
  isonat(c, streams, workers, out);
  condition(c, streams, workers, out);
  if (!c.deltas.empty()) limit(c, streams, workers, out);
}

inline void write_draws_csv(const std::string& path, const RunConfig& c, const std::vector<std::vector<double>>& draws) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << std::setprecision(17);
  if (c.permanental()) {
    const auto n = std::get<PermanentalSpec>(c.process).chain.size();
    for (std::size_t x = 0; x < n; ++x) f << (x ? "," : "") << "y[" << x << "]";
  } else {
    for (std::size_t k = 0; k < c.grid.size(); ++k) f << (k ? "," : "") << "y(" << c.grid[k] << ")";
  }
  f << '\n';
  for (const auto& row : draws) {
    for (std::size_t k = 0; k < row.size(); ++k) f << (k ? "," : "") << row[k];
    f << '\n';
  }
}

}  // namespace detail

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string csv_path;
  unsigned workers = 0;
};

/// Runs one command and returns the report document.
inline json execute(const Options& o, std::ostream& diag) {
  const auto start = std::chrono::steady_clock::now();
  config::SuiteConfig suite = config::parse_suite(config::read_json(o.config_path));
  if (o.seed) {
    suite.seed = *o.seed;
    for (auto& r : suite.runs) r.seed = *o.seed;
  }
  const unsigned workers = o.workers ? o.workers : default_workers();
  const bool is_suite = o.command == "suite";
  if (!is_suite && suite.runs.size() != 1) throw ConfigError(o.command + " takes a single run, not a suite document");

  Report rep(o.command, suite.seed);
  std::vector<std::vector<double>> draws;
  json cfg;
  if (is_suite) {
    cfg["seed"] = suite.seed;
    cfg["runs"] = json::array();
    for (std::size_t i = 0; i < suite.runs.size(); ++i) {
      const auto& run = suite.runs[i];
      cfg["runs"].push_back(config::resolved(run));
      detail::battery(run, StreamFactory(run.seed).fork("suite").fork(i), workers, rep);
    }
  } else {
    const auto& run = suite.runs.front();
    cfg = config::resolved(run);
    const StreamFactory streams(run.seed);
    if (o.command == "simulate")
      detail::simulate(run, streams, workers, rep, o.csv_path.empty() ? nullptr : &draws);
    else if (o.command == "verify-isonat")
      detail::isonat(run, streams, workers, rep);
    else if (o.command == "verify-condition")
      detail::condition(run, streams, workers, rep);
    else if (o.command == "levy-check")
      detail::levy_check(run, streams, workers, rep);
    else if (o.command == "permanental")
      detail::permanental(run, streams, workers, rep);
    else if (o.command == "limit")
      detail::limit(run, streams, workers, rep);
    else
      throw ConfigError("unknown command '" + o.command + "'");
  }

  for (const auto& r : rep.results())
    diag << (r.at("pass").get<bool>() ? "PASS " : "FAIL ") << r.at("check").get<std::string>() << '\n';
  diag << (rep.passed() ? "PASS" : "FAIL") << " overall (" << rep.scored_entries() << " z-scored entries)\n";

  if (!o.csv_path.empty()) {
    if (o.command == "simulate") {
      detail::write_draws_csv(o.csv_path, suite.runs.front(), draws);
    } else {
      std::ofstream f(o.csv_path);
      if (!f) throw ConfigError("cannot write '" + o.csv_path + "'");
      rep.write_csv(f);
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep.document(cfg, seconds, workers);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Levy measure and isomorphism identity checks"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "sample paths and check the mean function"},
      {"verify-isonat", "size-biased tilting identity"},
      {"verify-condition", "conditioning identity psi = (psi | psi(a)=0) + L^(a)"},
      {"levy-check", "Levy exponent, representations and measure splits"},
      {"permanental", "permanental isomorphism identity and local-time moments"},
      {"limit", "delta-thinned convergence to r^(a)"},
      {"suite", "every applicable check for each run of a config"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config_path, "JSON config file")->required();
    sub->add_option("--seed", o.seed, "seed, overriding the config");
    sub->add_option("--out", o.out_path, "write the JSON report here instead of stdout");
    sub->add_option("--workers", o.workers, "worker threads (0 = available parallelism)");
    sub->add_option("--csv", o.csv_path, "write panel rows (or sampled paths for simulate) as CSV");
    sub->callback([&o, name = name] { o.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    const json doc = execute(o, err);
    const std::string text = doc.dump(2) + "\n";
    if (o.out_path.empty()) {
      out << text;
    } else {
      std::ofstream f(o.out_path);
      if (!f) throw ConfigError("cannot write '" + o.out_path + "'");
      f << text;
    }
    return doc.at("pass").get<bool>() ? kExitPass : kExitFail;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitConfig;
}

}  // namespace levyid::cli

#endif
