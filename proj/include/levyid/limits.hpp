#ifndef LEVYID_LIMITS_HPP
#define LEVYID_LIMITS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "levyid/core.hpp"
#include "levyid/error.hpp"
#include "levyid/identities.hpp"
#include "levyid/processes.hpp"
#include "levyid/rng.hpp"
#include "levyid/statlab.hpp"

// delta-thinned processes psi^(delta), whose Levy measure is delta * nu, and
// the convergence of their size-biased laws to r^(a) as delta -> 0.
//
// Each path-space Levy measure is the image of ds (x) rho(dx), so scaling it
// by delta scales the jump intensity:
//   poisson          rate delta * lambda
//   tempered stable  increment over dt drawn as one over delta * dt
//   sato             BDLP jump rate delta * kappa
//   convolution      driver jump rate delta * rate

namespace levyid {

inline Path sample_delta_thinned(RngStream& rng, const ProcessSpec& spec, double delta, const TimeGrid& grid) {
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("delta must lie in (0, 1]");
  return sample_path(rng, spec, grid, delta);
}

struct LimitOptions {
  std::size_t replicates = 20000;       // N; each delta uses min(N / delta, max_replicates)
  std::size_t max_replicates = 1000000;
  int bootstrap = 500;
  unsigned workers = 0;
};

struct LimitStep {
  double delta = 1.0;
  std::size_t replicates = 0;
  std::vector<Estimate> panel;  // tilted Laplace panel of psi^(delta)
  double distance = 0.0;        // max_e |L_delta - L_r|
  double se = 0.0;              // combined SE at the maximizing entry
  std::size_t argmax = 0;
  double ess = 0.0;
  bool ess_warning = false;
};

struct LimitReport {
  std::string family;
  double a = 0.0;
  std::vector<std::string> labels;
  std::vector<Estimate> reference;  // Laplace panel of r^(a)
  std::vector<LimitStep> steps;
  bool monotone = true;       // d_k <= d_{k-1} + 2 SE for every k
  bool final_within = true;   // d_last <= 3 SE
  std::vector<std::string> warnings;

  bool passed() const { return monotone && final_within; }
};

/// Laplace panel of r^(a) from n independent draws.
inline std::vector<Estimate> r_a_panel(const StreamFactory& streams, const ProcessSpec& spec, double a, const TimeGrid& grid,
                                       const LevyFunctionalPanel& panel, std::size_t n, int bootstrap, unsigned workers) {
  const auto draws = streams.fork("limit/r");
  const auto samples = detail::simulate_panel(n, panel, workers, [&](std::size_t i) {
    RngStream rng = draws.stream(i);
    return sample_r_a(rng, spec, a, grid);
  });
  return bootstrap_panel(samples, {}, Normalization::self, bootstrap, streams.fork("limit/r-boot"), workers);
}

inline LimitReport verify_limit(const StreamFactory& streams, const ProcessSpec& spec, double a, const std::vector<double>& deltas,
                                const TimeGrid& grid, const LevyFunctionalPanel& panel, const LimitOptions& opt = {}) {
  validate(spec);
  validate(panel, grid);
  const std::size_t ia = grid.index_of(a);
  require(!deltas.empty(), "need at least one delta");
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    require(deltas[k] > 0.0 && deltas[k] <= 1.0, "deltas must lie in (0, 1]");
    if (k) require(deltas[k] < deltas[k - 1], "deltas must be strictly decreasing");
  }
  require(opt.replicates >= 1 && opt.max_replicates >= opt.replicates, "bad replicate counts");
  const double mean = mean_function(spec, a);
  require(mean > 0.0, "tilting needs E psi(a) > 0");

  LimitReport report;
  report.family = family_name(spec);
  report.a = a;
  for (const auto& e : panel.entries) report.labels.push_back(describe(e));
  report.reference = r_a_panel(streams, spec, a, grid, panel, opt.replicates, opt.bootstrap, opt.workers);

  for (std::size_t k = 0; k < deltas.size(); ++k) {
    LimitStep step;
    step.delta = deltas[k];
    const double scaled = static_cast<double>(opt.replicates) / step.delta;
    step.replicates = static_cast<std::size_t>(std::min(std::ceil(scaled), static_cast<double>(opt.max_replicates)));

    const auto step_streams = streams.fork("limit/delta").fork(k);
    const auto draws = step_streams.fork("draws");
    std::vector<double> weights(step.replicates);
    const auto samples = detail::simulate_panel(step.replicates, panel, opt.workers, [&](std::size_t i) {
      RngStream rng = draws.stream(i);
      Path p = sample_delta_thinned(rng, spec, step.delta, grid);
      weights[i] = p[ia] / (step.delta * mean);
      return p;
    });
    step.ess = effective_sample_size(weights);
    step.ess_warning = step.ess < 0.01 * static_cast<double>(step.replicates);
    if (step.ess_warning)
      report.warnings.push_back("delta=" + std::to_string(step.delta) + ": tilted effective sample size below 1% of N");
    step.panel = bootstrap_panel(samples, weights, Normalization::known_mean, opt.bootstrap, step_streams.fork("boot"), opt.workers);

    for (std::size_t e = 0; e < panel.size(); ++e) {
      const double d = std::abs(step.panel[e].value - report.reference[e].value);
      if (e == 0 || d > step.distance) {
        step.distance = d;
        step.se = std::hypot(step.panel[e].se, report.reference[e].se);
        step.argmax = e;
      }
    }
    report.steps.push_back(std::move(step));
  }

  for (std::size_t k = 1; k < report.steps.size(); ++k) {
    const auto& prev = report.steps[k - 1];
    const auto& cur = report.steps[k];
    if (cur.distance > prev.distance + 2.0 * std::hypot(cur.se, prev.se)) report.monotone = false;
  }
  const auto& last = report.steps.back();
  report.final_within = last.distance <= 3.0 * last.se;
  return report;
}

}  // namespace levyid

#endif
