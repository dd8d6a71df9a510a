#ifndef LEVYID_IDENTITIES_HPP
#define LEVYID_IDENTITIES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "levyid/core.hpp"
#include "levyid/error.hpp"
#include "levyid/parallel.hpp"
#include "levyid/processes.hpp"
#include "levyid/randkit.hpp"
#include "levyid/rng.hpp"
#include "levyid/statlab.hpp"

// Companion processes of psi at a point a:
//   r^(a)             the additive component gained under the size-biased law
//                     E[psi(a)/E psi(a); .]
//   L^(a)             the infinitely divisible part carried by paths with y(a) > 0
//   (psi | psi(a)=0)  the part carried by paths with y(a) = 0
// and Monte-Carlo checks of
//   psi + r^(a)  =d  psi under E[psi(a)/E psi(a); .]
//   psi          =d  (psi | psi(a)=0) + L^(a)

namespace levyid {

/// Offset W = a - U_a with density f(w) / I(a) on [0, a].
inline double sample_kernel_offset(RngStream& rng, const Kernel& kernel, double a) {
  require(a > 0.0, "kernel offset needs a > 0");
  return std::visit(
      overloaded{
          [&](const IndicatorKernel& k) { return rng.uniform() * std::min(a, k.length); },
          [&](const ExpDecayKernel& k) {
            if (k.decay == 0.0) return rng.uniform() * a;
            return -std::log1p(rng.uniform() * std::expm1(-k.decay * a)) / k.decay;
          },
          [&](const PowerCutoffKernel& k) {
            // (1+u)^-p <= 1, so a uniform proposal with envelope 1 works
            const double span = std::min(a, k.cutoff);
            for (;;) {
              const double w = rng.uniform() * span;
              if (rng.uniform() < std::pow(1.0 + w, -k.power)) return w;
            }
          },
          [&](const TabulatedKernel& k) {
            // inverse CDF of the piecewise-linear density on [0, a]
            std::vector<double> lo, hi, y0, y1, mass;
            for (std::size_t j = 1; j < k.knots.size(); ++j) {
              const double l = k.knots[j - 1], h = std::min(k.knots[j], a);
              if (h <= l) break;
              lo.push_back(l);
              hi.push_back(h);
              y0.push_back(k.values[j - 1]);
              y1.push_back(kernel_value(Kernel{k}, h));
              mass.push_back(0.5 * (y0.back() + y1.back()) * (h - l));
            }
            double total = 0.0;
            for (double m : mass) total += m;
            require(total > 0.0, "kernel integral over [0,a] is zero");
            double target = rng.uniform() * total;
            std::size_t j = 0;
            while (j + 1 < mass.size() && target >= mass[j]) target -= mass[j++];
            const double width = hi[j] - lo[j];
            const double slope = (y1[j] - y0[j]) / width;
            const double disc = std::max(0.0, y0[j] * y0[j] + 2.0 * slope * target);
            const double denom = y0[j] + std::sqrt(disc);
            const double x = denom > 0.0 ? 2.0 * target / denom : rng.uniform() * width;
            return lo[j] + std::clamp(x, 0.0, width);
          },
      },
      kernel);
}

/// Draws the process r^(a) on `grid`.
inline Path sample_r_a(RngStream& rng, const ProcessSpec& spec, double a, const TimeGrid& grid) {
  require(a > 0.0, "r^(a) needs a > 0");
  validate(spec);
  std::vector<double> v(grid.size(), 0.0);
  auto step = [&](double height, double from) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (grid[i] >= from) v[i] = height;
  };
  std::visit(overloaded{
                 [&](const PoissonSpec&) { step(1.0, a * rng.uniform()); },
                 [&](const TemperedStableSpec& s) {
                   const double g = sample_size_biased_jump(rng, s);
                   step(g, a * rng.uniform());
                 },
                 [&](const SatoSpec& s) {
                   const double u = rng.open_uniform();
                   const double size = sample_size_biased_jump(rng, s.bdlp.law);
                   step(std::pow(a, s.H) * u * size, a * std::pow(u, 1.0 / s.H));
                 },
                 [&](const ConvSpec& s) {
                   require(kernel_integral(s.kernel, a) > 0.0, "r^(a) needs I(a) > 0");
                   const double position = a - sample_kernel_offset(rng, s.kernel, a);
                   const double size = sample_size_biased_jump(rng, s.driver.law);
                   for (std::size_t i = 0; i < grid.size(); ++i) v[i] = size * kernel_value(s.kernel, grid[i] - position);
                 },
                 [](const PermanentalSpec&) { throw DomainError("permanental r^(a) is 2 L^(a); see permanental.hpp"); },
             },
             spec);
  return Path(grid, std::move(v));
}

/// Splits a driver jump set at a: first the jumps with f(a - s) = 0 (the set
/// D_a), then the rest.
inline std::pair<std::vector<JumpPoint>, std::vector<JumpPoint>> partition_jumps(const Kernel& kernel,
                                                                                 const std::vector<JumpPoint>& jumps,
                                                                                 double a) {
  std::pair<std::vector<JumpPoint>, std::vector<JumpPoint>> parts;
  for (const auto& j : jumps) (kernel_value(kernel, a - j.position) == 0.0 ? parts.first : parts.second).push_back(j);
  return parts;
}

namespace detail {

/// Fresh psi path sampled on grid plus {a}, returned with the index of a.
inline std::pair<Path, std::size_t> path_with_point(RngStream& rng, const ProcessSpec& spec, double a, const TimeGrid& grid) {
  const TimeGrid g = grid.with_point(a);
  return {sample_path(rng, spec, g), g.index_of(a)};
}

}  // namespace detail

/// Draws L^(a): psi(t ^ a) for the monotone families, and the integral over
/// jumps outside D_a for the convolution.
inline Path sample_L_a(RngStream& rng, const ProcessSpec& spec, double a, const TimeGrid& grid) {
  require(a > 0.0, "L^(a) needs a > 0");
  validate(spec);
  if (const auto* conv = std::get_if<ConvSpec>(&spec)) {
    auto jumps = sample_driver_jumps(rng, conv->driver, grid.back());
    return conv_path_from_jumps(conv->kernel, partition_jumps(conv->kernel, jumps, a).second, grid);
  }
  require(is_monotone_family(spec), "L^(a) is not defined for this family here");
  const auto [full, ia] = detail::path_with_point(rng, spec, a, grid);
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = grid[i] <= a ? full.at(grid[i]) : full[ia];
  return Path(grid, std::move(v));
}

/// Draws (psi | psi(a) = 0): psi(t v a) - psi(a) for the monotone families,
/// and the integral over jumps in D_a for the convolution.
inline Path sample_conditional(RngStream& rng, const ProcessSpec& spec, double a, const TimeGrid& grid) {
  require(a > 0.0, "conditional process needs a > 0");
  validate(spec);
  if (const auto* conv = std::get_if<ConvSpec>(&spec)) {
    auto jumps = sample_driver_jumps(rng, conv->driver, grid.back());
    return conv_path_from_jumps(conv->kernel, partition_jumps(conv->kernel, jumps, a).first, grid);
  }
  require(is_monotone_family(spec), "conditional process is not defined for this family here");
  const auto [full, ia] = detail::path_with_point(rng, spec, a, grid);
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = grid[i] <= a ? 0.0 : std::max(0.0, full.at(grid[i]) - full[ia]);
  return Path(grid, std::move(v));
}

/// N independent psi paths weighted by psi(a) / E psi(a), with the exact mean.
inline WeightedEnsemble tilted_ensemble(const StreamFactory& streams, const ProcessSpec& spec, double a,
                                        const TimeGrid& grid, std::size_t n, unsigned workers = 0) {
  validate(spec);
  require(n >= 1, "tilted ensemble needs N >= 1");
  const std::size_t ia = grid.index_of(a);
  const double mean = mean_function(spec, a);
  require(mean > 0.0, "tilting needs E psi(a) > 0");
  std::vector<Path> paths(n, Path(grid));
  std::vector<double> weights(n);
  parallel_for(n, workers, [&](std::size_t i) {
    RngStream rng = streams.stream(i);
    paths[i] = sample_path(rng, spec, grid);
    weights[i] = paths[i][ia] / mean;
  });
  return WeightedEnsemble(grid, std::move(paths), std::move(weights));
}

/// Kish effective sample size (sum w)^2 / sum w^2.
inline double effective_sample_size(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

namespace detail {

/// Panel functionals of n replicates produced by make_path(i).
template <class MakePath>
PanelSamples simulate_panel(std::size_t n, const LevyFunctionalPanel& panel, unsigned workers, MakePath&& make_path) {
  PanelSamples out(n, panel.size());
  parallel_for(n, workers, [&](std::size_t i) {
    const Path p = make_path(i);
    auto row = out.row(i);
    for (std::size_t e = 0; e < panel.size(); ++e) row[e] = panel[e].functional(p);
  });
  return out;
}

}  // namespace detail

/// Compares the tilted Laplace panel of psi with the plain panel of psi + r^(a).
inline IdentityReport verify_isonat(const StreamFactory& streams, const ProcessSpec& spec, double a, const TimeGrid& grid,
                                    const LevyFunctionalPanel& panel, const McOptions& mc) {
  validate(spec);
  validate(panel, grid);
  const std::size_t ia = grid.index_of(a);
  const double mean = mean_function(spec, a);
  require(mean > 0.0, "tilting needs E psi(a) > 0");
  const std::size_t n = mc.replicates;

  std::vector<double> weights(n);
  const auto tilted_streams = streams.fork("isonat/tilted");
  const PanelSamples lhs_samples = detail::simulate_panel(n, panel, mc.workers, [&](std::size_t i) {
    RngStream rng = tilted_streams.stream(i);
    Path p = sample_path(rng, spec, grid);
    weights[i] = p[ia] / mean;
    return p;
  });
  const auto psi_streams = streams.fork("isonat/psi");
  const auto r_streams = streams.fork("isonat/r");
  const PanelSamples rhs_samples = detail::simulate_panel(n, panel, mc.workers, [&](std::size_t i) {
    RngStream rng_psi = psi_streams.stream(i);
    RngStream rng_r = r_streams.stream(i);
    return sample_path(rng_psi, spec, grid) + sample_r_a(rng_r, spec, a, grid);
  });

  const auto lhs = bootstrap_panel(lhs_samples, weights, Normalization::known_mean, mc.bootstrap,
                                   streams.fork("isonat/boot-lhs"), mc.workers);
  const auto rhs = bootstrap_panel(rhs_samples, {}, Normalization::self, mc.bootstrap, streams.fork("isonat/boot-rhs"),
                                   mc.workers);

  IdentityReport report;
  report.identity = "isonat";
  report.family = family_name(spec);
  report.z_crit = mc.z_crit;
  for (std::size_t e = 0; e < panel.size(); ++e) report.add(describe(panel[e]), lhs[e], rhs[e]);
  const double ess = effective_sample_size(weights);
  if (ess < 0.01 * static_cast<double>(n))
    report.warnings.push_back("tilted effective sample size " + std::to_string(ess) + " is below 1% of N");
  report.finalize();
  return report;
}

/// Compares the Laplace panel of psi with that of an independent sum
/// (psi | psi(a)=0) + L^(a).
inline IdentityReport verify_condition(const StreamFactory& streams, const ProcessSpec& spec, double a,
                                       const TimeGrid& grid, const LevyFunctionalPanel& panel, const McOptions& mc) {
  validate(spec);
  validate(panel, grid);
  require(grid.contains(a), "a must be a grid point");
  const std::size_t n = mc.replicates;

  const auto psi_streams = streams.fork("condition/psi");
  const PanelSamples lhs_samples = detail::simulate_panel(n, panel, mc.workers, [&](std::size_t i) {
    RngStream rng = psi_streams.stream(i);
    return sample_path(rng, spec, grid);
  });
  const auto cond_streams = streams.fork("condition/conditional");
  const auto la_streams = streams.fork("condition/L_a");
  const PanelSamples rhs_samples = detail::simulate_panel(n, panel, mc.workers, [&](std::size_t i) {
    RngStream rng_c = cond_streams.stream(i);
    RngStream rng_l = la_streams.stream(i);
    return sample_conditional(rng_c, spec, a, grid) + sample_L_a(rng_l, spec, a, grid);
  });

  const auto lhs = bootstrap_panel(lhs_samples, {}, Normalization::self, mc.bootstrap, streams.fork("condition/boot-lhs"),
                                   mc.workers);
  const auto rhs = bootstrap_panel(rhs_samples, {}, Normalization::self, mc.bootstrap, streams.fork("condition/boot-rhs"),
                                   mc.workers);

  IdentityReport report;
  report.identity = "condition";
  report.family = family_name(spec);
  report.z_crit = mc.z_crit;
  for (std::size_t e = 0; e < panel.size(); ++e) report.add(describe(panel[e]), lhs[e], rhs[e]);
  report.finalize();
  return report;
}

}  // namespace levyid

#endif
