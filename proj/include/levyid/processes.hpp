#ifndef LEVYID_PROCESSES_HPP
#define LEVYID_PROCESSES_HPP

#include <cmath>
#include <vector>

#include "levyid/core.hpp"
#include "levyid/error.hpp"
#include "levyid/randkit.hpp"
#include "levyid/rng.hpp"

// Exact grid samplers for the path-indexed families. Every sampler takes an
// `intensity_scale` that multiplies the Levy measure (1 for the process
// itself); the delta-thinned processes in limits.hpp reuse them with scale
// delta. Paths start from psi(0) = 0.

namespace levyid {

/// One atom (position, size) of a compound-Poisson jump set.
struct JumpPoint {
  double position = 0.0;
  double size = 0.0;
};

inline Path sample_poisson_path(RngStream& rng, double lambda, const TimeGrid& grid, double intensity_scale = 1.0) {
  require(lambda > 0.0, "poisson lambda must be > 0");
  std::vector<double> v(grid.size());
  double prev_t = 0.0, level = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    level += static_cast<double>(sample_poisson(rng, lambda * intensity_scale * (grid[i] - prev_t)));
    v[i] = level;
    prev_t = grid[i];
  }
  return Path(grid, std::move(v));
}

/// Tempered stable increments; a scale of delta turns each increment over dt
/// into one over delta * dt, which has exponent delta * dt * ((1+u)^alpha - 1).
inline Path sample_ts_path(RngStream& rng, double alpha, const TimeGrid& grid, double intensity_scale = 1.0) {
  require(alpha > 0.0 && alpha < 1.0, "tempered stable alpha must lie in (0,1)");
  std::vector<double> v(grid.size());
  double prev_t = 0.0, level = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    level += sample_tempered_stable_span(rng, alpha, intensity_scale * (grid[i] - prev_t));
    v[i] = level;
    prev_t = grid[i];
  }
  return Path(grid, std::move(v));
}

// --- Sato -------------------------------------------------------------------

/// Lower limit of the representation integral at time t > 0.
inline double sato_lower_limit(double H, double t) { return -H * std::log(t); }

/// Smallest admissible s_max: the dropped tail mean kappa * exp(-s_max) stays
/// below 1e-6 of the mean at the largest grid time.
inline double sato_min_s_max(const SatoSpec& spec, const TimeGrid& grid) {
  return std::log(1e6) + sato_lower_limit(spec.H, grid.back());
}

/// Truncation point used for `grid`. The automatic choice measures the tail
/// against the smallest positive grid time, which is the stricter bound.
inline double sato_truncation(const SatoSpec& spec, const TimeGrid& grid) {
  const auto t_min = grid.min_positive();
  if (!t_min) return 0.0;
  if (spec.s_max) {
    if (*spec.s_max < sato_min_s_max(spec, grid))
      throw DomainError("sato s_max too small for this grid: need at least " + std::to_string(sato_min_s_max(spec, grid)));
    return *spec.s_max;
  }
  return std::log(1e6) + sato_lower_limit(spec.H, *t_min);
}

/// Jumps of the BDLP on [s_lo, s_hi].
inline std::vector<JumpPoint> sample_bdlp_jumps(RngStream& rng, const JumpLawSpec& bdlp, double s_lo, double s_hi,
                                                double intensity_scale = 1.0) {
  std::vector<JumpPoint> jumps;
  if (!(s_hi > s_lo)) return jumps;
  const auto count = sample_poisson(rng, bdlp.rate * intensity_scale * (s_hi - s_lo));
  jumps.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const double s = s_lo + (s_hi - s_lo) * rng.uniform();
    jumps.push_back(JumpPoint{s, sample_jump(rng, bdlp.law)});
  }
  return jumps;
}

/// psi(t) = sum_j x_j exp(-s_j) 1{s_j >= -H ln t}.
inline Path sato_path_from_jumps(const SatoSpec& spec, const std::vector<JumpPoint>& jumps, const TimeGrid& grid) {
  std::vector<double> v(grid.size(), 0.0);
  for (const auto& j : jumps) {
    const double contribution = j.size * std::exp(-j.position);
    const double first_time = std::exp(-j.position / spec.H);  // jump is visible for t >= first_time
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (grid[i] > 0.0 && grid[i] >= first_time) v[i] += contribution;
  }
  return Path(grid, std::move(v));
}

inline Path sample_sato_path(RngStream& rng, const SatoSpec& spec, const TimeGrid& grid, double intensity_scale = 1.0) {
  validate(ProcessSpec{spec});
  if (!grid.min_positive()) return Path(grid);
  const double s_hi = sato_truncation(spec, grid);
  const double s_lo = sato_lower_limit(spec.H, grid.back());
  return sato_path_from_jumps(spec, sample_bdlp_jumps(rng, spec.bdlp, s_lo, s_hi, intensity_scale), grid);
}

// --- stochastic convolution --------------------------------------------------

inline std::vector<JumpPoint> sample_driver_jumps(RngStream& rng, const JumpLawSpec& driver, double horizon,
                                                  double intensity_scale = 1.0) {
  return sample_bdlp_jumps(rng, driver, 0.0, horizon, intensity_scale);
}

/// psi(t) = sum_j x_j f(t - s_j).
inline Path conv_path_from_jumps(const Kernel& kernel, const std::vector<JumpPoint>& jumps, const TimeGrid& grid) {
  std::vector<double> v(grid.size(), 0.0);
  for (const auto& j : jumps)
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] += j.size * kernel_value(kernel, grid[i] - j.position);
  return Path(grid, std::move(v));
}

inline Path sample_conv_path(RngStream& rng, const ConvSpec& spec, const TimeGrid& grid, double intensity_scale = 1.0) {
  return conv_path_from_jumps(spec.kernel, sample_driver_jumps(rng, spec.driver, grid.back(), intensity_scale), grid);
}

// --- dispatch -----------------------------------------------------------------

inline Path sample_path(RngStream& rng, const ProcessSpec& spec, const TimeGrid& grid, double intensity_scale = 1.0) {
  return std::visit(overloaded{
                        [&](const PoissonSpec& s) { return sample_poisson_path(rng, s.lambda, grid, intensity_scale); },
                        [&](const TemperedStableSpec& s) { return sample_ts_path(rng, s.alpha, grid, intensity_scale); },
                        [&](const SatoSpec& s) { return sample_sato_path(rng, s, grid, intensity_scale); },
                        [&](const ConvSpec& s) { return sample_conv_path(rng, s, grid, intensity_scale); },
                        [](const PermanentalSpec&) -> Path {
                          throw DomainError("permanental processes are sampled per state; use sample_permanental");
                        },
                    },
                    spec);
}

}  // namespace levyid

#endif
