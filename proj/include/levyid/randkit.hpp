#ifndef LEVYID_RANDKIT_HPP
#define LEVYID_RANDKIT_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "levyid/core.hpp"
#include "levyid/error.hpp"
#include "levyid/rng.hpp"

namespace levyid {

/// Largest time step handed to the tempered-stable rejection sampler. The
/// acceptance probability is exp(-dt), so this keeps it above 0.6.
inline constexpr double kTemperedStableMaxStep = 0.5;

inline double sample_uniform(RngStream& rng) { return rng.uniform(); }

inline double sample_exponential(RngStream& rng, double mean) {
  require(mean > 0.0 && std::isfinite(mean), "exponential mean must be > 0");
  return -mean * std::log(rng.open_uniform());
}

inline double sample_normal(RngStream& rng) {
  const double r = std::sqrt(-2.0 * std::log(rng.open_uniform()));
  return r * std::cos(2.0 * std::numbers::pi * rng.uniform());
}

/// Gamma(shape, rate) by Marsaglia-Tsang, boosted for shape < 1.
inline double sample_gamma(RngStream& rng, double shape, double rate = 1.0) {
  require(shape > 0.0 && std::isfinite(shape), "gamma shape must be > 0");
  require(rate > 0.0 && std::isfinite(rate), "gamma rate must be > 0");
  if (shape < 1.0) {
    const double g = sample_gamma(rng, shape + 1.0);
    return g * std::pow(rng.open_uniform(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = sample_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.open_uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

inline std::uint64_t sample_poisson(RngStream& rng, double mean) {
  require(mean >= 0.0 && std::isfinite(mean), "poisson mean must be >= 0");
  if (mean == 0.0) return 0;
  if (mean < 30.0) {
    const double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(rng);
}

/// Positive alpha-stable S with E exp(-u S) = exp(-t u^alpha), by Kanter's
/// representation.
inline double sample_positive_stable(RngStream& rng, double alpha, double t = 1.0) {
  require(alpha > 0.0 && alpha < 1.0, "stable index must lie in (0,1)");
  require(t > 0.0 && std::isfinite(t), "stable time scale must be > 0");
  const double theta = std::numbers::pi * rng.open_uniform();
  const double w = -std::log(rng.open_uniform());
  const double a = std::sin(alpha * theta) / std::pow(std::sin(theta), 1.0 / alpha);
  const double b = std::pow(std::sin((1.0 - alpha) * theta) / w, (1.0 - alpha) / alpha);
  return std::pow(t, 1.0 / alpha) * a * b;
}

/// Increment over `dt` of the subordinator with E exp(-u X) = exp(dt (1 - (1+u)^alpha)):
/// a stable draw accepted with probability exp(-S).
inline double sample_tempered_stable_increment(RngStream& rng, double alpha, double dt) {
  require(alpha > 0.0 && alpha < 1.0, "tempered stable alpha must lie in (0,1)");
  require(dt > 0.0, "tempered stable step must be > 0");
  if (dt > kTemperedStableMaxStep)
    throw DomainError("tempered stable step exceeds the maximum; subdivide the increment");
  for (;;) {
    const double s = sample_positive_stable(rng, alpha, dt);
    if (rng.uniform() < std::exp(-s)) return s;
  }
}

/// Same law for any dt > 0, summed over sub-steps of at most kTemperedStableMaxStep.
inline double sample_tempered_stable_span(RngStream& rng, double alpha, double dt) {
  if (dt <= 0.0) return 0.0;
  const auto steps = static_cast<long>(std::ceil(dt / kTemperedStableMaxStep));
  const double h = dt / static_cast<double>(steps);
  double total = 0.0;
  for (long i = 0; i < steps; ++i) total += sample_tempered_stable_increment(rng, alpha, h);
  return total;
}

inline std::size_t sample_discrete_index(RngStream& rng, const std::vector<double>& probs) {
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cdf += probs[i];
    if (u < cdf) return i;
  }
  return probs.size() - 1;
}

inline double sample_jump(RngStream& rng, const JumpSizeLaw& law) {
  return std::visit(overloaded{
                        [&](const ExponentialJumps& j) { return sample_exponential(rng, j.mean); },
                        [&](const GammaJumps& j) { return sample_gamma(rng, j.shape, j.rate); },
                        [](const ConstantJumps& j) { return j.value; },
                        [&](const DiscreteJumps& j) { return j.atoms[sample_discrete_index(rng, j.probs)]; },
                    },
                    law);
}

/// Draw from x * law(dx) / E[X].
inline double sample_size_biased_jump(RngStream& rng, const JumpSizeLaw& law) {
  return std::visit(overloaded{
                        [&](const ExponentialJumps& j) { return sample_gamma(rng, 2.0) * j.mean; },
                        [&](const GammaJumps& j) { return sample_gamma(rng, j.shape + 1.0, j.rate); },
                        [](const ConstantJumps& j) { return j.value; },
                        [&](const DiscreteJumps& j) {
                          std::vector<double> w(j.atoms.size());
                          const double kappa = mean_jump(j);
                          require(kappa > 0.0, "size-biasing needs a positive mean");
                          for (std::size_t i = 0; i < w.size(); ++i) w[i] = j.atoms[i] * j.probs[i] / kappa;
                          return j.atoms[sample_discrete_index(rng, w)];
                        },
                    },
                    law);
}

/// Size-biased jump of the tempered stable Levy measure: Gamma(1 - alpha, 1).
inline double sample_size_biased_jump(RngStream& rng, const TemperedStableSpec& spec) {
  require(spec.alpha > 0.0 && spec.alpha < 1.0, "tempered stable alpha must lie in (0,1)");
  return sample_gamma(rng, 1.0 - spec.alpha);
}

}  // namespace levyid

#endif
