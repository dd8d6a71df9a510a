#ifndef LEVYID_LEVYMEASURE_HPP
#define LEVYID_LEVYMEASURE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "levyid/core.hpp"
#include "levyid/error.hpp"
#include "levyid/parallel.hpp"
#include "levyid/processes.hpp"
#include "levyid/quadrature.hpp"
#include "levyid/randkit.hpp"
#include "levyid/rng.hpp"
#include "levyid/statlab.hpp"

// Path-space Levy measures of the four path-indexed families.
//
// Each one is the image of ds (x) rho(dx) under (s, x) -> x * k_s(.), with
//   poisson          rho = lambda * delta_1,        k_s(t) = 1{t >= s},                  s >= 0
//   tempered stable  rho = x^-a-1 e^-x / |G(-a)|,   k_s(t) = 1{t >= s},                  s >= 0
//   sato             rho = BDLP Levy measure,       k_s(t) = e^-s 1{t >= e^(-s/H)},      s real
//   convolution      rho = driver Levy measure,     k_s(t) = f(t - s),                   s >= 0
// so every functional of finitely many coordinates reduces to an integral in s
// of a closed-form integral in x.

namespace levyid {

enum class Restriction {
  none,          // nu
  zero_at_a,     // nu_a:       paths with y(a) = 0
  positive_at_a  // nu~_a:      paths with y(a) > 0
};

struct NuEstimate {
  enum class Method { quadrature, probabilistic };

  double value = 0.0;
  double se = 0.0;
  Method method = Method::quadrature;
  double abs_error = 0.0;  // quadrature error estimate
  std::size_t replicates = 0;
  double ess = 0.0;
  bool ess_warning = false;

  Estimate as_estimate() const {
    if (method == Method::quadrature) return exact(value);
    return Estimate{value, se, value - 1.96 * se, value + 1.96 * se, se == 0.0};
  }
};

namespace detail {

/// E min(k X, 1) for a jump size X.
inline double jump_truncated_mean(const JumpSizeLaw& law, double k) {
  if (k <= 0.0) return 0.0;
  return std::visit(overloaded{
                        [k](const ExponentialJumps& j) { return k * j.mean * -std::expm1(-1.0 / (k * j.mean)); },
                        [k](const GammaJumps& j) {
                          const double cut = j.rate / k;  // rate * (1/k)
                          return k * (j.shape / j.rate) * boost::math::gamma_p(j.shape + 1.0, cut) +
                                 boost::math::gamma_q(j.shape, cut);
                        },
                        [k](const ConstantJumps& j) { return std::min(k * j.value, 1.0); },
                        [k](const DiscreteJumps& j) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < j.atoms.size(); ++i) s += j.probs[i] * std::min(k * j.atoms[i], 1.0);
                          return s;
                        },
                    },
                    law);
}

/// int min(k x, 1) x^-a-1 e^-x dx / |Gamma(-a)|, by quadrature. The x^-a
/// singularity on [0, 1/k] is removed with x = v^(1/(1-a)).
inline double tempered_truncated_mean(double alpha, double k) {
  if (k <= 0.0) return 0.0;
  const double b = 1.0 / k;
  const double q = 1.0 / (1.0 - alpha);
  const double near = quad::integrate([&](double v) { return q * std::exp(-std::pow(v, q)); }, 0.0, std::pow(b, 1.0 - alpha)).value;
  const double far = quad::integrate([&](double x) { return std::pow(x, -alpha - 1.0) * std::exp(-x); }, b,
                                     std::numeric_limits<double>::infinity())
                         .value;
  const double norm = boost::math::tgamma(1.0 - alpha) / alpha;  // |Gamma(-alpha)|
  return (k * near + far) / norm;
}

/// The (s, rho) description of one family, specialised to a set of times.
struct PathMeasureModel {
  double s_lo = 0.0;
  double s_hi = 0.0;
  std::vector<double> breaks;
  std::function<double(double s, double t)> profile;
  std::function<double(double c)> laplace_inner;    // int (1 - e^{-c x}) rho(dx)
  std::function<double(double k)> truncated_inner;  // int min(k x, 1) rho(dx)
  double mass = 0.0;                                // rho(R+)
};

inline PathMeasureModel path_measure_model(const ProcessSpec& spec, std::vector<double> times) {
  PathMeasureModel m;
  const double t_max = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
  std::visit(overloaded{
                 [&](const PoissonSpec& s) {
                   const double lambda = s.lambda;
                   m.s_lo = 0.0;
                   m.s_hi = t_max;
                   m.breaks = times;
                   m.profile = [](double u, double t) { return t >= u ? 1.0 : 0.0; };
                   m.laplace_inner = [lambda](double c) { return -lambda * std::expm1(-c); };
                   m.truncated_inner = [lambda](double k) { return lambda * std::min(k, 1.0); };
                   m.mass = lambda;
                 },
                 [&](const TemperedStableSpec& s) {
                   const double alpha = s.alpha;
                   require(alpha > 0.0 && alpha < 1.0, "tempered stable alpha must lie in (0,1)");
                   m.s_lo = 0.0;
                   m.s_hi = t_max;
                   m.breaks = times;
                   m.profile = [](double u, double t) { return t >= u ? 1.0 : 0.0; };
                   // int (1 - e^{-cx}) x^-a-1 e^-x dx = |Gamma(-a)| ((1+c)^a - 1)
                   m.laplace_inner = [alpha](double c) { return std::expm1(alpha * std::log1p(c)); };
                   m.truncated_inner = [alpha](double k) { return tempered_truncated_mean(alpha, k); };
                   m.mass = std::numeric_limits<double>::infinity();
                 },
                 [&](const SatoSpec& s) {
                   const double H = s.H;
                   const JumpLawSpec bdlp = s.bdlp;
                   double lo = std::numeric_limits<double>::infinity();
                   for (double t : times)
                     if (t > 0.0) {
                       m.breaks.push_back(sato_lower_limit(H, t));
                       lo = std::min(lo, m.breaks.back());
                     }
                   m.s_lo = std::isfinite(lo) ? lo : 0.0;
                   m.s_hi = std::isfinite(lo) ? std::numeric_limits<double>::infinity() : 0.0;
                   m.profile = [H](double u, double t) { return t > 0.0 && u >= sato_lower_limit(H, t) ? std::exp(-u) : 0.0; };
                   m.laplace_inner = [bdlp](double c) { return bdlp.rate * jump_laplace_complement(bdlp.law, c); };
                   m.truncated_inner = [bdlp](double k) { return bdlp.rate * jump_truncated_mean(bdlp.law, k); };
                   m.mass = bdlp.rate;
                 },
                 [&](const ConvSpec& s) {
                   const Kernel kernel = s.kernel;
                   const JumpLawSpec driver = s.driver;
                   m.s_lo = 0.0;
                   m.s_hi = t_max;
                   for (double t : times)
                     for (double b : kernel_breakpoints(kernel)) m.breaks.push_back(t - b);
                   m.profile = [kernel](double u, double t) { return kernel_value(kernel, t - u); };
                   m.laplace_inner = [driver](double c) { return driver.rate * jump_laplace_complement(driver.law, c); };
                   m.truncated_inner = [driver](double k) { return driver.rate * jump_truncated_mean(driver.law, k); };
                   m.mass = driver.rate;
                 },
                 [](const PermanentalSpec&) { throw DomainError("use nu_permanental for permanental processes"); },
             },
             spec);
  return m;
}

inline std::function<bool(double)> restriction_filter(const PathMeasureModel& m, Restriction r, double a) {
  switch (r) {
    case Restriction::zero_at_a:
      return [&m, a](double s) { return m.profile(s, a) == 0.0; };
    case Restriction::positive_at_a:
      return [&m, a](double s) { return m.profile(s, a) > 0.0; };
    case Restriction::none:
      break;
  }
  return [](double) { return true; };
}

inline std::vector<double> entry_times_with(const PanelEntry& entry, Restriction r, double a) {
  std::vector<double> times = entry.times;
  if (r != Restriction::none) times.push_back(a);
  return times;
}

}  // namespace detail

/// nu(1 - exp(-<alpha, y>)) restricted to {y(a)=0}, {y(a)>0}, or not at all,
/// by adaptive Gauss-Kronrod in s with closed-form inner integrals.
inline NuEstimate nu_quadrature(const ProcessSpec& spec, const PanelEntry& entry, Restriction restriction = Restriction::none,
                                double a = 0.0) {
  validate(spec);
  require(entry.alphas.size() == entry.times.size() && !entry.alphas.empty(), "panel entry needs matching alphas and times");
  if (restriction != Restriction::none) require(a > 0.0, "restricted Levy measure needs a > 0");
  NuEstimate out;
  out.method = NuEstimate::Method::quadrature;
  if (std::all_of(entry.alphas.begin(), entry.alphas.end(), [](double x) { return x == 0.0; })) return out;

  const auto model = detail::path_measure_model(spec, detail::entry_times_with(entry, restriction, a));
  const auto keep = detail::restriction_filter(model, restriction, a);
  auto integrand = [&](double s) {
    if (!keep(s)) return 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i < entry.alphas.size(); ++i) c += entry.alphas[i] * model.profile(s, entry.times[i]);
    return c > 0.0 ? model.laplace_inner(c) : 0.0;
  };
  const auto r = quad::integrate_piecewise(integrand, model.breaks, model.s_lo, model.s_hi);
  out.value = r.value;
  out.abs_error = r.error;
  return out;
}

/// nu~_a(1): total mass of paths with y(a) > 0. Finite only for
/// finite-activity families.
inline NuEstimate nu_total_mass_at(const ProcessSpec& spec, double a) {
  validate(spec);
  require(a > 0.0, "total mass needs a > 0");
  const auto model = detail::path_measure_model(spec, {a});
  if (!std::isfinite(model.mass) || !std::isfinite(model.s_hi))
    throw NumericalError("nu~_a has infinite total mass for the " + family_name(spec) + " family");
  const auto keep = detail::restriction_filter(model, Restriction::positive_at_a, a);
  const auto r = quad::integrate_piecewise([&](double s) { return keep(s) ? model.mass : 0.0; }, model.breaks, model.s_lo,
                                           std::max(model.s_hi, a));
  NuEstimate out;
  out.value = r.value;
  out.abs_error = r.error;
  return out;
}

struct LevyConditionPoint {
  double t = 0.0;
  double value = 0.0;  // int (y(t) ^ 1) nu(dy)
  double abs_error = 0.0;
  bool finite = true;
  std::string diagnostic;
};

struct LevyConditionReport {
  std::vector<LevyConditionPoint> points;
  bool all_finite = true;
};

/// Certifies int (y(t) ^ 1) nu(dy) < infinity at every grid point. The spec
/// is not validated first, so degenerate parameters (lambda = 0) are allowed.
inline LevyConditionReport validate_levy_conditions(const ProcessSpec& spec, const TimeGrid& grid) {
  LevyConditionReport report;
  for (double t : grid.points()) {
    LevyConditionPoint p;
    p.t = t;
    try {
      const auto model = detail::path_measure_model(spec, {t});
      const auto r = quad::integrate_piecewise([&](double s) { return model.truncated_inner(model.profile(s, t)); }, model.breaks,
                                               model.s_lo, model.s_hi);
      p.value = r.value;
      p.abs_error = r.error;
      p.finite = std::isfinite(r.value) && std::isfinite(r.error) && r.value >= 0.0;
      if (!p.finite) p.diagnostic = "integral diverges or is not finite";
    } catch (const std::exception& e) {
      p.finite = false;
      p.diagnostic = e.what();
    }
    report.all_finite = report.all_finite && p.finite;
    report.points.push_back(std::move(p));
  }
  return report;
}

struct ProbabilisticOptions {
  std::size_t replicates = 100000;
  int bootstrap = 500;
  unsigned workers = 0;
  /// Mean of the exponential mixing law Y in the Poisson representation.
  double poisson_mixing_mean = 1.0;
  /// Rate theta of the exponential Y in the convolution representation.
  double conv_theta = 1.0;
};

namespace detail {

/// 1 - exp(-x) for x >= 0, accurate near 0.
inline double one_minus_exp(double x) { return -std::expm1(-x); }

/// One replicate of the weighted-path representation of nu(F) for
/// F = 1 - exp(-<alpha, y>).
inline double nu_replicate(RngStream& rng, const ProcessSpec& spec, const PanelEntry& entry, const ProbabilisticOptions& opt) {
  auto step_exponent = [&](double height, double from) {
    double c = 0.0;
    for (std::size_t i = 0; i < entry.alphas.size(); ++i)
      if (entry.times[i] >= from) c += entry.alphas[i];
    return height * c;
  };
  return std::visit(
      overloaded{
          [&](const PoissonSpec& s) {
            // lambda * Y h(UY) F(1_[UY, inf)), h(x) = 1 / P(Y >= x) = e^{x/m}
            const double y = sample_exponential(rng, opt.poisson_mixing_mean);
            const double start = rng.uniform() * y;
            const double f = one_minus_exp(step_exponent(1.0, start));
            return f == 0.0 ? 0.0 : s.lambda * y * std::exp(start / opt.poisson_mixing_mean) * f;
          },
          [&](const TemperedStableSpec& s) {
            // alpha G^-1 Y e^{UY} F(G 1_[UY, inf)). The factor is alpha, from
            // E psi(a) = alpha a and rho(dx) = alpha x^-1 P(G in dx).
            const double g = sample_size_biased_jump(rng, s);
            const double u = rng.uniform();
            const double y = sample_exponential(rng, 1.0);
            const double f = one_minus_exp(step_exponent(g, u * y));
            return f == 0.0 ? 0.0 : s.alpha * y * std::exp(u * y) * f / g;
          },
          [&](const SatoSpec& s) {
            // kappa (UV)^-1 e^{G U^{1/H}} F(G^H U V 1_[G U^{1/H}, inf))
            const double g = sample_exponential(rng, 1.0);
            const double u = rng.open_uniform();
            const double v = sample_size_biased_jump(rng, s.bdlp.law);
            const double start = g * std::pow(u, 1.0 / s.H);
            const double f = one_minus_exp(step_exponent(std::pow(g, s.H) * u * v, start));
            return f == 0.0 ? 0.0 : driver_mean(s.bdlp) * std::exp(start) * f / (u * v);
          },
          [&](const ConvSpec& s) {
            // (kappa / theta) V^-1 e^{theta Y} F(V f(. - Y)), Y ~ Exp(rate theta)
            const double y = sample_exponential(rng, 1.0 / opt.conv_theta);
            const double v = sample_size_biased_jump(rng, s.driver.law);
            double c = 0.0;
            for (std::size_t i = 0; i < entry.alphas.size(); ++i) c += entry.alphas[i] * kernel_value(s.kernel, entry.times[i] - y);
            const double f = one_minus_exp(v * c);
            return f == 0.0 ? 0.0 : driver_mean(s.driver) / opt.conv_theta * std::exp(opt.conv_theta * y) * f / v;
          },
          [](const PermanentalSpec&) -> double { throw DomainError("use nu_permanental for permanental processes"); },
      },
      spec);
}

}  // namespace detail

/// Monte-Carlo estimate of nu(1 - exp(-<alpha, y>)) from the family's
/// weighted-path representation, with bootstrap SE and an effective sample
/// size diagnostic.
inline NuEstimate nu_probabilistic(const StreamFactory& streams, const ProcessSpec& spec, const PanelEntry& entry,
                                   const ProbabilisticOptions& opt = {}) {
  validate(spec);
  require(opt.replicates >= 1, "nu_probabilistic needs N >= 1");
  require(opt.poisson_mixing_mean > 0.0 && opt.conv_theta > 0.0, "mixing parameters must be > 0");
  NuEstimate out;
  out.method = NuEstimate::Method::probabilistic;
  out.replicates = opt.replicates;
  if (std::all_of(entry.alphas.begin(), entry.alphas.end(), [](double x) { return x == 0.0; })) return out;

  PanelSamples samples(opt.replicates, 1);
  const auto draw_streams = streams.fork("nu/draws");
  parallel_for(opt.replicates, opt.workers, [&](std::size_t i) {
    RngStream rng = draw_streams.stream(i);
    samples(i, 0) = detail::nu_replicate(rng, spec, entry, opt);
  });
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < opt.replicates; ++i) {
    const double v = samples(i, 0);
    if (!std::isfinite(v)) throw NumericalError("non-finite weight in the Levy measure representation");
    s += v;
    s2 += v * v;
  }
  out.ess = s2 > 0.0 ? s * s / s2 : 0.0;
  out.ess_warning = out.ess < 0.01 * static_cast<double>(opt.replicates);
  const auto est = bootstrap_panel(samples, {}, Normalization::self, opt.bootstrap, streams.fork("nu/boot"), opt.workers).front();
  out.value = est.value;
  out.se = est.se;
  return out;
}

/// -log of the empirical Laplace functional of psi against the quadrature
/// Levy exponent, per panel entry (z-scores by the delta method).
inline IdentityReport laplace_exponent_check(const StreamFactory& streams, const ProcessSpec& spec, const TimeGrid& grid,
                                             const LevyFunctionalPanel& panel, const McOptions& mc) {
  validate(spec);
  validate(panel, grid);
  const auto path_streams = streams.fork("laplace/psi");
  PanelSamples samples(mc.replicates, panel.size());
  parallel_for(mc.replicates, mc.workers, [&](std::size_t i) {
    RngStream rng = path_streams.stream(i);
    const Path p = sample_path(rng, spec, grid);
    for (std::size_t e = 0; e < panel.size(); ++e) samples(i, e) = panel[e].functional(p);
  });
  const auto mc_est = bootstrap_panel(samples, {}, Normalization::self, mc.bootstrap, streams.fork("laplace/boot"), mc.workers);

  IdentityReport report;
  report.identity = "laplace_exponent";
  report.family = family_name(spec);
  report.z_crit = mc.z_crit;
  for (std::size_t e = 0; e < panel.size(); ++e)
    report.add(describe(panel[e]), neg_log(mc_est[e]), exact(nu_quadrature(spec, panel[e]).value));
  report.finalize();
  return report;
}

/// Probabilistic representation against quadrature for every panel entry.
inline IdentityReport levy_representation_check(const StreamFactory& streams, const ProcessSpec& spec,
                                                const LevyFunctionalPanel& panel, const ProbabilisticOptions& opt,
                                                double z_crit) {
  IdentityReport report;
  report.identity = "levy_representation";
  report.family = family_name(spec);
  report.z_crit = z_crit;
  for (std::size_t e = 0; e < panel.size(); ++e) {
    const auto mc = nu_probabilistic(streams.fork(e), spec, panel[e], opt);
    if (mc.ess_warning) report.warnings.push_back(describe(panel[e]) + ": effective sample size below 1% of N");
    report.add(describe(panel[e]), mc.as_estimate(), exact(nu_quadrature(spec, panel[e]).value));
  }
  report.finalize();
  return report;
}

/// Two mixing laws in the Poisson representation give the same measure.
inline IdentityReport poisson_mixing_invariance_check(const StreamFactory& streams, const PoissonSpec& spec,
                                                      const LevyFunctionalPanel& panel, ProbabilisticOptions first,
                                                      ProbabilisticOptions second, double z_crit) {
  IdentityReport report;
  report.identity = "poisson_mixing_invariance";
  report.family = "poisson";
  report.z_crit = z_crit;
  for (std::size_t e = 0; e < panel.size(); ++e) {
    const auto lhs = nu_probabilistic(streams.fork("mix-first").fork(e), spec, panel[e], first);
    const auto rhs = nu_probabilistic(streams.fork("mix-second").fork(e), spec, panel[e], second);
    report.add(describe(panel[e]), lhs.as_estimate(), rhs.as_estimate());
  }
  report.finalize();
  return report;
}

struct SplitCheck {
  std::string label;
  double a = 0.0;
  double nu = 0.0;
  double nu_zero = 0.0;      // nu_a
  double nu_positive = 0.0;  // nu~_a
  double residual = 0.0;     // |nu_a + nu~_a - nu|
};

/// nu_a + nu~_a against nu for each panel entry.
inline std::vector<SplitCheck> split_additivity(const ProcessSpec& spec, const LevyFunctionalPanel& panel, double a) {
  std::vector<SplitCheck> out;
  for (const auto& entry : panel.entries) {
    SplitCheck c;
    c.label = describe(entry);
    c.a = a;
    c.nu = nu_quadrature(spec, entry).value;
    c.nu_zero = nu_quadrature(spec, entry, Restriction::zero_at_a, a).value;
    c.nu_positive = nu_quadrature(spec, entry, Restriction::positive_at_a, a).value;
    c.residual = std::abs(c.nu_zero + c.nu_positive - c.nu);
    out.push_back(c);
  }
  return out;
}

}  // namespace levyid

#endif
