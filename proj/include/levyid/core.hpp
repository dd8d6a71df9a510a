#ifndef LEVYID_CORE_HPP
#define LEVYID_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "levyid/error.hpp"
#include "levyid/quadrature.hpp"

namespace levyid {

// ---------------------------------------------------------------------------
// Grids and paths
// ---------------------------------------------------------------------------

/// Finite, strictly increasing set of nonnegative evaluation times. Copies
/// share the underlying storage, so grids are cheap to pass around and can be
/// shared between worker threads.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> points) {
    require(!points.empty(), "time grid must be nonempty");
    for (std::size_t i = 0; i < points.size(); ++i) {
      require(std::isfinite(points[i]) && points[i] >= 0.0, "time grid points must be finite and >= 0");
      if (i > 0) require(points[i] > points[i - 1], "time grid points must be strictly increasing");
    }
    points_ = std::make_shared<const std::vector<double>>(std::move(points));
  }

  std::span<const double> points() const { return *points_; }
  std::size_t size() const { return points_->size(); }
  double operator[](std::size_t i) const { return (*points_)[i]; }
  double front() const { return points_->front(); }
  double back() const { return points_->back(); }

  /// Smallest strictly positive point, if any.
  std::optional<double> min_positive() const {
    for (double t : *points_)
      if (t > 0.0) return t;
    return std::nullopt;
  }

  std::optional<std::size_t> find(double t) const {
    const auto& p = *points_;
    auto it = std::lower_bound(p.begin(), p.end(), t - 1e-12 * (1.0 + std::abs(t)));
    if (it != p.end() && std::abs(*it - t) <= 1e-12 * (1.0 + std::abs(t)))
      return static_cast<std::size_t>(it - p.begin());
    return std::nullopt;
  }

  bool contains(double t) const { return find(t).has_value(); }

  std::size_t index_of(double t) const {
    auto i = find(t);
    if (!i) throw DomainError("time " + std::to_string(t) + " is not a grid point");
    return *i;
  }

  /// This grid with `t` merged in (no-op when already present).
  TimeGrid with_point(double t) const {
    if (contains(t)) return *this;
    std::vector<double> p(points_->begin(), points_->end());
    p.insert(std::upper_bound(p.begin(), p.end(), t), t);
    return TimeGrid(std::move(p));
  }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.points_ == b.points_ || *a.points_ == *b.points_;
  }

 private:
  std::shared_ptr<const std::vector<double>> points_;
};

inline TimeGrid make_grid(std::vector<double> points) { return TimeGrid(std::move(points)); }

/// A nonnegative path observed on a grid.
class Path {
 public:
  Path(TimeGrid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    require(values_.size() == grid_.size(), "path length must match its grid");
    for (double v : values_) require(std::isfinite(v) && v >= 0.0, "path values must be finite and >= 0");
  }

  /// The zero path.
  explicit Path(TimeGrid grid) : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}

  const TimeGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double at(double t) const { return values_[grid_.index_of(t)]; }

  bool is_nondecreasing() const { return std::is_sorted(values_.begin(), values_.end()); }

  /// Pointwise sum with a path on the same grid.
  Path operator+(const Path& other) const {
    require(grid_ == other.grid_, "cannot add paths on different grids");
    std::vector<double> v(values_);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += other.values_[i];
    return Path(grid_, std::move(v));
  }

  /// Restriction to the points of `sub`, which must be a subset of this grid.
  Path restricted_to(const TimeGrid& sub) const {
    std::vector<double> v(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) v[i] = at(sub[i]);
    return Path(sub, std::move(v));
  }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Jump laws
// ---------------------------------------------------------------------------

struct ExponentialJumps {
  double mean = 1.0;
};
struct GammaJumps {
  double shape = 1.0;
  double rate = 1.0;
};
struct ConstantJumps {
  double value = 1.0;
};
struct DiscreteJumps {
  std::vector<double> atoms;
  std::vector<double> probs;
};

using JumpSizeLaw = std::variant<ExponentialJumps, GammaJumps, ConstantJumps, DiscreteJumps>;

/// Compound-Poisson Levy measure: `rate` times the law of the jump size.
struct JumpLawSpec {
  double rate = 1.0;
  JumpSizeLaw law = ExponentialJumps{};
};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline void validate(const JumpSizeLaw& law) {
  std::visit(overloaded{
                 [](const ExponentialJumps& j) { require(j.mean > 0.0 && std::isfinite(j.mean), "exponential jump mean must be > 0"); },
                 [](const GammaJumps& j) {
                   require(j.shape > 0.0 && j.rate > 0.0 && std::isfinite(j.shape) && std::isfinite(j.rate),
                           "gamma jump shape and rate must be > 0");
                 },
                 [](const ConstantJumps& j) { require(j.value > 0.0 && std::isfinite(j.value), "constant jump size must be > 0"); },
                 [](const DiscreteJumps& j) {
                   require(!j.atoms.empty() && j.atoms.size() == j.probs.size(), "discrete jump law needs matching atoms and probs");
                   double total = 0.0;
                   for (std::size_t i = 0; i < j.atoms.size(); ++i) {
                     require(j.atoms[i] > 0.0 && std::isfinite(j.atoms[i]), "discrete jump atoms must be > 0");
                     require(j.probs[i] >= 0.0, "discrete jump probabilities must be >= 0");
                     total += j.probs[i];
                   }
                   require(std::abs(total - 1.0) < 1e-9, "discrete jump probabilities must sum to 1");
                 },
             },
             law);
}

inline void validate(const JumpLawSpec& spec) {
  require(spec.rate > 0.0 && std::isfinite(spec.rate), "jump rate must be > 0");
  validate(spec.law);
}

inline double mean_jump(const JumpSizeLaw& law) {
  return std::visit(overloaded{
                        [](const ExponentialJumps& j) { return j.mean; },
                        [](const GammaJumps& j) { return j.shape / j.rate; },
                        [](const ConstantJumps& j) { return j.value; },
                        [](const DiscreteJumps& j) {
                          return std::inner_product(j.atoms.begin(), j.atoms.end(), j.probs.begin(), 0.0);
                        },
                    },
                    law);
}

/// E exp(-c X) for a jump X, c >= 0.
inline double jump_laplace(const JumpSizeLaw& law, double c) {
  return std::visit(overloaded{
                        [c](const ExponentialJumps& j) { return 1.0 / (1.0 + c * j.mean); },
                        [c](const GammaJumps& j) { return std::pow(j.rate / (j.rate + c), j.shape); },
                        [c](const ConstantJumps& j) { return std::exp(-c * j.value); },
                        [c](const DiscreteJumps& j) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < j.atoms.size(); ++i) s += j.probs[i] * std::exp(-c * j.atoms[i]);
                          return s;
                        },
                    },
                    law);
}

/// 1 - E exp(-c X), computed without cancellation for small c.
inline double jump_laplace_complement(const JumpSizeLaw& law, double c) {
  return std::visit(overloaded{
                        [c](const ExponentialJumps& j) { return c * j.mean / (1.0 + c * j.mean); },
                        [c](const GammaJumps& j) { return -std::expm1(j.shape * std::log1p(-c / (j.rate + c))); },
                        [c](const ConstantJumps& j) { return -std::expm1(-c * j.value); },
                        [c](const DiscreteJumps& j) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < j.atoms.size(); ++i) s += j.probs[i] * -std::expm1(-c * j.atoms[i]);
                          return s;
                        },
                    },
                    law);
}

// ---------------------------------------------------------------------------
// Convolution kernels
// ---------------------------------------------------------------------------

/// f(u) = 1 on [0, length].
struct IndicatorKernel {
  double length = 1.0;
};
/// f(u) = exp(-decay u).
struct ExpDecayKernel {
  double decay = 1.0;
};
/// f(u) = (1 + u)^(-power) on [0, cutoff].
struct PowerCutoffKernel {
  double power = 1.0;
  double cutoff = 1.0;
};
/// Piecewise-linear interpolation of (knots, values); zero outside the knots.
struct TabulatedKernel {
  std::vector<double> knots;
  std::vector<double> values;
};

using Kernel = std::variant<IndicatorKernel, ExpDecayKernel, PowerCutoffKernel, TabulatedKernel>;

inline void validate(const Kernel& kernel) {
  std::visit(overloaded{
                 [](const IndicatorKernel& k) { require(k.length > 0.0 && std::isfinite(k.length), "indicator kernel length must be > 0"); },
                 [](const ExpDecayKernel& k) { require(k.decay >= 0.0 && std::isfinite(k.decay), "exponential kernel decay must be >= 0"); },
                 [](const PowerCutoffKernel& k) {
                   require(k.power >= 0.0 && k.cutoff > 0.0 && std::isfinite(k.cutoff), "power-cutoff kernel needs power >= 0, cutoff > 0");
                 },
                 [](const TabulatedKernel& k) {
                   require(k.knots.size() >= 2 && k.knots.size() == k.values.size(), "tabulated kernel needs >= 2 matching knots/values");
                   require(k.knots.front() >= 0.0, "tabulated kernel knots must be >= 0");
                   for (std::size_t i = 0; i < k.knots.size(); ++i) {
                     require(std::isfinite(k.values[i]) && k.values[i] >= 0.0, "tabulated kernel values must be >= 0");
                     if (i > 0) require(k.knots[i] > k.knots[i - 1], "tabulated kernel knots must increase");
                   }
                 },
             },
             kernel);
}

inline double kernel_value(const Kernel& kernel, double u) {
  if (u < 0.0) return 0.0;
  return std::visit(overloaded{
                        [u](const IndicatorKernel& k) { return u <= k.length ? 1.0 : 0.0; },
                        [u](const ExpDecayKernel& k) { return std::exp(-k.decay * u); },
                        [u](const PowerCutoffKernel& k) { return u <= k.cutoff ? std::pow(1.0 + u, -k.power) : 0.0; },
                        [u](const TabulatedKernel& k) {
                          if (u < k.knots.front() || u > k.knots.back()) return 0.0;
                          auto it = std::upper_bound(k.knots.begin(), k.knots.end(), u);
                          if (it == k.knots.end()) return k.values.back();
                          const std::size_t j = static_cast<std::size_t>(it - k.knots.begin());
                          const double w = (u - k.knots[j - 1]) / (k.knots[j] - k.knots[j - 1]);
                          return (1.0 - w) * k.values[j - 1] + w * k.values[j];
                        },
                    },
                    kernel);
}

/// Offsets u where the kernel is not smooth (its support edges and knots).
inline std::vector<double> kernel_breakpoints(const Kernel& kernel) {
  return std::visit(overloaded{
                        [](const IndicatorKernel& k) { return std::vector<double>{0.0, k.length}; },
                        [](const ExpDecayKernel&) { return std::vector<double>{0.0}; },
                        [](const PowerCutoffKernel& k) { return std::vector<double>{0.0, k.cutoff}; },
                        [](const TabulatedKernel& k) { return k.knots; },
                    },
                    kernel);
}

/// Upper bound of f on [0, a].
inline double kernel_sup(const Kernel& kernel, double a) {
  return std::visit(overloaded{
                        [](const IndicatorKernel&) { return 1.0; },
                        [](const ExpDecayKernel&) { return 1.0; },
                        [](const PowerCutoffKernel&) { return 1.0; },
                        [a](const TabulatedKernel& k) {
                          // piecewise linear: the max sits on a knot or at a
                          double m = kernel_value(Kernel{k}, a);
                          for (std::size_t i = 0; i < k.knots.size() && k.knots[i] <= a; ++i) m = std::max(m, k.values[i]);
                          return m;
                        },
                    },
                    kernel);
}

/// I(a) = integral of f over [0, a]. Built-in kernels go through adaptive
/// quadrature; tabulated kernels use the trapezoid rule, which is exact for
/// piecewise-linear data.
inline double kernel_integral(const Kernel& kernel, double a) {
  if (a <= 0.0) return 0.0;
  if (const auto* tab = std::get_if<TabulatedKernel>(&kernel)) {
    double total = 0.0;
    for (std::size_t i = 1; i < tab->knots.size(); ++i) {
      const double lo = tab->knots[i - 1], hi = std::min(tab->knots[i], a);
      if (hi <= lo) break;
      total += 0.5 * (tab->values[i - 1] + kernel_value(kernel, hi)) * (hi - lo);
    }
    return total;
  }
  return quad::integrate_piecewise([&](double u) { return kernel_value(kernel, u); }, kernel_breakpoints(kernel), 0.0, a).value;
}

// ---------------------------------------------------------------------------
// Process specifications
// ---------------------------------------------------------------------------

struct PoissonSpec {
  double lambda = 1.0;
};

/// Tempered stable subordinator with E exp(-u psi(1)) = exp(1 - (1+u)^alpha).
struct TemperedStableSpec {
  double alpha = 0.5;
};

/// Self-similar additive process driven by a compound-Poisson BDLP.
struct SatoSpec {
  double H = 1.0;
  JumpLawSpec bdlp;
  /// Upper truncation of the integral domain; chosen automatically when unset.
  std::optional<double> s_max;
};

/// Stochastic convolution psi(t) = int_0^t f(t - s) dZ_s with compound-Poisson Z.
struct ConvSpec {
  Kernel kernel = IndicatorKernel{};
  JumpLawSpec driver;
};

/// Killed continuous-time Markov chain on {0, ..., n-1}.
struct KilledChain {
  Eigen::MatrixXd rates;  // off-diagonal jump rates; the diagonal is ignored
  Eigen::VectorXd kill;   // per-state killing rates

  std::size_t size() const { return static_cast<std::size_t>(kill.size()); }
};

struct PermanentalSpec {
  KilledChain chain;
  double beta = 1.0;
};

using ProcessSpec = std::variant<PoissonSpec, TemperedStableSpec, SatoSpec, ConvSpec, PermanentalSpec>;

inline std::string family_name(const ProcessSpec& spec) {
  return std::visit(overloaded{
                        [](const PoissonSpec&) { return std::string("poisson"); },
                        [](const TemperedStableSpec&) { return std::string("tempered_stable"); },
                        [](const SatoSpec&) { return std::string("sato"); },
                        [](const ConvSpec&) { return std::string("convolution"); },
                        [](const PermanentalSpec&) { return std::string("permanental"); },
                    },
                    spec);
}

/// True for families whose paths are nondecreasing in t.
inline bool is_monotone_family(const ProcessSpec& spec) {
  return std::holds_alternative<PoissonSpec>(spec) || std::holds_alternative<TemperedStableSpec>(spec) ||
         std::holds_alternative<SatoSpec>(spec);
}

inline void validate_chain(const KilledChain& chain) {
  const auto n = chain.kill.size();
  require(n >= 1, "chain needs at least one state");
  require(chain.rates.rows() == n && chain.rates.cols() == n, "rate matrix must be n x n");
  for (Eigen::Index i = 0; i < n; ++i) {
    require(chain.kill(i) >= 0.0 && std::isfinite(chain.kill(i)), "kill rates must be >= 0");
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) require(chain.rates(i, j) >= 0.0 && std::isfinite(chain.rates(i, j)), "jump rates must be >= 0");
  }
}

inline void validate(const ProcessSpec& spec) {
  std::visit(overloaded{
                 [](const PoissonSpec& s) { require(s.lambda > 0.0 && std::isfinite(s.lambda), "poisson lambda must be > 0"); },
                 [](const TemperedStableSpec& s) { require(s.alpha > 0.0 && s.alpha < 1.0, "tempered stable alpha must lie in (0,1)"); },
                 [](const SatoSpec& s) {
                   require(s.H > 0.0 && std::isfinite(s.H), "sato H must be > 0");
                   validate(s.bdlp);
                   if (s.s_max) require(std::isfinite(*s.s_max), "sato s_max must be finite");
                 },
                 [](const ConvSpec& s) {
                   validate(s.kernel);
                   validate(s.driver);
                 },
                 [](const PermanentalSpec& s) {
                   validate_chain(s.chain);
                   require(s.beta == 0.5 || s.beta == 1.0, "permanental beta must be 1/2 or 1");
                 },
             },
             spec);
}

/// kappa = E[Z_1] for a compound-Poisson driver.
inline double driver_mean(const JumpLawSpec& law) { return law.rate * mean_jump(law.law); }

/// E psi(t) for the path-indexed families. Permanental means are per state;
/// see permanental_mean().
inline double mean_function(const ProcessSpec& spec, double t) {
  require(t >= 0.0, "mean_function needs t >= 0");
  return std::visit(overloaded{
                        [t](const PoissonSpec& s) { return s.lambda * t; },
                        [t](const TemperedStableSpec& s) { return s.alpha * t; },
                        [t](const SatoSpec& s) { return driver_mean(s.bdlp) * std::pow(t, s.H); },
                        [t](const ConvSpec& s) { return driver_mean(s.driver) * kernel_integral(s.kernel, t); },
                        [](const PermanentalSpec&) -> double {
                          throw DomainError("permanental processes are indexed by states; use permanental_mean");
                        },
                    },
                    spec);
}

// ---------------------------------------------------------------------------
// Laplace functional panels and ensembles
// ---------------------------------------------------------------------------

/// F(y) = exp(-sum_i alphas[i] * y(times[i])).
struct PanelEntry {
  std::vector<double> alphas;
  std::vector<double> times;

  double exponent(const Path& path) const {
    double s = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) s += alphas[i] * path.at(times[i]);
    return s;
  }
  double functional(const Path& path) const { return std::exp(-exponent(path)); }
};

struct LevyFunctionalPanel {
  std::vector<PanelEntry> entries;

  std::size_t size() const { return entries.size(); }
  const PanelEntry& operator[](std::size_t i) const { return entries[i]; }
};

inline void validate(const PanelEntry& entry, const TimeGrid& grid) {
  require(!entry.alphas.empty() && entry.alphas.size() == entry.times.size(), "panel entry needs matching alphas and times");
  for (std::size_t i = 0; i < entry.alphas.size(); ++i) {
    require(std::isfinite(entry.alphas[i]) && entry.alphas[i] >= 0.0, "panel alphas must be finite and >= 0");
    require(grid.contains(entry.times[i]), "panel time " + std::to_string(entry.times[i]) + " is not on the grid");
  }
}

inline void validate(const LevyFunctionalPanel& panel, const TimeGrid& grid) {
  require(!panel.entries.empty(), "panel must be nonempty");
  for (const auto& e : panel.entries) validate(e, grid);
}

/// Single-entry panel exp(-alpha * y(t)).
inline PanelEntry point_entry(double alpha, double t) { return PanelEntry{{alpha}, {t}}; }

/// N paths on a common grid with nonnegative importance weights.
struct WeightedEnsemble {
  TimeGrid grid;
  std::vector<Path> paths;
  std::vector<double> weights;

  WeightedEnsemble(TimeGrid g, std::vector<Path> p, std::vector<double> w)
      : grid(std::move(g)), paths(std::move(p)), weights(std::move(w)) {
    require(!paths.empty(), "ensemble must be nonempty");
    require(paths.size() == weights.size(), "ensemble needs one weight per path");
    double total = 0.0;
    for (double x : weights) {
      require(std::isfinite(x) && x >= 0.0, "ensemble weights must be finite and >= 0");
      total += x;
    }
    require(total > 0.0, "ensemble weights must not all be zero");
  }

  static WeightedEnsemble unweighted(TimeGrid g, std::vector<Path> p) {
    std::vector<double> w(p.size(), 1.0);
    return WeightedEnsemble(std::move(g), std::move(p), std::move(w));
  }

  std::size_t size() const { return paths.size(); }
};

}  // namespace levyid

#endif
