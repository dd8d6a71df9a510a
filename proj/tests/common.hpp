#ifndef LEVYID_TESTS_COMMON_HPP
#define LEVYID_TESTS_COMMON_HPP

#include <cmath>
#include <vector>

#include "levyid/core.hpp"
#include "levyid/statlab.hpp"

namespace levyid::testing {

inline TimeGrid standard_grid() { return make_grid({0.5, 1.0, 1.5, 2.0, 3.0}); }

inline LevyFunctionalPanel standard_panel() {
  return LevyFunctionalPanel{{
      PanelEntry{{1.0}, {1.0}},
      PanelEntry{{0.5}, {0.5}},
      PanelEntry{{2.0}, {2.0}},
      PanelEntry{{1.0, 1.0}, {0.5, 1.5}},
      PanelEntry{{0.5, 0.5, 0.5}, {1.0, 2.0, 3.0}},
      PanelEntry{{1.5}, {3.0}},
  }};
}

inline JumpLawSpec unit_exponential_driver() { return JumpLawSpec{1.0, ExponentialJumps{1.0}}; }

inline ProcessSpec poisson() { return PoissonSpec{1.0}; }
inline ProcessSpec tempered() { return TemperedStableSpec{0.5}; }
inline ProcessSpec sato(double H = 1.0) { return SatoSpec{H, unit_exponential_driver(), std::nullopt}; }
inline ProcessSpec conv() { return ConvSpec{IndicatorKernel{1.0}, unit_exponential_driver()}; }

inline std::vector<ProcessSpec> path_families() { return {poisson(), tempered(), sato(), conv()}; }

/// |value - target| within k standard errors.
inline bool within(const Estimate& e, double target, double k) { return std::abs(e.value - target) <= k * e.se; }

/// Sample mean and its standard error.
struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

template <class Fn>
Moments sample_mean(std::size_t n, Fn&& draw) {
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = draw(i);
    s += x;
    s2 += x * x;
  }
  const double m = s / static_cast<double>(n);
  const double var = std::max(0.0, s2 / static_cast<double>(n) - m * m);
  return {m, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace levyid::testing

#endif
