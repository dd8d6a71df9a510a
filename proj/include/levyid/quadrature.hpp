#ifndef LEVYID_QUADRATURE_HPP
#define LEVYID_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "levyid/error.hpp"

namespace levyid::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
};

/// Relative termination tolerance handed to the Gauss-Kronrod driver. The
/// pieces we integrate are smooth, so this reaches ~1e-13 absolute in
/// practice, well inside the 1e-8 / 1e-10 absolute targets.
inline constexpr double kRelTol = 1e-13;
inline constexpr unsigned kMaxDepth = 20;

/// Adaptive 31-point Gauss-Kronrod on [lo, hi]; hi may be +inf.
template <class F>
Result integrate(F&& f, double lo, double hi) {
  Result r;
  if (!(hi > lo)) return r;
  r.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, lo, hi, kMaxDepth, kRelTol, &r.error);
  if (!std::isfinite(r.value)) throw NumericalError("quadrature produced a non-finite value");
  return r;
}

/// Integrates over [lo, hi] after splitting at every breakpoint inside it.
/// Integrands here are piecewise smooth with jumps at known places, and
/// splitting there keeps each Gauss-Kronrod panel smooth.
template <class F>
Result integrate_piecewise(F&& f, std::vector<double> breaks, double lo, double hi) {
  Result total;
  if (!(hi > lo)) return total;
  breaks.push_back(lo);
  if (std::isfinite(hi)) breaks.push_back(hi);
  std::erase_if(breaks, [&](double b) { return !(b >= lo && b <= hi) || !std::isfinite(b); });
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double x, double y) { return std::abs(x - y) <= 1e-14 * (1.0 + std::abs(x)); }),
               breaks.end());
  if (!std::isfinite(hi)) breaks.push_back(hi);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const Result piece = integrate(f, breaks[i], breaks[i + 1]);
    total.value += piece.value;
    total.error += piece.error;
  }
  return total;
}

}  // namespace levyid::quad

#endif
