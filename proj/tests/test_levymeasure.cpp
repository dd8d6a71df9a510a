#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/special_functions/gamma.hpp>

#include "common.hpp"
#include "levyid/levymeasure.hpp"

using namespace levyid;

namespace {

// Closed-form Levy exponents for Exp(1)-jump drivers and the two
// independent-increment families, summed over the segments cut by the entry
// times. C_k is the total alpha of times >= t_k.
std::vector<std::pair<double, double>> segments(const PanelEntry& e) {
  std::set<double> ts(e.times.begin(), e.times.end());
  std::vector<std::pair<double, double>> out;  // (t_k, C_k)
  for (double t : ts) {
    double c = 0.0;
    for (std::size_t i = 0; i < e.times.size(); ++i)
      if (e.times[i] >= t) c += e.alphas[i];
    out.emplace_back(t, c);
  }
  return out;
}

double poisson_exponent(double lambda, const PanelEntry& e) {
  double prev = 0.0, sum = 0.0;
  for (auto [t, c] : segments(e)) {
    sum += lambda * (t - prev) * -std::expm1(-c);
    prev = t;
  }
  return sum;
}

double tempered_exponent(double alpha, const PanelEntry& e) {
  double prev = 0.0, sum = 0.0;
  for (auto [t, c] : segments(e)) {
    sum += (t - prev) * (std::pow(1.0 + c, alpha) - 1.0);
    prev = t;
  }
  return sum;
}

// Sato with unit-rate Exp(1) BDLP: a segment of jump times (t_{k-1}, t_k]
// contributes log((1 + C t_k^H) / (1 + C t_{k-1}^H)).
double sato_exponent(double H, const PanelEntry& e) {
  double prev = 0.0, sum = 0.0;
  for (auto [t, c] : segments(e)) {
    sum += std::log((1.0 + c * std::pow(t, H)) / (1.0 + c * std::pow(prev, H)));
    prev = t;
  }
  return sum;
}

// Indicator kernel on [0, 1], unit-rate Exp(1) driver: int C(s) / (1 + C(s)) ds.
double conv_exponent(const PanelEntry& e) {
  std::set<double> cuts{0.0};
  for (double t : e.times) {
    cuts.insert(t);
    if (t > 1.0) cuts.insert(t - 1.0);
  }
  std::vector<double> c(cuts.begin(), cuts.end());
  double sum = 0.0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    const double mid = 0.5 * (c[k - 1] + c[k]);
    double cc = 0.0;
    for (std::size_t i = 0; i < e.times.size(); ++i)
      if (e.times[i] - mid >= 0.0 && e.times[i] - mid <= 1.0) cc += e.alphas[i];
    sum += (c[k] - c[k - 1]) * cc / (1.0 + cc);
  }
  return sum;
}

ProbabilisticOptions prob(std::size_t n = 100000) {
  ProbabilisticOptions o;
  o.replicates = n;
  o.bootstrap = 300;
  return o;
}

}  // namespace

TEST(NuQuadrature, ScalarClosedForms) {
  const auto f1 = point_entry(1.0, 1.0);
  EXPECT_NEAR(nu_quadrature(PoissonSpec{1.0}, f1).value, 1.0 - std::exp(-1.0), 1e-12);
  EXPECT_NEAR(nu_quadrature(TemperedStableSpec{0.5}, f1).value, std::sqrt(2.0) - 1.0, 1e-12);
  EXPECT_NEAR(nu_quadrature(levyid::testing::sato(), f1).value, std::log(2.0), 1e-10);
  EXPECT_NEAR(nu_quadrature(levyid::testing::conv(), f1).value, 0.5, 1e-12);
}

TEST(NuQuadrature, PanelMatchesSegmentFormulas) {
  for (const auto& e : levyid::testing::standard_panel().entries) {
    EXPECT_NEAR(nu_quadrature(PoissonSpec{1.3}, e).value, poisson_exponent(1.3, e), 1e-10);
    EXPECT_NEAR(nu_quadrature(TemperedStableSpec{0.3}, e).value, tempered_exponent(0.3, e), 1e-10);
    for (double H : {0.5, 1.0, 2.0})
      EXPECT_NEAR(nu_quadrature(levyid::testing::sato(H), e).value, sato_exponent(H, e), 1e-9) << "H=" << H;
    EXPECT_NEAR(nu_quadrature(levyid::testing::conv(), e).value, conv_exponent(e), 1e-10);
  }
}

TEST(NuQuadrature, ZeroFunctional) {
  const PanelEntry zero{{0.0, 0.0}, {1.0, 2.0}};
  for (const auto& spec : levyid::testing::path_families()) EXPECT_EQ(nu_quadrature(spec, zero).value, 0.0);
}

TEST(NuQuadrature, TotalMassOnPositiveSet) {
  EXPECT_NEAR(nu_total_mass_at(PoissonSpec{2.0}, 3.0).value, 6.0, 1e-12);
  // indicator kernel of length 1: f(a - s) > 0 for s in [a - 1, a]
  EXPECT_NEAR(nu_total_mass_at(levyid::testing::conv(), 2.5).value, 1.0, 1e-12);
  EXPECT_NEAR(nu_total_mass_at(levyid::testing::conv(), 0.4).value, 0.4, 1e-12);
  EXPECT_THROW(nu_total_mass_at(levyid::testing::tempered(), 1.0), NumericalError);
  EXPECT_THROW(nu_total_mass_at(levyid::testing::sato(), 1.0), NumericalError);
}

TEST(NuQuadrature, RestrictedPoissonClosedForm) {
  // {y(1) = 0} keeps jumps after time 1
  EXPECT_NEAR(nu_quadrature(PoissonSpec{1.0}, point_entry(1.0, 2.0), Restriction::zero_at_a, 1.0).value, 1.0 - std::exp(-1.0),
              1e-12);
  EXPECT_NEAR(nu_quadrature(PoissonSpec{1.0}, point_entry(1.0, 2.0), Restriction::positive_at_a, 1.0).value,
              1.0 - std::exp(-1.0), 1e-12);
  EXPECT_NEAR(nu_quadrature(PoissonSpec{1.0}, point_entry(1.0, 0.5), Restriction::zero_at_a, 1.0).value, 0.0, 1e-15);
}

TEST(NuQuadrature, SplitAdditivity) {
  const auto panel = levyid::testing::standard_panel();
  std::vector<ProcessSpec> specs = levyid::testing::path_families();
  specs.push_back(ConvSpec{ExpDecayKernel{0.8}, JumpLawSpec{2.0, GammaJumps{0.5, 1.0}}});
  specs.push_back(ConvSpec{PowerCutoffKernel{1.5, 1.2}, JumpLawSpec{1.0, ConstantJumps{0.7}}});
  for (const auto& spec : specs)
    for (double a : {0.5, 1.0, 2.0})
      for (const auto& c : split_additivity(spec, panel, a)) {
        EXPECT_LE(c.residual, 1e-8) << family_name(spec) << " a=" << a << " " << c.label;
        EXPECT_GE(c.nu_zero, -1e-15);
        EXPECT_GE(c.nu_positive, -1e-15);
      }
}

TEST(LevyConditions, ClosedForms) {
  const auto g = make_grid({0.0, 1.0, 2.0});
  const auto p = validate_levy_conditions(PoissonSpec{1.0}, g);
  EXPECT_TRUE(p.all_finite);
  EXPECT_NEAR(p.points[0].value, 0.0, 1e-15);
  EXPECT_NEAR(p.points[2].value, 2.0, 1e-12);

  const double alpha = 0.5;
  const double per_unit = (boost::math::tgamma_lower(1.0 - alpha, 1.0) +
                           (std::exp(-1.0) - boost::math::tgamma(1.0 - alpha, 1.0)) / alpha) /
                          (boost::math::tgamma(1.0 - alpha) / alpha);
  const auto ts = validate_levy_conditions(TemperedStableSpec{alpha}, g);
  EXPECT_TRUE(ts.all_finite);
  EXPECT_NEAR(ts.points[1].value, per_unit, 1e-9);
  EXPECT_NEAR(ts.points[2].value, 2.0 * per_unit, 1e-9);

  // Sato, unit-rate Exp(1) BDLP: int_0^{t^H} (1 - e^{-1/k}) dk
  EXPECT_NEAR(validate_levy_conditions(levyid::testing::sato(1.0), make_grid({1.0})).points[0].value,
              0.851504493224077952, 1e-9);
  EXPECT_NEAR(validate_levy_conditions(levyid::testing::sato(0.5), make_grid({2.0})).points[0].value,
              1.085679543686726545, 1e-9);

  const auto conv = validate_levy_conditions(levyid::testing::conv(), make_grid({0.5, 3.0}));
  // Exp(1) jumps, k = 1: E min(X, 1) = 1 - e^{-1}, over a window of length min(t, 1)
  EXPECT_NEAR(conv.points[0].value, 0.5 * (1.0 - std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(conv.points[1].value, 1.0 - std::exp(-1.0), 1e-12);
}

TEST(LevyConditions, DegenerateAndInvalid) {
  const auto zero = validate_levy_conditions(PoissonSpec{0.0}, make_grid({1.0, 2.0}));
  EXPECT_TRUE(zero.all_finite);
  EXPECT_EQ(zero.points[1].value, 0.0);
  const auto bad = validate_levy_conditions(TemperedStableSpec{1.5}, make_grid({1.0}));
  EXPECT_FALSE(bad.all_finite);
  EXPECT_FALSE(bad.points[0].diagnostic.empty());
}

TEST(NuProbabilistic, PoissonAndTemperedScalar) {
  const auto f1 = point_entry(1.0, 1.0);
  const auto p = nu_probabilistic(StreamFactory(1), PoissonSpec{1.0}, f1, prob());
  EXPECT_NEAR(p.value, 1.0 - std::exp(-1.0), 4.0 * p.se);
  EXPECT_GT(p.se, 0.0);
  const auto t = nu_probabilistic(StreamFactory(2), TemperedStableSpec{0.5}, f1, prob());
  EXPECT_NEAR(t.value, std::sqrt(2.0) - 1.0, 4.0 * t.se);
}

TEST(NuProbabilistic, ZeroFunctionalIsExactlyZero) {
  const auto e = nu_probabilistic(StreamFactory(3), levyid::testing::sato(), PanelEntry{{0.0}, {1.0}}, prob(100));
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.se, 0.0);
}

TEST(NuProbabilistic, AllFamiliesAgreeWithQuadrature) {
  const auto panel = levyid::testing::standard_panel();
  std::vector<ProcessSpec> specs = levyid::testing::path_families();
  specs.push_back(levyid::testing::sato(0.5));
  specs.push_back(TemperedStableSpec{0.3});
  specs.push_back(ConvSpec{ExpDecayKernel{1.0}, JumpLawSpec{2.0, GammaJumps{2.0, 1.0}}});
  for (const auto& spec : specs) {
    const auto rep = levy_representation_check(StreamFactory(4), spec, panel, prob(50000), 4.0);
    for (const auto& e : rep.entries)
      std::printf("  %-16s %-32s mc=%.5f(%.5f) quad=%.5f z=%+.2f\n", rep.family.c_str(), e.label.c_str(), e.lhs.value,
                  e.lhs.se, e.rhs.value, e.z);
    EXPECT_TRUE(rep.all_entries_pass) << rep.family << " max |z| " << rep.max_abs_z();
  }
}

TEST(NuProbabilistic, PoissonMixingLawInvariance) {
  ProbabilisticOptions first = prob(), second = prob();
  second.poisson_mixing_mean = 5.0;
  const auto rep = poisson_mixing_invariance_check(StreamFactory(5), PoissonSpec{1.0}, levyid::testing::standard_panel(),
                                                   first, second, 4.0);
  EXPECT_TRUE(rep.all_entries_pass) << rep.max_abs_z();
}

TEST(LaplaceExponent, AllFamilies) {
  const auto g = levyid::testing::standard_grid();
  McOptions mc;
  mc.replicates = 100000;
  mc.bootstrap = 300;
  mc.z_crit = 4.0;
  for (const auto& spec : levyid::testing::path_families()) {
    const auto rep = laplace_exponent_check(StreamFactory(6), spec, g, levyid::testing::standard_panel(), mc);
    EXPECT_TRUE(rep.all_entries_pass) << rep.family << " max |z| " << rep.max_abs_z();
  }
}

TEST(LaplaceExponent, ScalarPoissonAndTempered) {
  const auto g = make_grid({1.0});
  const LevyFunctionalPanel panel{{point_entry(1.0, 1.0)}};
  McOptions mc;
  mc.replicates = 100000;
  mc.bootstrap = 300;
  const auto p = laplace_exponent_check(StreamFactory(7), PoissonSpec{1.0}, g, panel, mc);
  EXPECT_NEAR(p.entries[0].rhs.value, 1.0 - std::exp(-1.0), 1e-12);
  EXPECT_TRUE(p.passed());
  const auto t = laplace_exponent_check(StreamFactory(8), TemperedStableSpec{0.5}, g, panel, mc);
  EXPECT_NEAR(t.entries[0].rhs.value, std::sqrt(2.0) - 1.0, 1e-12);
  EXPECT_TRUE(t.passed());
}
