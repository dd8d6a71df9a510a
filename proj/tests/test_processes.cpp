#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "levyid/processes.hpp"

using namespace levyid;
using levyid::testing::sample_mean;

namespace {

constexpr std::size_t kN = 100000;

template <class Fn>
double correlation(std::size_t n, Fn&& draw_pair) {
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x, y] = draw_pair(i);
    sx += x, sy += y, sxy += x * y, sxx += x * x, syy += y * y;
  }
  const double m = static_cast<double>(n);
  const double cov = sxy / m - sx * sy / (m * m);
  return cov / std::sqrt((sxx / m - sx * sx / (m * m)) * (syy / m - sy * sy / (m * m)));
}

}  // namespace

TEST(PoissonPath, MarginalsAndZeroProbability) {
  const StreamFactory f(1);
  const auto g1 = make_grid({1.0});
  const auto m = sample_mean(kN, [&](std::size_t i) {
    RngStream r = f.stream(i);
    return sample_poisson_path(r, 1.0, g1)[0];
  });
  EXPECT_NEAR(m.mean, 1.0, 0.01);

  const auto g3 = make_grid({3.0});
  const auto zero = sample_mean(kN, [&](std::size_t i) {
    RngStream r = f.fork("zero").stream(i);
    return sample_poisson_path(r, 2.0, g3)[0] == 0.0 ? 1.0 : 0.0;
  });
  EXPECT_NEAR(zero.mean, std::exp(-6.0), 0.001);
}

TEST(PoissonPath, IndependentIncrements) {
  const StreamFactory f(2);
  const auto g = make_grid({1.0, 2.0});
  const double c = correlation(kN, [&](std::size_t i) {
    RngStream r = f.stream(i);
    const Path p = sample_poisson_path(r, 1.0, g);
    return std::pair{p[0], p[1] - p[0]};
  });
  EXPECT_LT(std::abs(c), 3.0 / std::sqrt(static_cast<double>(kN)));
}

TEST(TemperedStablePath, LaplaceMeanAndMonotone) {
  const StreamFactory f(3);
  const auto g1 = make_grid({1.0});
  const auto lt = sample_mean(kN, [&](std::size_t i) {
    RngStream r = f.stream(i);
    return std::exp(-sample_ts_path(r, 0.5, g1)[0]);
  });
  EXPECT_NEAR(lt.mean, std::exp(1.0 - std::sqrt(2.0)), 0.003);

  const auto g2 = make_grid({2.0});
  const auto m = sample_mean(kN, [&](std::size_t i) {
    RngStream r = f.fork("mean").stream(i);
    return sample_ts_path(r, 0.5, g2)[0];
  });
  EXPECT_NEAR(m.mean, 1.0, 0.01);

  const auto g = levyid::testing::standard_grid();
  for (std::size_t i = 0; i < kN; ++i) {
    RngStream r = f.fork("mono").stream(i);
    ASSERT_TRUE(sample_ts_path(r, 0.5, g).is_nondecreasing());
  }
}

TEST(TemperedStablePath, IndependentIncrements) {
  const StreamFactory f(4);
  const auto g = make_grid({1.0, 2.0});
  const double c = correlation(kN, [&](std::size_t i) {
    RngStream r = f.stream(i);
    const Path p = sample_ts_path(r, 0.5, g);
    return std::pair{p[0], p[1] - p[0]};
  });
  EXPECT_LT(std::abs(c), 3.0 / std::sqrt(static_cast<double>(kN)));
}

TEST(SatoPath, MeansMatchKappaTPowerH) {
  const StreamFactory f(5);
  const SatoSpec spec{1.0, JumpLawSpec{1.0, ExponentialJumps{1.0}}, std::nullopt};
  const auto g = make_grid({1.0, 2.0});
  double s1 = 0, s2 = 0;
  for (std::size_t i = 0; i < kN; ++i) {
    RngStream r = f.stream(i);
    const Path p = sample_sato_path(r, spec, g);
    ASSERT_TRUE(p.is_nondecreasing());
    s1 += p[0];
    s2 += p[1];
  }
  EXPECT_NEAR(s1 / kN, 1.0, 0.02);
  EXPECT_NEAR(s2 / kN, 2.0, 0.03);
}

TEST(SatoPath, SelfSimilarLaplace) {
  const StreamFactory f(6);
  for (double H : {0.5, 1.0}) {
    const SatoSpec spec{H, JumpLawSpec{1.0, ExponentialJumps{1.0}}, std::nullopt};
    const auto g = make_grid({1.0, 2.0});
    const auto lhs = sample_mean(kN, [&](std::size_t i) {
      RngStream r = f.fork("lhs").stream(i);
      return std::exp(-sample_sato_path(r, spec, g)[1]);
    });
    const auto rhs = sample_mean(kN, [&](std::size_t i) {
      RngStream r = f.fork("rhs").stream(i);
      return std::exp(-std::pow(2.0, H) * sample_sato_path(r, spec, g)[0]);
    });
    EXPECT_NEAR(lhs.mean, rhs.mean, 3.0 * std::hypot(lhs.se, rhs.se)) << "H=" << H;
  }
}

TEST(SatoPath, VanishesAtZero) {
  const StreamFactory f(7);
  const SatoSpec spec{1.0, JumpLawSpec{1.0, ExponentialJumps{1.0}}, std::nullopt};
  const auto m = sample_mean(20000, [&](std::size_t i) {
    RngStream r = f.stream(i);
    return sample_sato_path(r, spec, make_grid({0.01}))[0];
  });
  EXPECT_LT(m.mean, 0.02);
  RngStream r(7, 0);
  EXPECT_EQ(sample_sato_path(r, spec, make_grid({0.0, 1.0}))[0], 0.0);
}

TEST(SatoPath, TruncationPoint) {
  SatoSpec spec{1.0, JumpLawSpec{1.0, ExponentialJumps{1.0}}, std::nullopt};
  const auto g = make_grid({0.5, 2.0});
  EXPECT_NEAR(sato_truncation(spec, g), std::log(1e6) - std::log(0.5), 1e-12);
  spec.s_max = 5.0;
  EXPECT_THROW(sato_truncation(spec, g), DomainError);
  spec.s_max = 20.0;
  EXPECT_DOUBLE_EQ(sato_truncation(spec, g), 20.0);
}

TEST(ConvPath, MeansAndZeroKernel) {
  const StreamFactory f(8);
  const ConvSpec spec{IndicatorKernel{1.0}, JumpLawSpec{1.0, ExponentialJumps{1.0}}};
  const auto g = make_grid({0.5, 3.0});
  double s1 = 0, s2 = 0;
  for (std::size_t i = 0; i < kN; ++i) {
    RngStream r = f.stream(i);
    const Path p = sample_conv_path(r, spec, g);
    s1 += p[0];
    s2 += p[1];
  }
  EXPECT_NEAR(s1 / kN, 0.5, 0.01);
  EXPECT_NEAR(s2 / kN, 1.0, 0.01);

  const ConvSpec zero{TabulatedKernel{{0.0, 1.0}, {0.0, 0.0}}, JumpLawSpec{3.0, ExponentialJumps{1.0}}};
  for (std::size_t i = 0; i < 1000; ++i) {
    RngStream r = f.fork("zero").stream(i);
    const Path p = sample_conv_path(r, zero, g);
    ASSERT_EQ(p[0], 0.0);
    ASSERT_EQ(p[1], 0.0);
  }
}

TEST(ConvPath, ExponentialKernelLaplace) {
  // E exp(-u psi(t)) = exp(-rate int_0^t (1 - 1/(1 + u e^{-c s})) ds) for Exp(1) jumps
  const StreamFactory f(9);
  const double c = 0.7, u = 1.0, t = 2.0;
  const ConvSpec spec{ExpDecayKernel{c}, JumpLawSpec{1.5, ExponentialJumps{1.0}}};
  const double exponent = 1.5 * std::log((1.0 + u) / (1.0 + u * std::exp(-c * t))) / c;
  const auto m = sample_mean(kN, [&](std::size_t i) {
    RngStream r = f.stream(i);
    return std::exp(-u * sample_conv_path(r, spec, make_grid({t}))[0]);
  });
  EXPECT_NEAR(m.mean, std::exp(-exponent), 4.0 * m.se);
}

TEST(Dispatch, PermanentalIsRejected) {
  RngStream r(1, 1);
  EXPECT_THROW(sample_path(r, PermanentalSpec{}, make_grid({1.0})), DomainError);
}

TEST(Dispatch, Deterministic) {
  const auto g = levyid::testing::standard_grid();
  for (const auto& spec : levyid::testing::path_families()) {
    RngStream a(99, 3), b(99, 3);
    const Path p = sample_path(a, spec, g), q = sample_path(b, spec, g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(p[i], q[i]);
  }
}
