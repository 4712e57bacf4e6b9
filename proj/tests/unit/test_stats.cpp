#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "rwre/rng.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

namespace {

std::vector<double> pareto(double alpha, std::size_t n, std::uint64_t seed) {
  CounterStream rng(seed, StreamTag::synthetic, 0);
  std::vector<double> x(n);
  for (auto& v : x) v = std::pow(1.0 - rng.uniform(), -1.0 / alpha);
  return x;
}

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  CounterStream rng(seed, StreamTag::synthetic, 1);
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

std::vector<double> stable_sums(double alpha, std::size_t terms, std::size_t reps, std::uint64_t seed) {
  std::vector<double> out(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    CounterStream rng(seed, StreamTag::synthetic, 100 + r);
    double s = 0.0;
    for (std::size_t i = 0; i < terms; ++i) s += std::pow(1.0 - rng.uniform(), -1.0 / alpha);
    out[r] = s / std::pow(static_cast<double>(terms), 1.0 / alpha);
  }
  return out;
}

}  // namespace

TEST(Hill, ParetoSmallIndex) {
  const auto x = pareto(0.585, 100000, 1);
  const TailFit f = hill_estimate(x, std::nullopt, 7);
  EXPECT_EQ(f.k_order, 316u);
  EXPECT_NEAR(f.s_hat, 0.585, 0.05);
  EXPECT_LE(f.ci_low, f.s_hat);
  EXPECT_GE(f.ci_high, f.s_hat);
  EXPECT_LT(f.ci_low, 0.585);
  EXPECT_GT(f.ci_high, 0.585);
  EXPECT_GT(f.k_inf_hat, 0.5);
  EXPECT_LT(f.k_inf_hat, 2.0);
}

TEST(Hill, ParetoLargerIndex) {
  const auto x = pareto(1.222, 100000, 2);
  EXPECT_NEAR(hill_estimate(x).s_hat, 1.222, 0.08);
}

TEST(Hill, Errors) {
  EXPECT_THROW(hill_estimate(std::vector<double>(100, 3.0)), InvalidArgument);
  EXPECT_THROW(hill_estimate(std::vector<double>{1, 2, -1, 4, 5}), InvalidArgument);
  const auto x = pareto(1.0, 100, 3);
  EXPECT_THROW(hill_estimate(x, 50), InvalidArgument);
}

TEST(Hill, BootstrapIsThreadIndependent) {
  const auto x = pareto(0.8, 20000, 4);
  const TailFit a = hill_estimate(x, std::nullopt, 5, 200, 1);
  const TailFit b = hill_estimate(x, std::nullopt, 5, 200, 4);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
}

TEST(Ks, OwnEcdfIsZero) {
  const auto x = normals(500, 3);
  EXPECT_EQ(ks_distance(x, empirical_cdf(x)), 0.0);
  std::vector<double> ties{1, 1, 2, 2, 2, 5};
  EXPECT_EQ(ks_distance(ties, empirical_cdf(ties)), 0.0);
}

TEST(Ks, NormalSampleAgainstPhi) {
  const auto x = normals(100000, 4);
  EXPECT_LE(ks_distance(x, std_normal_cdf), 0.01);
}

TEST(Ks, AtomAtZero) {
  EXPECT_DOUBLE_EQ(ks_distance(std::vector<double>(10, 0.0), std_normal_cdf), 0.5);
}

TEST(Ks, InvariantUnderMonotoneTransform) {
  const auto x = normals(2000, 5);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
  const double d1 = ks_distance(x, std_normal_cdf);
  const double d2 = ks_distance(y, [](double t) { return t > 0 ? std_normal_cdf(std::log(t)) : 0.0; });
  EXPECT_NEAR(d1, d2, 1e-12);
}

TEST(Ks, TwoSample) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{3, 4, 5, 6};
  EXPECT_DOUBLE_EQ(ks_two_sample(a, b), 0.5);
  EXPECT_EQ(ks_two_sample(a, a), 0.0);
}

TEST(NormalCdf, Values) {
  EXPECT_EQ(std_normal_cdf(0.0), 0.5);
  // Quadrature oracle for Phi(1.959964).
  const double tail = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double t) { return std::exp(-t * t / 2) / std::sqrt(2 * std::numbers::pi); }, 0.0, 1.959964, 15, 1e-14);
  EXPECT_NEAR(std_normal_cdf(1.959964), 0.5 + tail, 1e-12);
  EXPECT_NEAR(std_normal_cdf(1.959964), 0.975, 1e-6);
}

TEST(NormalCdf, MonotoneBoundedSymmetric) {
  double prev = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = -10.0 + 20.0 * i / 9999.0;
    const double p = std_normal_cdf(x);
    ASSERT_GE(p, prev);
    ASSERT_GE(p, 0.0);
    ASSERT_LE(p, 1.0);
    ASSERT_NEAR(p + std_normal_cdf(-x), 1.0, 1e-15);
    prev = p;
  }
}

TEST(ScalingStability, IdenticalSamples) {
  const auto x = pareto(0.585, 1000, 9);
  for (double s : {1.0, 0.5, 0.25}) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * std::pow(2.0, 1.0 / s);
    EXPECT_EQ(scaling_stability(x, y, s), 0.0);
  }
  // A non-dyadic factor may reorder a rounding tie, at most one jump.
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * std::pow(2.0, 1.0 / 0.585);
  EXPECT_LE(scaling_stability(x, y, 0.585), 1.0 / 1000.0 + 1e-15);
}

TEST(ScalingStability, StableDomainOracle) {
  // Unnormalized sums S_n, S_2n of Pareto(alpha) summands.
  const double alpha = 0.585;
  auto sums = [&](std::size_t terms, std::uint64_t seed) {
    auto v = stable_sums(alpha, terms, 2000, seed);
    for (auto& x : v) x *= std::pow(static_cast<double>(terms), 1.0 / alpha);
    return v;
  };
  const auto sn = sums(500, 11);
  const auto s2n = sums(1000, 12);
  std::vector<double> sn_scaled(sn.size());
  for (std::size_t i = 0; i < sn.size(); ++i) sn_scaled[i] = sn[i] / std::pow(500.0, 1.0 / alpha);
  std::vector<double> s2n_scaled(s2n.size());
  for (std::size_t i = 0; i < s2n.size(); ++i) s2n_scaled[i] = s2n[i] / std::pow(500.0, 1.0 / alpha);
  EXPECT_LE(scaling_stability(sn_scaled, s2n_scaled, alpha), 0.05);
  EXPECT_GE(scaling_stability(sn_scaled, s2n_scaled, 0.3), 0.15);
}

TEST(SurvivalFit, ParetoSlope) {
  const auto x = pareto(0.585, 100000, 13);
  const SurvivalFit f = survival_loglog_fit(x);
  EXPECT_NEAR(f.slope, -0.585, 0.03);
  EXPECT_FALSE(f.non_power);
}

TEST(SurvivalFit, ExponentialFlaggedNonPower) {
  CounterStream rng(14, StreamTag::synthetic, 0);
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> x(100000);
  for (auto& v : x) v = ex(rng);
  const SurvivalFit f = survival_loglog_fit(x);
  EXPECT_TRUE(f.non_power);
  EXPECT_GT(f.curvature, kCurvatureThreshold);
}

TEST(SurvivalFit, Errors) {
  EXPECT_THROW(survival_loglog_fit(std::vector<double>(5000, 2.0)), InvalidArgument);
  EXPECT_THROW(survival_loglog_fit(std::vector<double>(10, 2.0)), InvalidArgument);
}

TEST(SurvivalFit, AgreesWithHillWithinJointIntervals) {
  std::uint64_t seed = 20;
  for (double alpha : {0.3, 0.585, 1.22}) {
    const auto x = pareto(alpha, 50000, seed++);
    const TailFit h = hill_estimate(x, std::nullopt, seed);
    const SurvivalFit f = survival_loglog_fit(x, 0.10, 0.01, 200, seed);
    EXPECT_LE(std::max(h.ci_low, f.ci_low), std::min(h.ci_high, f.ci_high)) << alpha;
  }
}

TEST(Moments, Welford) {
  const std::vector<double> x{1, 2, 3, 4};
  const Moments m = sample_moments(x);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  const auto [a, b] = linear_fit(std::vector<double>{0, 1, 2}, std::vector<double>{1, 3, 5});
  EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_DOUBLE_EQ(b, 2.0);
}
