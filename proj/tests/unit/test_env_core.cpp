#include <gtest/gtest.h>

#include <cmath>

#include "rwre/algebra.hpp"
#include "rwre/blocks.hpp"
#include "rwre/env_law.hpp"
#include "rwre/environment.hpp"
#include "rwre/ladder.hpp"
#include "rwre/stability.hpp"

using namespace rwre;

namespace {

Environment homogeneous_rho(double rho, Site lo, std::size_t n) { return Environment::from_rhos(lo, std::vector<double>(n, rho)); }

}  // namespace

// ---------------------------------------------------------------- EnvLaw

TEST(EnvLaw, ValidatesProbabilities) {
  EXPECT_THROW(EnvLaw::discrete({0.3, 0.7}, {0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(EnvLaw::discrete({0.0, 0.7}, {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(EnvLaw::discrete({1.0}, {1.0}), InvalidArgument);
  EXPECT_NO_THROW(EnvLaw::discrete({0.3, 0.7}, {0.5, 0.5}));
}

TEST(EnvLaw, JsonRoundTrip) {
  const EnvLaw law = EnvLaw::discrete({0.25, 0.6, 0.8}, {0.3, 0.4, 0.3});
  const EnvLaw back = EnvLaw::from_json(law.to_json());
  EXPECT_EQ(back.omegas(), law.omegas());
  EXPECT_EQ(back.probs(), law.probs());
  const EnvLaw beta = EnvLaw::beta(2.0, 3.0, 1e-3);
  const EnvLaw beta_back = EnvLaw::from_json(beta.to_json());
  EXPECT_EQ(beta_back.beta_a(), 2.0);
  EXPECT_EQ(beta_back.beta_b(), 3.0);
  EXPECT_THROW(EnvLaw::from_json(nlohmann::json{{"kind", "discrete"}, {"values", {0.5}}, {"probs", {1.0}}, {"x", 1}}),
               InvalidArgument);
}

TEST(EnvLaw, BetaMomentsMatchClosedForm) {
  // omega ~ Beta(a, b): E rho = E (1-w)/w = b / (a - 1) for a > 1.
  const EnvLaw law = EnvLaw::beta(5.0, 2.0, 1e-9);
  EXPECT_NEAR(law.rho_moment(1.0), 2.0 / 4.0, 1e-8);
}

// ---------------------------------------------------------------- rho, Pi

TEST(Algebra, RhoAt) {
  const Environment env = Environment::from_omegas(0, {0.5, 1.0, 1.0 / 3.0});
  EXPECT_DOUBLE_EQ(rho_at(env, 0), 1.0);
  EXPECT_EQ(rho_at(env, 1), 0.0);
  EXPECT_DOUBLE_EQ(rho_at(env, 2), 2.0);
  EXPECT_THROW(rho_at(env, 3), WindowError);
  EXPECT_THROW(rho_at(env, -1), WindowError);
}

TEST(Algebra, PiProduct) {
  const Environment env = Environment::from_rhos(0, {2.0, 0.5, 0.0, 3.0});
  EXPECT_EQ(pi_product(env, 1, 0), 1.0);
  EXPECT_EQ(pi_product(env, 0, 1), 1.0);
  EXPECT_EQ(pi_product(env, 0, 3), 0.0);
  EXPECT_EQ(pi_product(env, 2, 2), 0.0);
  EXPECT_THROW(pi_product(env, 0, 4), WindowError);
}

TEST(Algebra, PiProductSurvivesIntermediateOverflow) {
  std::vector<double> rho(1000, 1e10);
  rho.resize(2000, 1e-10);
  const Environment env = Environment::from_rhos(0, rho);
  EXPECT_NEAR(pi_product(env, 0, 1999), 1.0, 1e-9);
  EXPECT_NEAR(pi_log(env, 0, 999), 1000.0 * std::log(1e10), 1e-6);
  EXPECT_EQ(pi_product(env, 0, 999), std::numeric_limits<double>::infinity());
}

// ---------------------------------------------------------------- W, R

TEST(Algebra, WValueGeometric) {
  // Homogeneous rho = 1/3 extended on demand: W_j = (1/3)/(1-1/3).
  const EnvLaw law = EnvLaw::constant(0.75);
  const Environment env = Environment::sample(law, 1, LeftMode::plain_p, {});
  EXPECT_NEAR(w_value(env, 0), 0.5, 1e-12);
  EXPECT_NEAR(w_value(env, 100), 0.5, 1e-12);
}

TEST(Algebra, WValueReflected) {
  const Environment env = Environment::from_rhos(0, {0.0, 0.5});
  EXPECT_DOUBLE_EQ(w_value(env, 1), 0.5);
  EXPECT_EQ(w_value(env, 0), 0.0);
}

TEST(Algebra, WValueDivergesForRecurrentLaw) {
  const EnvLaw law = EnvLaw::constant(0.4);  // rho = 1.5, E log rho > 0
  const Environment env = Environment::sample(law, 1, LeftMode::plain_p, {});
  EXPECT_THROW(w_value(env, 0), BudgetExceeded);
}

TEST(Algebra, RValue) {
  const Environment env = Environment::from_rhos(0, {2.0, 0.5});
  EXPECT_DOUBLE_EQ(r_value(env, 0, 0), 2.0);
  EXPECT_DOUBLE_EQ(r_value(env, 0, 1), 3.0);
  const Environment hom = Environment::sample(EnvLaw::constant(0.75), 3, LeftMode::plain_p, {});
  EXPECT_NEAR(r_infinite(hom, 0), 0.5, 1e-12);
}

TEST(Algebra, BackwardRecursionMatchesDoubleSum) {
  const EnvLaw law = EnvLaw::beta(2.0, 1.5, 1e-3);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterStream rng(seed, StreamTag::synthetic, 0);
    const Site len = 1 + static_cast<Site>(rng() % 30);
    const Environment env = Environment::sample(law, seed, LeftMode::plain_p, {.right_sites = len});
    const Site i = 0;
    const Site j = len - 1;
    double direct = 0.0;
    for (Site k = i; k <= j; ++k) {
      double p = 1.0;
      for (Site m = k; m <= j; ++m) p *= env.rho(m);
      direct += p;
    }
    ASSERT_NEAR(w_finite(env, i, j), direct, 1e-12 * direct) << "seed " << seed;
  }
}

TEST(Algebra, ProfileMatchesBackwardSums) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  Environment env = Environment::sample(law, 5, LeftMode::plain_p, {.right_sites = 200, .left_sites = 50});
  const double tol = 1e-15;
  const QuenchedProfile p = quenched_profile(env, 0, 150, std::nullopt, tol);
  for (Site j = 0; j <= 150; ++j) ASSERT_NEAR(p.w_at(j), w_value(env, j, tol), 1e-10 * (1.0 + p.w_at(j)));
}

// ---------------------------------------------------------------- ladders

TEST(Ladder, HomogeneousDescending) {
  Environment env = homogeneous_rho(1.0 / 3.0, 0, 20);
  const LadderIndex l = ladder_locations(env, 10);
  for (std::size_t i = 0; i <= 10; ++i) EXPECT_EQ(l.nu[i], static_cast<Site>(i));
  for (std::size_t k = 1; k <= 10; ++k) EXPECT_DOUBLE_EQ(l.M(k), 1.0 / 3.0);
}

TEST(Ladder, StrictnessAtOne) {
  Environment env = Environment::from_rhos(0, {2.0, 0.5, 1.0 / 3.0, 0.5});
  const LadderIndex l = ladder_locations(env, 1);
  EXPECT_EQ(l.nu[1], 3);
  EXPECT_DOUBLE_EQ(l.M(1), 2.0);
}

TEST(Ladder, ImmediateDescent) {
  Environment env = Environment::from_rhos(0, {0.5, 2.0});
  EXPECT_EQ(ladder_locations(env, 1).nu[1], 1);
}

TEST(Ladder, FixedWindowExhausted) {
  Environment env = Environment::from_rhos(0, {2.0, 2.0});
  EXPECT_THROW(ladder_locations(env, 1), WindowError);
}

TEST(Ladder, DefiningInequalitiesHoldExactly) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Environment env = Environment::sample(law, seed, LeftMode::plain_p, {});
    const LadderIndex l = ladder_locations(env, 200);
    for (std::size_t i = 1; i <= l.blocks(); ++i) {
      const Site a = l.nu[i - 1];
      const Site b = l.nu[i];
      ASSERT_TRUE(pi_scaled(env, a, b - 1).less_than_one());
      for (Site n = a + 1; n < b; ++n) ASSERT_FALSE(pi_scaled(env, a, n - 1).less_than_one());
      ASSERT_GE(l.M(i), pi_product(env, a, b - 1));
      ASSERT_EQ(l.block_len[i - 1], b - a);
    }
  }
}

TEST(Ladder, NegativeLaddersArePrefixMinima) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  Environment env = Environment::sample(law, 11, LeftMode::conditioned_q, {});
  const LadderIndex l = ladder_locations(env, 5);
  ASSERT_FALSE(l.nu_neg.empty());
  std::vector<Site> expected;
  for (Site j = -1; j > env.lo(); --j) {
    bool ladder = true;
    for (Site k = env.lo(); k < j && ladder; ++k) ladder = pi_scaled(env, k, j - 1).less_than_one();
    if (ladder) expected.push_back(j);
  }
  EXPECT_EQ(l.nu_neg, expected);
  EXPECT_EQ(l.location(-1), expected.front());
  EXPECT_FALSE(l.location(-static_cast<std::int64_t>(expected.size()) - 1).has_value());
}

// ---------------------------------------------------------------- stability

TEST(Stability, TwoPointRoots) {
  const auto r = solve_stability_index(EnvLaw::two_point(0.4));
  ASSERT_TRUE(r.s.has_value());
  EXPECT_NEAR(*r.s, std::log2(1.5), 1e-9);
  EXPECT_EQ(r.regime, Regime::transient_zero_speed);
  EXPECT_EQ(r.v_p, 0.0);

  const auto r3 = solve_stability_index(EnvLaw::two_point(0.3));
  ASSERT_TRUE(r3.s.has_value());
  EXPECT_NEAR(*r3.s, std::log2(7.0 / 3.0), 1e-9);
  EXPECT_EQ(r3.regime, Regime::transient_positive_speed);
}

TEST(Stability, RecurrentSymmetric) {
  const auto r = solve_stability_index(EnvLaw::two_point(0.5));
  EXPECT_FALSE(r.s.has_value());
  EXPECT_EQ(r.regime, Regime::recurrent);
}

TEST(Stability, SpeedFormula) {
  const auto r = solve_stability_index(EnvLaw::two_point(0.25));
  EXPECT_NEAR(r.e_rho, 0.875, 1e-15);
  EXPECT_NEAR(r.v_p, 1.0 / 15.0, 1e-14);
  ASSERT_TRUE(r.s.has_value());
  EXPECT_NEAR(*r.s, std::log2(3.0), 1e-9);
}

TEST(Stability, RootBracketing) {
  for (const EnvLaw& law : {EnvLaw::two_point(0.4), EnvLaw::three_atom_default(), EnvLaw::beta(3.0, 2.0, 1e-3)}) {
    const auto r = solve_stability_index(law);
    ASSERT_TRUE(r.s.has_value());
    const double s = *r.s;
    EXPECT_NEAR(law.rho_moment(s), 1.0, 1e-9);
    EXPECT_LT(law.rho_moment(s - 0.1), 1.0);
    EXPECT_GT(law.rho_moment(s + 0.1), 1.0);
    EXPECT_EQ(r.regime == Regime::transient_zero_speed, s <= 1.0 + 1e-9);
  }
}

TEST(Stability, LightTailHasNoRoot) {
  // rho < 1 almost surely: E rho^g -> 0.
  EXPECT_THROW(solve_stability_index(EnvLaw::discrete({0.6, 0.7}, {0.5, 0.5})), Error);
}

// ---------------------------------------------------------------- sampling

TEST(Environment, ReflectingLeftEdge) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Environment env = Environment::sample(law, seed, LeftMode::reflecting, {});
    EXPECT_EQ(env.omega(0), 1.0);
    EXPECT_EQ(w_value(env, 0), 0.0);
  }
}

TEST(Environment, ExtensionIsBitIdentical) {
  const EnvLaw law = EnvLaw::beta(2.0, 1.5, 1e-3);
  const Environment a = Environment::sample(law, 77, LeftMode::plain_p, {.right_sites = 100, .left_sites = 10});
  const Environment b = a.extended(-500, 2000);
  for (Site i = a.lo(); i <= a.hi(); ++i) ASSERT_EQ(a.omega(i), b.omega(i));
  const Environment c = Environment::sample(law, 77, LeftMode::plain_p, {.right_sites = 2001, .left_sites = 500});
  for (Site i = b.lo(); i <= b.hi(); ++i) ASSERT_EQ(b.omega(i), c.omega(i));
}

TEST(Environment, ConditionedLeftHalfSatisfiesR) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const Environment env = Environment::sample(law, seed, LeftMode::conditioned_q, {.right_sites = 1});
    ScaledProduct p;
    for (Site k = -1; k >= env.lo(); --k) {
      p *= env.rho(k);
      ASSERT_TRUE(p.less_than_one()) << "seed " << seed << " k " << k;
    }
  }
}

TEST(Environment, ConditionedRightHalfKeepsPLaw) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  const int n = 10000;
  int hits = 0;
  for (int seed = 0; seed < n; ++seed) {
    Environment env = Environment::sample(law, static_cast<std::uint64_t>(seed), LeftMode::conditioned_q, {.right_sites = 8});
    if (ladder_locations(env, 1).nu[1] == 1) ++hits;
  }
  const double p = static_cast<double>(hits) / n;
  EXPECT_NEAR(p, 0.6, 3.0 * std::sqrt(0.6 * 0.4 / n));
}

TEST(Environment, ConditionedAcceptanceRate) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  std::uint64_t attempts = 0;
  const int n = 4000;
  for (int seed = 0; seed < n; ++seed) {
    const Environment env = Environment::sample(law, static_cast<std::uint64_t>(seed), LeftMode::conditioned_q, {.right_sites = 1});
    attempts += env.q_attempt() + 1;
  }
  // log Pi_{-k,-1} is a +-log 2 walk; staying strictly negative needs a
  // first step down (0.6) and no return from -1 (1 - 0.4/0.6), so P(R) = 0.2.
  const double rate = static_cast<double>(n) / static_cast<double>(attempts);
  EXPECT_NEAR(rate, 0.2, 0.02);
}

TEST(Environment, CsvDump) {
  const Environment env = Environment::from_omegas(-1, {0.25, 0.5, 1.0});
  const std::string path = ::testing::TempDir() + "env.csv";
  env.dump_csv(path);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(all, "site,omega\n-1,0.25\n0,0.5\n1,1\n");
}

// ---------------------------------------------------------------- block i.i.d.

TEST(BlockIid, SameSampleHasZeroDistance) {
  std::vector<double> x{1, 2, 2, 5, 9};
  EXPECT_EQ(ks_two_sample(x, x), 0.0);
}

TEST(BlockIid, ConsecutiveMatchesIndependent) {
  const auto rep = block_iid_check(EnvLaw::two_point(0.4), 10000, 2024);
  EXPECT_LE(rep.ks_length, 0.03);
  EXPECT_LE(rep.ks_block_max, 0.03);
  EXPECT_LE(rep.ks_mu, 0.03);
}

TEST(BlockIid, MismatchedLawsDetected) {
  // Population distance is 0.058 (at M = 4); 4e4 blocks put the 0.05 bar
  // about three standard errors away.
  const auto rep = block_iid_check(EnvLaw::two_point(0.4), EnvLaw::two_point(0.45), 40000, 2024);
  EXPECT_GT(rep.ks_block_max, 0.05);
}
