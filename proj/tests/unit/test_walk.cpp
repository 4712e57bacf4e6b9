#include <gtest/gtest.h>

#include <cmath>

#include "rwre/parallel.hpp"
#include "rwre/quenched.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

using namespace rwre;

TEST(StepThreshold, ExactProbabilities) {
  EXPECT_EQ(step_threshold(1.0), std::numeric_limits<std::uint64_t>::max());
  EXPECT_EQ(step_threshold(0.5), (1ull << 63) - 1);
  EXPECT_EQ(step_threshold(0.75), 3ull * (1ull << 62) - 1);
}

TEST(SimulateHit, DeterministicWalk) {
  const Environment env = Environment::from_omegas(0, std::vector<double>(50, 1.0));
  const HitSample h = simulate_hit(env, 3, 40, 1);
  EXPECT_EQ(h.steps, 37u);
  EXPECT_FALSE(h.capped);
  EXPECT_EQ(h.min_site, 3);
}

TEST(SimulateHit, HomogeneousMomentsMatchClassical) {
  const Environment env = Environment::sample(EnvLaw::constant(0.75), 0, LeftMode::plain_p, {});
  QuenchedWalker w(env);
  std::vector<double> t(100000);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(w.simulate_hit(0, 10, 99, i).steps);
  const Moments m = sample_moments(t);
  EXPECT_NEAR(m.mean, 20.0, 3.0 * m.se);
  EXPECT_NEAR(m.variance, 60.0, 0.05 * 60.0);
}

TEST(SimulateHit, ExitFrequencyMatchesFormula) {
  const Environment env = Environment::sample(EnvLaw::two_point(0.4), 12, LeftMode::plain_p, {.right_sites = 10, .left_sites = 10});
  QuenchedWalker w(env);
  const int n = 40000;
  int right_first = 0;
  for (int i = 0; i < n; ++i) {
    PathState st = w.start(0, 5, static_cast<std::uint64_t>(i));
    w.advance_steps(st, 1);
    if (st.x == 1) ++right_first;
  }
  const double p = exit_probability(env, -1, 0, 1);
  EXPECT_DOUBLE_EQ(p, env.omega(0));
  EXPECT_NEAR(static_cast<double>(right_first) / n, p, 3.0 * std::sqrt(p * (1 - p) / n));

  // Longer interval: P^0(T_4 < T_-3).
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    PathState st = w.start(0, 6, static_cast<std::uint64_t>(i));
    while (st.x != 4 && st.x != -3) w.advance_steps(st, 1);
    if (st.x == 4) ++hits;
  }
  const double q = exit_probability(env, -3, 0, 4);
  EXPECT_NEAR(static_cast<double>(hits) / n, q, 3.0 * std::sqrt(q * (1 - q) / n));
}

TEST(SimulateHit, CapIsReported) {
  const Environment env = Environment::sample(EnvLaw::constant(0.75), 0, LeftMode::plain_p, {});
  const HitSample h = simulate_hit(env, 0, 1000, 3, 100);
  EXPECT_TRUE(h.capped);
  EXPECT_EQ(h.steps, 100u);
}

TEST(SimulateHit, LadderBookkeeping) {
  const Environment env = Environment::sample(EnvLaw::two_point(0.4), 21, LeftMode::conditioned_q, {});
  QuenchedWalker w(env);
  const HitSample h = w.simulate_hit(0, 200, 1);
  const LadderIndex& l = w.ladder_through(200);
  ASSERT_GE(h.n_t_max, 0);
  EXPECT_LE(l.nu[static_cast<std::size_t>(h.n_t_max)], 200);
  EXPECT_GT(l.nu[static_cast<std::size_t>(h.n_t_max) + 1], 200);
  EXPECT_GE(h.steps, 200u);
}

TEST(SimulateHit, DeterministicAcrossThreadCounts) {
  const Environment env = Environment::sample(EnvLaw::two_point(0.4), 5, LeftMode::conditioned_q, {});
  auto run = [&](unsigned threads) {
    return parallel_map(
        64,
        [&](std::size_t i) {
          QuenchedWalker w(env);
          return w.simulate_hit(0, 300, 17, i).steps;
        },
        threads);
  };
  EXPECT_EQ(run(1), run(4));
}

TEST(PositionAt, Examples) {
  const Environment hom = Environment::sample(EnvLaw::constant(0.75), 0, LeftMode::plain_p, {});
  const PositionSample p0 = position_at(hom, 0, 1);
  EXPECT_EQ(p0.site, 0);
  EXPECT_EQ(p0.n_t, 0);
  const Environment det = Environment::from_omegas(0, std::vector<double>(200, 1.0));
  EXPECT_EQ(position_at(det, 150, 1).site, 150);
}

TEST(PositionAt, SpeedOfHomogeneousWalk) {
  const Environment env = Environment::sample(EnvLaw::constant(0.75), 0, LeftMode::plain_p, {});
  QuenchedWalker w(env);
  std::vector<double> v(1000);
  const std::uint64_t t = 10000;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(w.position_at(t, 8, i).site) / static_cast<double>(t);
  const Moments m = sample_moments(v);
  EXPECT_NEAR(m.mean, 0.5, 3.0 * m.se);
}

TEST(PositionAt, GapIsLadderMinusPosition) {
  const Environment env = Environment::sample(EnvLaw::two_point(0.4), 4, LeftMode::conditioned_q, {});
  QuenchedWalker w(env);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const PositionSample p = w.position_at(5000, 3, i);
    ASSERT_GE(p.n_t, 0);
    const LadderIndex& l = w.ladder_through(p.site + p.gap);
    EXPECT_EQ(p.gap, l.nu[static_cast<std::size_t>(p.n_t)] - p.site);
  }
}

TEST(Coupled, NoBacktrackMeansEquality) {
  // Homogeneous strongly transient environment: the walk never backtracks
  // b_n blocks, so the coupling never breaks.
  const Environment env = Environment::sample(EnvLaw::constant(0.95), 0, LeftMode::plain_p, {});
  QuenchedWalker w(env);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const CoupledSample c = w.simulate_coupled(1'000'000, 0, 500, 2, i);
    ASSERT_FALSE(c.divergence_step.has_value());
    ASSERT_EQ(c.t_plain, c.t_reflected);
  }
}

TEST(Coupled, DominationOnTwoPointEnvironments) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  std::uint64_t violations = 0;
  double sum_plain = 0.0;
  double sum_refl = 0.0;
  int diverged = 0;
  for (std::uint64_t e = 0; e < 20; ++e) {
    const Environment env = Environment::sample(law, e, LeftMode::conditioned_q, {});
    QuenchedWalker w(env);
    for (std::uint64_t i = 0; i < 100; ++i) {
      const CoupledSample c = w.simulate_coupled(3, 0, 100, 40 + e, i, 100'000'000);
      ASSERT_FALSE(c.capped);
      violations += c.violations;
      ASSERT_LE(c.t_reflected, c.t_plain);
      if (c.t_reflected < c.t_plain) ASSERT_TRUE(c.divergence_step.has_value());
      if (c.divergence_step) {
        ++diverged;
        ASSERT_LE(*c.divergence_step, c.t_reflected);
      }
      sum_plain += static_cast<double>(c.t_plain);
      sum_refl += static_cast<double>(c.t_reflected);
    }
  }
  EXPECT_EQ(violations, 0u);
  EXPECT_LE(sum_refl, sum_plain);
  EXPECT_GT(diverged, 0);
}

TEST(Coupled, ReflectedMeanMatchesClosedForm) {
  // E T-bar over paths equals the reflected closed form.
  const EnvLaw law = EnvLaw::two_point(0.4);
  const Environment env = Environment::sample(law, 3, LeftMode::conditioned_q, {});
  QuenchedWalker w(env);
  const std::uint64_t n = 3;  // b = 1
  const LadderIndex l = w.ladder_through(100);
  const Site target = l.nu[20];
  std::vector<double> t(20000);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(w.simulate_coupled(n, 0, target, 9, i).t_reflected);
  const Moments m = sample_moments(t);
  Environment e = env;
  LadderIndex ll = ladder_locations(e, 20);
  const double closed = expected_hitting(e, ll, 0, target, reflection_radius(n));
  EXPECT_NEAR(m.mean, closed, 4.0 * m.se);
}

TEST(ZeroSpeed, HittingTimesGrowSuperlinearly) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  const Site n = 100;
  std::vector<double> ratio;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    QuenchedWalker w(Environment::sample(law, derive_seed(77, r), LeftMode::plain_p, {}));
    PathState st = w.start(0, 1, r);
    if (!w.advance_to(st, n, 20'000'000)) continue;
    const double tn = static_cast<double>(st.t);
    if (!w.advance_to(st, 2 * n, 20'000'000)) continue;
    ratio.push_back(static_cast<double>(st.t) / tn);
  }
  const Moments m = sample_moments(ratio);
  EXPECT_GT(m.mean - 3.0 * m.se, 2.0);
}
