#pragma once

// Closed-form quenched moments of hitting times.
//
//   E^j T_{j+1}       = 1 + 2 W_j
//   Var(T_{j+1}-T_j)  = 4 (W_j + W_j^2) + 8 sum_{i<j} Pi_{i+1,j} (W_i + W_i^2)
//
// Crossing times of distinct sites are independent under P_omega, so means
// and variances add along a path. Reflection at a site r sets rho_r = 0,
// which replaces every W_i by W_{r+1,i} and cuts the i-sum at r.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rwre/algebra.hpp"
#include "rwre/ladder.hpp"

namespace rwre {

/// b_n = floor(log^2 n), natural log; 0 for n <= 1.
inline Site reflection_radius(std::uint64_t n) {
  if (n <= 1) return 0;
  const double l = std::log(static_cast<double>(n));
  return static_cast<Site>(std::floor(l * l));
}

inline double expected_crossing(const Environment& env, Site j, std::optional<Site> reflect_site = std::nullopt,
                                double tol = kDefaultTruncationTol) {
  if (env.is_reflecting(j)) return 1.0;
  return 1.0 + 2.0 * w_value(env, j, tol, reflect_site);
}

/// E^from T_to as the sum of site crossings; each W_j is its own truncated
/// backward sum (independent of the forward recursions used elsewhere).
inline double expected_hitting(const Environment& env, Site from, Site to, std::optional<Site> reflect_site = std::nullopt,
                               double tol = kDefaultTruncationTol) {
  if (from > to) throw InvalidArgument("expected_hitting: need from <= to");
  if (reflect_site && *reflect_site > from) throw InvalidArgument("expected_hitting: reflection right of start");
  double sum = 0.0;
  for (Site j = from; j < to; ++j) sum += expected_crossing(env, j, reflect_site, tol);
  return sum;
}

/// E^from of the hitting time of `to` for the walk that never backtracks
/// more than `radius` ladder blocks: while crossing block i the site
/// nu_{i-1-radius} reflects. Computed site by site from backward sums.
inline double expected_hitting(const Environment& env, const LadderIndex& ladder, Site from, Site to, Site radius,
                               double tol = kDefaultTruncationTol) {
  if (from > to) throw InvalidArgument("expected_hitting: need from <= to");
  if (to > ladder.nu.back()) throw InvalidArgument("expected_hitting: ladder does not cover target");
  double sum = 0.0;
  std::size_t block = 1;
  for (Site j = from; j < to; ++j) {
    while (ladder.nu[block] <= j) ++block;
    const auto refl = ladder.location(static_cast<std::int64_t>(block) - 1 - radius);
    const Site r = refl.value_or(std::numeric_limits<Site>::min());
    if (refl && r == j) {
      sum += 1.0;
      continue;
    }
    sum += 1.0 + 2.0 * w_value(env, j, tol, refl);
  }
  return sum;
}

/// Var(T_{j+1} - T_j) under P_omega, optionally reflected at `reflect_site`.
inline double crossing_variance(const Environment& env, Site j, std::optional<Site> reflect_site = std::nullopt,
                                double tol = kDefaultTruncationTol) {
  if (reflect_site && *reflect_site >= j) return 0.0;
  if (env.is_reflecting(j)) return 0.0;
  Environment e = env;
  const QuenchedProfile p = quenched_profile(e, j, j, reflect_site, tol);
  const double w = p.w[0];
  return 4.0 * (w + w * w) + 8.0 * p.v[0];
}

struct HittingMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of T_to started at `from` by one forward profile.
inline HittingMoments hitting_moments(Environment& env, Site from, Site to, std::optional<Site> reflect_site = std::nullopt,
                                      double tol = kDefaultTruncationTol) {
  HittingMoments m;
  if (from >= to) return m;
  const QuenchedProfile p = quenched_profile(env, from, to - 1, reflect_site, tol);
  for (std::size_t k = 0; k < p.w.size(); ++k) {
    const double w = p.w[k];
    m.mean += 1.0 + 2.0 * w;
    m.variance += 4.0 * (w + w * w) + 8.0 * p.v[k];
  }
  return m;
}

/// P_omega^i(T_b < T_a) = sum_{j=a}^{i-1} Pi_{a+1,j} / sum_{j=a}^{b-1} Pi_{a+1,j}.
inline double exit_probability(const Environment& env, Site a, Site i, Site b) {
  if (a >= b || i < a || i > b) throw InvalidArgument("exit_probability: need a <= i <= b, a < b");
  if (i == a) return 0.0;
  if (i == b) return 1.0;
  if (!env.covers(a + 1, b - 1)) throw WindowError("exit_probability: range outside window");
  double prod = 1.0;  // Pi_{a+1,j}
  double num = 0.0;
  double den = 0.0;
  for (Site j = a; j < b; ++j) {
    if (j > a) prod *= env.rho_unchecked(j);
    if (j < i) num += prod;
    den += prod;
  }
  return num / den;
}

/// P_omega^x(T_x^+ < T_y), x < y, for a walk that returns to x from the left
/// almost surely: 1 - omega_x / sum_{j=x}^{y-1} Pi_{x+1,j}, which equals
/// 1 - (1 - omega_x) / R_{x,y-1} whenever omega_x < 1.
inline double return_probability(const Environment& env, Site x, Site y) {
  if (x >= y) throw InvalidArgument("return_probability: need x < y");
  if (!env.covers(x, y - 1)) throw WindowError("return_probability: range outside window");
  double prod = 1.0;
  double sum = 0.0;
  for (Site j = x; j < y; ++j) {
    if (j > x) prod *= env.rho_unchecked(j);
    sum += prod;
  }
  return 1.0 - env.omega(x) / sum;
}

/// Per-block means mu_i and variances sigma^2_i of the crossing time from
/// nu_{i-1} to nu_i, for blocks first_block .. first_block + size - 1.
struct CrossingStats {
  std::optional<Site> reflect_radius;  // blocks; nullopt = no reflection
  std::size_t first_block = 1;
  std::vector<double> mu;
  std::vector<double> sigma2;
  std::vector<Site> nu_start;
  std::vector<Site> nu_end;
  std::vector<double> block_max;

  std::size_t size() const noexcept { return mu.size(); }
  std::size_t last_block() const noexcept { return first_block + mu.size() - 1; }
  double mu_of(std::size_t block) const { return mu.at(block - first_block); }
  double sigma2_of(std::size_t block) const { return sigma2.at(block - first_block); }

  void dump_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path);
    out << "block,nu_start,nu_end,M,mu,sigma2\n";
    char buf[256];
    for (std::size_t k = 0; k < mu.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%lld,%lld,%.17g,%.17g,%.17g\n", first_block + k,
                    static_cast<long long>(nu_start[k]), static_cast<long long>(nu_end[k]), block_max[k], mu[k],
                    sigma2[k]);
      out << buf;
    }
  }
};

/// Block statistics with a fixed reflection radius (in blocks). Blocks whose
/// reflection point lies left of every known ladder location are computed
/// unreflected with truncated tails.
inline CrossingStats block_crossing_stats_radius(Environment& env, const LadderIndex& ladder, std::optional<Site> radius,
                                                 std::size_t first_block = 1, std::size_t last_block = 0,
                                                 double tol = kDefaultTruncationTol) {
  if (last_block == 0) last_block = ladder.blocks();
  if (first_block < 1 || first_block > last_block || last_block > ladder.blocks())
    throw InvalidArgument("block_crossing_stats: block range not covered by ladder");
  if (radius && *radius < 0) throw InvalidArgument("block_crossing_stats: negative radius");

  CrossingStats st;
  st.reflect_radius = radius;
  st.first_block = first_block;
  const std::size_t n = last_block - first_block + 1;
  st.mu.resize(n);
  st.sigma2.resize(n);
  st.nu_start.resize(n);
  st.nu_end.resize(n);
  st.block_max.resize(n);

  std::optional<QuenchedProfile> global;
  for (std::size_t i = first_block; i <= last_block; ++i) {
    const std::size_t k = i - first_block;
    const Site p = ladder.nu[i - 1];
    const Site q = ladder.nu[i];
    st.nu_start[k] = p;
    st.nu_end[k] = q;
    st.block_max[k] = ladder.block_max[i - 1];

    std::optional<Site> refl;
    if (radius) refl = ladder.location(static_cast<std::int64_t>(i) - 1 - *radius);

    double mu = 0.0;
    double var = 0.0;
    if (!refl) {
      if (!global) global = quenched_profile(env, ladder.nu[first_block - 1], ladder.nu[last_block] - 1, std::nullopt, tol);
      for (Site j = p; j < q; ++j) {
        const double w = global->w_at(j);
        mu += 1.0 + 2.0 * w;
        var += 4.0 * (w + w * w) + 8.0 * global->v_at(j);
      }
    } else {
      double w = 0.0;
      double v = 0.0;
      for (Site j = *refl; j < q; ++j) {
        if (j > *refl) {
          const double r = env.rho_unchecked(j);
          v = r * (v + w + w * w);
          w = r * (1.0 + w);
        }
        if (j >= p) {
          mu += 1.0 + 2.0 * w;
          var += 4.0 * (w + w * w) + 8.0 * v;
        }
      }
    }
    st.mu[k] = mu;
    st.sigma2[k] = var;
  }
  return st;
}

/// Block statistics for the walk reflected with radius b_n = floor(log^2 n);
/// `n` = nullopt gives the unreflected mu_{i,inf} and sigma^2_{i,inf}.
inline CrossingStats block_crossing_stats(Environment& env, const LadderIndex& ladder, std::optional<std::uint64_t> n,
                                          std::size_t first_block = 1, std::size_t last_block = 0,
                                          double tol = kDefaultTruncationTol) {
  std::optional<Site> radius;
  if (n) radius = reflection_radius(*n);
  return block_crossing_stats_radius(env, ladder, radius, first_block, last_block, tol);
}

}  // namespace rwre
