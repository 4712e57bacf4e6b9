#pragma once

// Potential-theoretic sums over an environment:
//   Pi_{i,j} = prod_{k=i}^{j} rho_k
//   W_{i,j}  = sum_{k=i}^{j} Pi_{k,j},    W_j = sum_{k<=j} Pi_{k,j}
//   R_{i,k}  = sum_{j=i}^{k} Pi_{i,j},    R_i = sum_{j>=i} Pi_{i,j}
// A reflecting site r (omega_r = 1, rho_r = 0) kills every product through
// it, so sums that reach r terminate exactly.

#include <cmath>
#include <optional>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/scaled_product.hpp"

namespace rwre {

inline constexpr double kDefaultTruncationTol = 1e-12;
inline constexpr std::uint64_t kMaxExtensionSites = 1'000'000;

inline double rho_at(const Environment& env, Site i) { return env.rho(i); }

/// Pi_{i,j} with the empty product (i = j + 1) equal to 1.
inline ScaledProduct pi_scaled(const Environment& env, Site i, Site j) {
  if (i > j + 1) throw InvalidArgument("pi_product: need i <= j + 1");
  ScaledProduct p;
  if (i == j + 1) return p;
  if (!env.covers(i, j)) throw WindowError("pi_product: range outside window");
  for (Site k = i; k <= j; ++k) p *= env.rho_unchecked(k);
  return p;
}

/// Pi_{i,j} as a double. The running product is kept in scaled form, so an
/// intermediate excursion outside [1e-300, 1e300] does not spoil the result;
/// only a final value outside the double range saturates.
inline double pi_product(const Environment& env, Site i, Site j) { return pi_scaled(env, i, j).value(); }

/// log Pi_{i,j} (-inf when the range contains a reflecting site).
inline double pi_log(const Environment& env, Site i, Site j) { return pi_scaled(env, i, j).log(); }

namespace detail {

/// Grow `env` to the left by at least `need` sites, doubling to amortize.
inline void grow_left(Environment& env, Site need, std::uint64_t& extended) {
  if (!env.can_extend_left()) throw WindowError("sum needs sites left of a non-extendable window");
  const Site step = std::max<Site>({need, 64, static_cast<Site>(env.size())});
  extended += static_cast<std::uint64_t>(step);
  if (extended > kMaxExtensionSites)
    throw BudgetExceeded("left tail did not converge within 10^6 extension sites (E log rho >= 0?)");
  env = env.extended(env.lo() - step, env.hi());
}

inline void grow_right(Environment& env, Site need, std::uint64_t& extended) {
  if (!env.can_extend_right()) throw WindowError("sum needs sites right of a non-extendable window");
  const Site step = std::max<Site>({need, 64, static_cast<Site>(env.size())});
  extended += static_cast<std::uint64_t>(step);
  if (extended > kMaxExtensionSites)
    throw BudgetExceeded("right tail did not converge within 10^6 extension sites");
  env = env.extended(env.lo(), env.hi() + step);
}

/// Leftmost site k0 kept by the truncated backward sum for W_j: the scan
/// stops at the first k with Pi_{k,j} < tol * partial, at a reflecting
/// site, or at `floor` (exclusive bound: sites <= floor are not summed).
inline Site truncation_start(Environment& env, Site j, double tol, std::optional<Site> floor) {
  std::uint64_t extended = 0;
  double prod = 1.0;
  double partial = 0.0;
  for (Site k = j;; --k) {
    if (floor && k <= *floor) return k + 1;
    if (k < env.lo()) grow_left(env, env.lo() - k, extended);
    prod *= env.rho_unchecked(k);
    if (prod == 0.0) return k;
    partial += prod;
    if (!std::isfinite(partial)) throw BudgetExceeded("W sum diverged (E log rho >= 0?)");
    if (prod < tol * partial) return k;
  }
}

}  // namespace detail

/// W_j = sum_{k<=j} Pi_{k,j}; with `reflect_site` = r the sum runs over
/// r < k <= j only (rho_r = 0). The infinite tail is truncated once
/// Pi_{k,j} < tol * partial sum, extending the window leftward as needed.
inline double w_value(const Environment& env, Site j, double tol = kDefaultTruncationTol,
                      std::optional<Site> reflect_site = std::nullopt) {
  if (j > env.hi()) throw WindowError("w_value: site right of window");
  if (reflect_site && *reflect_site >= j) return 0.0;
  Environment e = env;
  std::uint64_t extended = 0;
  double prod = 1.0;
  double partial = 0.0;
  for (Site k = j;; --k) {
    if (reflect_site && k == *reflect_site) break;
    if (k < e.lo()) detail::grow_left(e, e.lo() - k, extended);
    prod *= e.rho_unchecked(k);
    if (prod == 0.0) break;
    partial += prod;
    if (!std::isfinite(partial)) throw BudgetExceeded("W sum diverged (E log rho >= 0?)");
    if (prod < tol * partial) break;
  }
  return partial;
}

/// W_{i,j} by the backward recursion, no truncation.
inline double w_finite(const Environment& env, Site i, Site j) {
  if (!env.covers(i, j)) throw WindowError("w_finite: range outside window");
  double w = 0.0;
  for (Site k = i; k <= j; ++k) w = env.rho_unchecked(k) * (1.0 + w);
  return w;
}

/// R_{i,k} = sum_{j=i}^{k} Pi_{i,j} (forward partial products).
inline double r_value(const Environment& env, Site i, Site k) {
  if (i > k) throw InvalidArgument("r_value: need i <= k");
  if (!env.covers(i, k)) throw WindowError("r_value: range outside window");
  double prod = 1.0;
  double sum = 0.0;
  for (Site j = i; j <= k; ++j) {
    prod *= env.rho_unchecked(j);
    sum += prod;
  }
  return sum;
}

/// R_i = sum_{j>=i} Pi_{i,j}, truncated like w_value, extending rightward.
inline double r_infinite(const Environment& env, Site i, double tol = kDefaultTruncationTol) {
  if (i < env.lo()) throw WindowError("r_infinite: site left of window");
  Environment e = env;
  std::uint64_t extended = 0;
  double prod = 1.0;
  double sum = 0.0;
  for (Site j = i;; ++j) {
    if (j > e.hi()) detail::grow_right(e, j - e.hi(), extended);
    prod *= e.rho_unchecked(j);
    sum += prod;
    if (!std::isfinite(sum)) throw BudgetExceeded("R sum diverged");
    if (prod == 0.0 || prod < tol * sum) break;
  }
  return sum;
}

/// W_j and the variance companion V_j = sum_{i<j} Pi_{i+1,j}(W_i + W_i^2)
/// for every j in [first, last], by the forward recursions
///   W_j = rho_j (1 + W_{j-1}),   V_j = rho_j (V_{j-1} + W_{j-1} + W_{j-1}^2).
struct QuenchedProfile {
  Site first = 0;
  std::vector<double> w;
  std::vector<double> v;

  double w_at(Site j) const { return w[static_cast<std::size_t>(j - first)]; }
  double v_at(Site j) const { return v[static_cast<std::size_t>(j - first)]; }
  Site last() const { return first + static_cast<Site>(w.size()) - 1; }
};

/// Profile over [first, last]. With `reflect_site` = r <= first the
/// recursion starts from W_r = V_r = 0; otherwise it starts at the
/// truncation point of W_first (see w_value), extending `env` if needed.
inline QuenchedProfile quenched_profile(Environment& env, Site first, Site last,
                                        std::optional<Site> reflect_site = std::nullopt,
                                        double tol = kDefaultTruncationTol) {
  if (first > last) throw InvalidArgument("quenched_profile: empty range");
  if (reflect_site && *reflect_site > first) throw InvalidArgument("quenched_profile: reflection right of range");
  std::uint64_t extended = 0;
  if (last > env.hi()) detail::grow_right(env, last - env.hi(), extended);

  Site start = 0;
  double w = 0.0;
  double v = 0.0;
  if (reflect_site) {
    start = *reflect_site + 1;
  } else {
    start = detail::truncation_start(env, first, tol, std::nullopt);
  }
  if (start < env.lo()) throw WindowError("quenched_profile: start left of window");

  QuenchedProfile prof;
  prof.first = first;
  prof.w.resize(static_cast<std::size_t>(last - first + 1));
  prof.v.resize(prof.w.size());
  if (reflect_site && *reflect_site == first) {
    prof.w[0] = 0.0;
    prof.v[0] = 0.0;
  }
  for (Site j = start; j <= last; ++j) {
    const double r = env.rho_unchecked(j);
    v = r * (v + w + w * w);
    w = r * (1.0 + w);
    if (j >= first) {
      prof.w[static_cast<std::size_t>(j - first)] = w;
      prof.v[static_cast<std::size_t>(j - first)] = v;
    }
  }
  return prof;
}

}  // namespace rwre
