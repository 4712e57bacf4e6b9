#pragma once

// First-step linear systems for E T and E T^2 on a finite reflected chain.
// Used only to cross-check the closed forms.

#include <optional>
#include <vector>

#include "rwre/environment.hpp"

namespace rwre {

struct OracleMoments {
  double mean = 0.0;
  double variance = 0.0;
};

inline constexpr Site kOracleMaxSites = 10'000;

/// Moments of T_to for the walk started at `from`, with omega forced to 1 at
/// `reflect_site`. Solves
///   h_x - omega_x h_{x+1} - (1 - omega_x) h_{x-1} = 1
///   g_x - omega_x g_{x+1} - (1 - omega_x) g_{x-1} = 2 h_x - 1
/// on [reflect_site, to - 1] with h_to = g_to = 0, in extended precision.
inline OracleMoments hitting_oracle(const Environment& env, Site from, Site to, std::optional<Site> reflect_site) {
  if (from == to) return {};
  if (from > to) throw InvalidArgument("hitting_oracle: need from <= to");
  if (!reflect_site) throw InvalidArgument("hitting_oracle: an unreflected chain is infinite; give a reflection site");
  const Site r = *reflect_site;
  if (r > from) throw InvalidArgument("hitting_oracle: reflection right of start");
  if (to - r > kOracleMaxSites) throw InvalidArgument("hitting_oracle: more than 10^4 sites");
  if (!env.covers(r, to - 1)) throw WindowError("hitting_oracle: range outside window");

  const auto n = static_cast<std::size_t>(to - r);
  using Real = long double;
  std::vector<Real> lower(n), diag(n, 1.0L), upper(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Site x = r + static_cast<Site>(k);
    const Real w = (x == r) ? 1.0L : static_cast<Real>(env.omega(x));
    lower[k] = -(1.0L - w);
    upper[k] = -w;
  }

  // Thomas elimination; the factorization is shared by both right-hand sides.
  std::vector<Real> c(n), denom(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Real d = diag[k] - (k > 0 ? lower[k] * c[k - 1] : 0.0L);
    if (!(d > 1e-300L)) throw Error("hitting_oracle: singular first-step system");
    denom[k] = d;
    c[k] = (k + 1 < n) ? upper[k] / d : 0.0L;
  }
  auto solve = [&](const std::vector<Real>& rhs) {
    std::vector<Real> y(n), x(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = (rhs[k] - (k > 0 ? lower[k] * y[k - 1] : 0.0L)) / denom[k];
    for (std::size_t k = n; k-- > 0;) x[k] = y[k] - (k + 1 < n ? c[k] * x[k + 1] : 0.0L);
    return x;
  };

  const std::vector<Real> h = solve(std::vector<Real>(n, 1.0L));
  std::vector<Real> rhs2(n);
  for (std::size_t k = 0; k < n; ++k) rhs2[k] = 2.0L * h[k] - 1.0L;
  const std::vector<Real> g = solve(rhs2);

  const auto k0 = static_cast<std::size_t>(from - r);
  return {static_cast<double>(h[k0]), static_cast<double>(g[k0] - h[k0] * h[k0])};
}

}  // namespace rwre
