#pragma once

// The stability index s (positive root of E_P rho^s = 1), the transience
// regime and the annealed speed.

#include <cmath>
#include <optional>
#include <string>

#include "rwre/env_law.hpp"
#include "rwre/error.hpp"

namespace rwre {

enum class Regime { recurrent, transient_left, transient_positive_speed, transient_zero_speed };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::recurrent: return "recurrent";
    case Regime::transient_left: return "transient_left";
    case Regime::transient_positive_speed: return "transient_positive_speed";
    case Regime::transient_zero_speed: return "transient_zero_speed";
  }
  return "?";
}

struct StabilityReport {
  std::optional<double> s;  // empty unless transient to the right
  double e_log_rho = 0.0;
  double e_rho = 0.0;
  double v_p = 0.0;
  Regime regime = Regime::recurrent;
};

inline constexpr double kStabilityGammaHi = 64.0;
// |E log rho| below this is treated as zero (recurrent).
inline constexpr double kRecurrenceTol = 1e-13;

/// Bisection for s on phi(g) = E_P rho^g. phi is convex with phi(0) = 1 and
/// phi'(0) = E log rho < 0, so phi < 1 on (0, s) and phi > 1 beyond s.
inline StabilityReport solve_stability_index(const EnvLaw& law, double tol = 1e-10) {
  StabilityReport rep;
  rep.e_log_rho = law.mean_log_rho();
  rep.e_rho = law.rho_moment(1.0);
  if (std::abs(rep.e_log_rho) <= kRecurrenceTol) {
    rep.regime = Regime::recurrent;
    return rep;
  }
  if (rep.e_log_rho > 0.0) {
    rep.regime = Regime::transient_left;
    return rep;
  }

  auto phi = [&](double g) { return law.rho_moment(g); };
  if (!(phi(kStabilityGammaHi) > 1.0))
    throw Error("s not found: E rho^g stays below 1 for g <= 64 (right tail of rho too light)");

  double lo = 0.0;
  double hi = kStabilityGammaHi;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi(mid) < 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double s = 0.5 * (lo + hi);
  if (std::abs(phi(s) - 1.0) > tol) throw Error("s not found: bisection did not reach tolerance");
  rep.s = s;

  if (rep.e_rho < 1.0) {
    const double ew0 = rep.e_rho / (1.0 - rep.e_rho);  // sum_{k>=1} (E rho)^k
    rep.v_p = 1.0 / (1.0 + 2.0 * ew0);
    rep.regime = Regime::transient_positive_speed;
  } else {
    rep.v_p = 0.0;
    rep.regime = Regime::transient_zero_speed;
  }
  return rep;
}

}  // namespace rwre
