#pragma once

// Exact simulation of the quenched birth-death chain
//   P_omega^x(X_{n+1} = x + 1) = omega_x,  P_omega^x(X_{n+1} = x - 1) = 1 - omega_x,
// and of the reflected walk that never backtracks more than b_n ladder
// blocks, driven by the same uniforms so that it dominates the plain walk.
//
// A step goes right iff the 64-bit draw u satisfies u <= thr_x with
// thr_x = omega_x * 2^64 - 1 (all ones for omega_x = 1), which realizes
// omega_x exactly for every omega_x with at most 53 significant bits above 2^-64.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/ladder.hpp"
#include "rwre/quenched.hpp"
#include "rwre/rng.hpp"

namespace rwre {

inline constexpr std::uint64_t kDefaultStepCap = 1'000'000'000;

struct HitSample {
  Site target = 0;
  std::uint64_t steps = 0;
  bool capped = false;
  Site min_site = 0;
  std::int64_t n_t_max = 0;  // largest ladder index whose location was visited (-1 if none)
};

struct CoupledSample {
  std::uint64_t t_plain = 0;
  std::uint64_t t_reflected = 0;
  std::optional<std::uint64_t> divergence_step;
  bool capped = false;
  std::uint64_t violations = 0;  // steps with reflected < plain (must stay 0)
};

struct PositionSample {
  Site site = 0;
  std::int64_t n_t = 0;  // ladder index of nu_{N_t}; -1 if no ladder location visited
  Site gap = 0;          // nu_{N_t} - X_t
};

/// Resumable state of one quenched path.
struct PathState {
  Site x = 0;
  std::uint64_t t = 0;
  Site min_site = 0;
  Site max_site = 0;
  CounterStream rng;
};

inline std::uint64_t step_threshold(double omega) {
  if (omega >= 1.0) return std::numeric_limits<std::uint64_t>::max();
  const double scaled = std::ldexp(omega, 64);
  if (scaled < 1.0) return 0;  // probability rounded to 2^-64
  return static_cast<std::uint64_t>(scaled) - 1;
}

/// Path random stream: one counter stream per (seed, path index).
inline CounterStream path_stream(std::uint64_t seed, std::uint64_t path) {
  return CounterStream(seed, StreamTag::walk, path);
}

/// A walker owns an environment snapshot, its step thresholds and (on
/// demand) its ladder index; all three grow together as paths wander.
/// One walker serves many paths sequentially; use one walker per thread.
class QuenchedWalker {
 public:
  explicit QuenchedWalker(Environment env) : env_(std::move(env)) { rebuild(); }

  const Environment& environment() const noexcept { return env_; }

  PathState start(Site x0, std::uint64_t seed, std::uint64_t path) const {
    PathState st;
    st.x = st.min_site = st.max_site = x0;
    st.rng = path_stream(seed, path);
    return st;
  }

  /// Advance until `target` is hit or the total step count reaches `cap`.
  /// Returns true on a hit. The target may lie on either side.
  bool advance_to(PathState& st, Site target, std::uint64_t cap = kDefaultStepCap) {
    ensure(st.x);
    Site x = st.x;
    std::uint64_t t = st.t;
    Site mn = st.min_site;
    Site mx = st.max_site;
    while (x != target) {
      if (t >= cap) break;
      const std::uint64_t u = st.rng();
      x += (u <= thr_[static_cast<std::size_t>(x - lo_)]) ? 1 : -1;
      ++t;
      if (x < lo_ || x > hi_) ensure(x);
      mn = std::min(mn, x);
      mx = std::max(mx, x);
    }
    st.x = x;
    st.t = t;
    st.min_site = mn;
    st.max_site = mx;
    return x == target;
  }

  /// Advance exactly `steps` more steps.
  void advance_steps(PathState& st, std::uint64_t steps) {
    ensure(st.x);
    Site x = st.x;
    Site mn = st.min_site;
    Site mx = st.max_site;
    for (std::uint64_t k = 0; k < steps; ++k) {
      const std::uint64_t u = st.rng();
      x += (u <= thr_[static_cast<std::size_t>(x - lo_)]) ? 1 : -1;
      if (x < lo_ || x > hi_) ensure(x);
      mn = std::min(mn, x);
      mx = std::max(mx, x);
    }
    st.x = x;
    st.t += steps;
    st.min_site = mn;
    st.max_site = mx;
  }

  /// T_target for the walk started at `start`.
  HitSample simulate_hit(Site start, Site target, std::uint64_t seed, std::uint64_t path = 0,
                         std::uint64_t cap = kDefaultStepCap) {
    if (start > target) throw InvalidArgument("simulate_hit: need start <= target");
    PathState st = this->start(start, seed, path);
    const bool hit = advance_to(st, target, cap);
    HitSample h;
    h.target = target;
    h.steps = st.t;
    h.capped = !hit;
    h.min_site = st.min_site;
    h.n_t_max = ladder_index_reached(st.min_site, st.max_site);
    return h;
  }

  /// X_t after exactly `time` steps from `start`, with N_t and the gap
  /// nu_{N_t} - X_t.
  PositionSample position_at(std::uint64_t time, std::uint64_t seed, std::uint64_t path = 0, Site start = 0) {
    PathState st = this->start(start, seed, path);
    advance_steps(st, time);
    PositionSample p;
    p.site = st.x;
    p.n_t = ladder_index_reached(st.min_site, st.max_site);
    if (p.n_t >= 0) p.gap = ladder_.nu[static_cast<std::size_t>(p.n_t)] - st.x;
    return p;
  }

  /// Plain walk X and reflected walk X-bar^(n) from `start` until X hits
  /// `target`. X-bar reflects at nu_{K - b_n}, K being the largest ladder
  /// index X-bar has reached; ladder locations right of 0 are discovered as
  /// needed, negative ones come from the window.
  CoupledSample simulate_coupled(std::uint64_t n, Site start, Site target, std::uint64_t seed, std::uint64_t path = 0,
                                 std::uint64_t cap = kDefaultStepCap) {
    if (start > target) throw InvalidArgument("simulate_coupled: need start <= target");
    const Site b = reflection_radius(n);
    ensure(start);
    ensure_ladder_through(std::max<Site>(start, 0));

    // K = index of the largest ladder location <= start.
    std::int64_t kbar = std::numeric_limits<std::int64_t>::min();
    if (start >= 0) {
      kbar = static_cast<std::int64_t>(std::upper_bound(ladder_.nu.begin(), ladder_.nu.end(), start) -
                                       ladder_.nu.begin()) - 1;
    } else {
      for (std::size_t i = 0; i < ladder_.nu_neg.size(); ++i) {
        if (ladder_.nu_neg[i] <= start) {
          kbar = -static_cast<std::int64_t>(i) - 1;
          break;
        }
      }
    }
    constexpr Site kNone = std::numeric_limits<Site>::min();
    auto reflect_for = [&](std::int64_t k) -> Site {
      if (k == std::numeric_limits<std::int64_t>::min()) return kNone;
      const auto r = ladder_.location(k - b);
      return r ? *r : kNone;
    };
    Site refl = reflect_for(kbar);

    CoupledSample out;
    CounterStream rng = path_stream(seed, path);
    Site x = start;
    Site y = start;
    Site ymax = start;
    std::uint64_t t = 0;
    bool y_done = (start == target);
    while (x != target) {
      if (t >= cap) {
        out.capped = true;
        break;
      }
      const std::uint64_t u = rng();
      x += (u <= thr_[static_cast<std::size_t>(x - lo_)]) ? 1 : -1;
      if (x < lo_ || x > hi_) ensure(x);
      if (!y_done) {
        y += (y == refl || u <= thr_[static_cast<std::size_t>(y - lo_)]) ? 1 : -1;
        if (y < lo_ || y > hi_) ensure(y);
        if (y > ymax) {
          ymax = y;
          if (ymax >= 0) ensure_ladder_through(ymax);
          const std::int64_t next_k = (kbar == std::numeric_limits<std::int64_t>::min())
                                          ? -static_cast<std::int64_t>(ladder_.nu_neg.size())
                                          : kbar + 1;
          const auto next = ladder_.location(next_k);
          if (next && *next == ymax) {
            kbar = next_k;
            refl = reflect_for(kbar);
          }
        }
      }
      ++t;
      if (y < x) ++out.violations;
      if (!out.divergence_step && y != x) out.divergence_step = t;
      if (!y_done && y == target) {
        y_done = true;
        out.t_reflected = t;
      }
    }
    out.t_plain = t;
    if (!y_done) out.t_reflected = t;
    return out;
  }

  /// Ladder index covering sites up to `site` (extends the ladder scan).
  const LadderIndex& ladder_through(Site site) {
    ensure_ladder_through(site);
    return ladder_;
  }

 private:
  void rebuild() {
    lo_ = env_.lo();
    hi_ = env_.hi();
    thr_.resize(env_.size());
    const auto om = env_.omegas();
    for (std::size_t i = 0; i < om.size(); ++i) thr_[i] = step_threshold(om[i]);
  }

  void ensure(Site x) {
    if (x >= lo_ && x <= hi_) return;
    const Site grow = std::max<Site>(1024, static_cast<Site>(env_.size()));
    const Site new_lo = x < lo_ ? std::min(x, lo_ - grow) : lo_;
    const Site new_hi = x > hi_ ? std::max(x, hi_ + grow) : hi_;
    env_ = env_.extended(new_lo, new_hi);
    rebuild();
  }

  void ensure_ladder_through(Site site) {
    if (!ladder_init_) {
      ladder_.nu_neg = negative_ladders(env_);
      ladder_init_ = true;
    }
    const Site hi_before = env_.hi();
    try {
      while (ladder_.nu.back() <= site) extend_ladder(env_, ladder_, ladder_.blocks() + 1);
    } catch (const WindowError&) {
      // A fixed window ends before the next ladder location; keep what is known.
    }
    if (env_.hi() != hi_before) rebuild();
  }

  std::int64_t ladder_index_reached(Site mn, Site mx) {
    if (mx < 0) return -1;
    ensure_ladder_through(mx);
    const auto it = std::upper_bound(ladder_.nu.begin(), ladder_.nu.end(), mx);
    const auto k = static_cast<std::int64_t>(it - ladder_.nu.begin()) - 1;
    if (ladder_.nu[static_cast<std::size_t>(k)] < mn) return -1;
    return k;
  }

  Environment env_;
  std::vector<std::uint64_t> thr_;
  Site lo_ = 0;
  Site hi_ = -1;
  LadderIndex ladder_;
  bool ladder_init_ = false;
};

inline HitSample simulate_hit(const Environment& env, Site start, Site target, std::uint64_t seed,
                              std::uint64_t cap = kDefaultStepCap, std::uint64_t path = 0) {
  QuenchedWalker w(env);
  return w.simulate_hit(start, target, seed, path, cap);
}

inline CoupledSample simulate_coupled(const Environment& env, std::uint64_t n, Site start, Site target,
                                      std::uint64_t seed, std::uint64_t cap = kDefaultStepCap, std::uint64_t path = 0) {
  QuenchedWalker w(env);
  return w.simulate_coupled(n, start, target, seed, path, cap);
}

inline PositionSample position_at(const Environment& env, std::uint64_t time, std::uint64_t seed, std::uint64_t path = 0) {
  QuenchedWalker w(env);
  return w.position_at(time, seed, path);
}

}  // namespace rwre
