#pragma once

// Ladder locations: nu_0 = 0 and nu_i = inf{n > nu_{i-1} : Pi_{nu_{i-1}, n-1} < 1}.
// The block between nu_{i-1} and nu_i - 1 has maximal partial product
// M_i = max{Pi_{nu_{i-1}, j} : nu_{i-1} <= j < nu_i}.
//
// The strict inequality is decided on ScaledProduct, which is exact for
// lattice laws given by rho atoms (a product equal to 1 never ends a block).

#include <algorithm>
#include <cstdint>
#include <string>
#include <optional>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/scaled_product.hpp"

namespace rwre {

inline constexpr std::uint64_t kDefaultScanCap = 1'000'000'000;

struct LadderIndex {
  std::vector<Site> nu{0};           // nu_0 .. nu_count
  std::vector<double> block_max;     // M_1 .. M_count (index k-1)
  std::vector<double> block_max_log; // log M_k
  std::vector<Site> block_len;       // nu_k - nu_{k-1}
  std::vector<Site> nu_neg;          // nu_{-1}, nu_{-2}, ... found inside the window

  std::size_t blocks() const noexcept { return nu.size() - 1; }

  /// nu_i for i >= -(number of negative ladders found); nullopt further left.
  std::optional<Site> location(std::int64_t i) const noexcept {
    if (i >= 0) {
      if (static_cast<std::size_t>(i) < nu.size()) return nu[static_cast<std::size_t>(i)];
      return std::nullopt;
    }
    const auto k = static_cast<std::size_t>(-i - 1);
    if (k < nu_neg.size()) return nu_neg[k];
    return std::nullopt;
  }

  double M(std::size_t k) const { return block_max.at(k - 1); }
};

/// Continue the scan of `ladder` until it holds `count` blocks, growing
/// `env` to the right as needed. `env` is rebound to the extended snapshot.
inline void extend_ladder(Environment& env, LadderIndex& ladder, std::size_t count,
                          std::uint64_t scan_cap = kDefaultScanCap) {
  std::uint64_t scanned = 0;
  Site start = ladder.nu.back();
  while (ladder.blocks() < count) {
    ScaledProduct prod;
    ScaledProduct best;
    bool have_best = false;
    Site n = start;
    for (;;) {
      if (n > env.hi()) {
        if (!env.can_extend_right()) throw WindowError("ladder scan reached the end of a fixed window");
        env = env.extended(env.lo(), env.hi() + std::max<Site>(1024, static_cast<Site>(env.size())));
      }
      prod *= env.rho_unchecked(n);
      if (!have_best || best < prod) {
        best = prod;
        have_best = true;
      }
      ++n;
      if (++scanned > scan_cap)
        throw BudgetExceeded("ladder scan exceeded " + std::to_string(scan_cap) + " sites (recurrent law?)");
      if (prod.less_than_one()) break;
    }
    ladder.nu.push_back(n);
    ladder.block_max.push_back(best.value());
    ladder.block_max_log.push_back(best.log());
    ladder.block_len.push_back(n - start);
    start = n;
  }
}

/// Negative ladder locations inside the window: j < nu_{i+1} is nu_i when
/// Pi_{k,j-1} < 1 for every window site k < j, i.e. when the prefix
/// product Pi_{lo,j-1} is a strict running minimum.
inline std::vector<Site> negative_ladders(const Environment& env) {
  std::vector<Site> found;
  if (env.lo() >= 0) return found;
  ScaledProduct prefix;  // Pi_{lo, j-1}
  ScaledProduct running_min;
  for (Site j = env.lo() + 1; j < 0; ++j) {
    prefix *= env.rho_unchecked(j - 1);
    if (prefix < running_min) {
      found.push_back(j);
      running_min = prefix;
    }
  }
  std::reverse(found.begin(), found.end());
  return found;
}

/// First `count` ladder blocks to the right of 0 (plus negative ladders
/// within the current window).
inline LadderIndex ladder_locations(Environment& env, std::size_t count, std::uint64_t scan_cap = kDefaultScanCap) {
  if (count < 1) throw InvalidArgument("ladder_locations: count must be >= 1");
  LadderIndex ladder;
  ladder.nu_neg = negative_ladders(env);
  extend_ladder(env, ladder, count, scan_cap);
  return ladder;
}

}  // namespace rwre
