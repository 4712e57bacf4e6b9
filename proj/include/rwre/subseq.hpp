#pragma once

// Subsequence bookkeeping and per-environment event detectors:
//   n_k = ceil(c^{r^k}) (c = r = 2 gives 2^{2^k}), d_k = n_k - n_{k-1},
//   a_k = floor(log log k) v 1, delta_k = 1/a_k, b_{d_k} = floor(log^2 d_k),
//   alpha = n_{k-1}, beta = alpha + floor(delta_k d_k), gamma = alpha + floor(c_k d_k).
// Localization hits follow M_j >= m^2 E_omega T-bar^{(j)}_{nu_{j-1}}; flat
// windows follow the S and U events on the block means mu_{i,d_k}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rwre/blocks.hpp"
#include "rwre/error.hpp"
#include "rwre/ladder.hpp"
#include "rwre/parallel.hpp"
#include "rwre/quenched.hpp"
#include "rwre/rng.hpp"

namespace rwre {

inline constexpr std::uint64_t kMaxSimulableSchedule = 10'000'000;

struct PlanRow {
  int k = 0;
  std::uint64_t n = 0;       // n_k
  std::uint64_t d = 0;       // d_k = n_k - n_{k-1}
  Site b = 0;                // b_{d_k}
  int a = 1;                 // a_k
  double delta = 1.0;        // 1 / a_k
  double c = 2.0;            // c_k
  std::uint64_t alpha = 0;   // n_{k-1}
  std::uint64_t beta = 0;    // alpha + floor(delta d)
  std::uint64_t gamma = 0;   // alpha + floor(c d)
  bool feasible = true;      // gamma <= 10^7 ladder blocks
};

struct SubseqPlan {
  double c = 2.0;
  double r = 2.0;
  std::uint64_t n0 = 0;  // n_0
  std::vector<PlanRow> rows;  // k = 1 .. k_max

  const PlanRow& row(int k) const {
    for (const auto& r : rows)
      if (r.k == k) return r;
    throw InvalidArgument("plan has no row k = " + std::to_string(k));
  }
};

/// a_k = max(1, floor(log log k)), natural logs; k <= 2 gives 1.
inline int a_of(int k) {
  if (k < 3) return 1;
  return std::max(1, static_cast<int>(std::floor(std::log(std::log(static_cast<double>(k))))));
}

namespace detail {

inline bool mul_overflow(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  return __builtin_mul_overflow(a, b, &out);
}

/// ceil(c^{r^k}); exact integer arithmetic when c and r are integers.
inline std::optional<std::uint64_t> schedule_value(double c, double r, int k) {
  const bool integral = c == std::floor(c) && r == std::floor(r);
  if (integral) {
    std::uint64_t e = 1;  // r^k
    for (int i = 0; i < k; ++i)
      if (mul_overflow(e, static_cast<std::uint64_t>(r), e) || e > 64) return std::nullopt;
    std::uint64_t v = 1;
    for (std::uint64_t i = 0; i < e; ++i)
      if (mul_overflow(v, static_cast<std::uint64_t>(c), v)) return std::nullopt;
    return v;
  }
  const long double lg = std::pow(static_cast<long double>(r), k) * std::log(static_cast<long double>(c));
  if (lg > 63.0L * std::log(2.0L)) return std::nullopt;
  return static_cast<std::uint64_t>(std::ceil(std::exp(lg) - 1e-12L));
}

}  // namespace detail

/// Schedule rows k = 1 .. k_max with a constant c_k.
inline SubseqPlan build_plan(double c, double r, int k_max, double c_k = 2.0) {
  if (!(c > 1.0) || !(r > 1.0)) throw InvalidArgument("build_plan: need c > 1 and r > 1");
  if (!(c >= 2.0 || r >= 2.0)) throw InvalidArgument("build_plan: need c >= 2 or r >= 2");
  if (k_max < 1) throw InvalidArgument("build_plan: need k_max >= 1");
  if (!(c_k >= 1.0)) throw InvalidArgument("build_plan: need c_k >= 1");
  SubseqPlan plan;
  plan.c = c;
  plan.r = r;
  const auto n0 = detail::schedule_value(c, r, 0);
  plan.n0 = *n0;
  std::uint64_t prev = plan.n0;
  for (int k = 1; k <= k_max; ++k) {
    const auto nk = detail::schedule_value(c, r, k);
    if (!nk) throw InvalidArgument("build_plan: schedule overflows 64 bits at k = " + std::to_string(k) +
                                   "; largest feasible k_max = " + std::to_string(k - 1));
    if (*nk <= prev) throw InvalidArgument("build_plan: schedule is not strictly increasing at k = " + std::to_string(k));
    PlanRow row;
    row.k = k;
    row.n = *nk;
    row.d = *nk - prev;
    row.b = reflection_radius(row.d);
    row.a = a_of(k);
    row.delta = 1.0 / row.a;
    row.c = c_k;
    row.alpha = prev;
    row.beta = row.alpha + static_cast<std::uint64_t>(std::floor(row.delta * static_cast<double>(row.d)));
    const long double g = static_cast<long double>(row.alpha) + std::floor(static_cast<long double>(c_k) * row.d);
    row.gamma = g > 1.8e19L ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(g);
    row.feasible = row.gamma <= kMaxSimulableSchedule;
    plan.rows.push_back(row);
    prev = *nk;
  }
  return plan;
}

// ---------------------------------------------------------------- localization

struct LocalizationHit {
  int m = 0;
  std::size_t j = 0;        // block index j_m
  double t = 0.0;           // t_m = M_j / m
  Site u = 0;               // u_m = nu_{j-1}
  double margin = 0.0;      // M_j / (m^2 E)
  double block_max = 0.0;   // M_j
  double expected = 0.0;    // E_omega T-bar^{(j)}_{nu_{j-1}}
};

/// E_omega T-bar^{(j)}_{nu_{j-1}}: walk from 0 reflected with radius b_j.
inline double reflected_expected_to_block(Environment& env, const LadderIndex& ladder, std::size_t j,
                                          double tol = kDefaultTruncationTol) {
  if (j < 2) return 0.0;
  const CrossingStats st = block_crossing_stats_radius(env, ladder, reflection_radius(j), 1, j - 1, tol);
  double sum = 0.0;
  for (double m : st.mu) sum += m;
  return sum;
}

/// Every (m, j) with m in [m_lo, m_hi], 2 <= j <= max_block and
/// M_j >= m^2 E_omega T-bar^{(j)}_{nu_{j-1}}. Candidates are screened with
/// the radius-0 and unreflected block sums, which bracket the exact value.
inline std::vector<LocalizationHit> detect_localization(Environment& env, const LadderIndex& ladder, int m_lo = 2,
                                                        int m_hi = 10, std::size_t max_block = 0,
                                                        double tol = kDefaultTruncationTol) {
  if (m_lo < 1 || m_hi < m_lo) throw InvalidArgument("detect_localization: bad m range");
  if (max_block == 0) max_block = ladder.blocks();
  if (max_block > ladder.blocks()) throw InvalidArgument("detect_localization: ladder too short");
  std::vector<LocalizationHit> hits;
  if (max_block < 2) return hits;

  const CrossingStats lower = block_crossing_stats_radius(env, ladder, 0, 1, max_block - 1, tol);
  const double m2 = static_cast<double>(m_lo) * m_lo;
  double prefix_lo = 0.0;
  std::vector<std::size_t> candidates;
  for (std::size_t j = 2; j <= max_block; ++j) {
    prefix_lo += lower.mu_of(j - 1);
    if (ladder.M(j) >= m2 * prefix_lo) candidates.push_back(j);
  }

  // Exact reflected sums, shared across candidates with the same radius.
  std::map<Site, CrossingStats> by_radius;
  for (std::size_t j : candidates) {
    const Site b = reflection_radius(j);
    auto it = by_radius.find(b);
    if (it == by_radius.end() || it->second.last_block() < j - 1) {
      std::size_t last = j - 1;
      for (std::size_t c : candidates)
        if (reflection_radius(c) == b) last = std::max(last, c - 1);
      it = by_radius.insert_or_assign(b, block_crossing_stats_radius(env, ladder, b, 1, last, tol)).first;
    }
    double e = 0.0;
    for (std::size_t i = 1; i < j; ++i) e += it->second.mu_of(i);
    const double mj = ladder.M(j);
    for (int m = m_lo; m <= m_hi; ++m) {
      const double mm = static_cast<double>(m) * m;
      if (mj >= mm * e) {
        LocalizationHit h;
        h.m = m;
        h.j = j;
        h.t = mj / m;
        h.u = ladder.nu[j - 1];
        h.margin = mj / (mm * e);
        h.block_max = mj;
        h.expected = e;
        hits.push_back(h);
      }
    }
  }
  return hits;
}

// ---------------------------------------------------------------- windows

/// The blocks and scales of one window; usually taken from a plan row.
struct WindowSpec {
  int k = 0;
  std::uint64_t d = 0;
  int a = 1;
  std::uint64_t alpha = 0;
  std::uint64_t beta = 0;
  std::uint64_t gamma = 0;

  static WindowSpec from_row(const PlanRow& r) { return {r.k, r.d, r.a, r.alpha, r.beta, r.gamma}; }
};

struct FlatWindowReport {
  bool flat = false;             // S event
  std::size_t witness_count = 0; // # i in (alpha, beta] with mu^2 in [d^{2/s}, 2 d^{2/s})
  double max_mu2 = 0.0;
  bool tail_ok = false;          // U event
  double tail_sum = 0.0;         // sum_{i=beta+1}^{gamma} mu_i
  double level = 0.0;            // d^{2/s}
  double tail_bound = 0.0;       // 2 d^{1/s}
};

/// S: exactly 2a blocks of (alpha, beta] have mu^2 in [d^{2/s}, 2 d^{2/s})
/// and none has mu^2 >= 2 d^{2/s}. U: sum of mu over (beta, gamma] is at
/// most 2 d^{1/s}. `mu` holds the window's block means indexed by block.
inline FlatWindowReport detect_flat_window(const CrossingStats& stats, const WindowSpec& w, double s) {
  if (!(s > 0.0)) throw InvalidArgument("detect_flat_window: s must be positive");
  if (w.alpha >= w.beta || w.beta > w.gamma) throw InvalidArgument("detect_flat_window: need alpha < beta <= gamma");
  if (stats.size() == 0 || stats.first_block > w.alpha + 1 || stats.last_block() < w.gamma)
    throw InvalidArgument("detect_flat_window: stats do not cover blocks alpha+1 .. gamma");
  FlatWindowReport rep;
  const double d = static_cast<double>(w.d);
  rep.level = std::pow(d, 2.0 / s);
  rep.tail_bound = 2.0 * std::pow(d, 1.0 / s);
  for (std::uint64_t i = w.alpha + 1; i <= w.beta; ++i) {
    const double mu2 = stats.mu_of(i) * stats.mu_of(i);
    rep.max_mu2 = std::max(rep.max_mu2, mu2);
    if (mu2 >= rep.level && mu2 < 2.0 * rep.level) ++rep.witness_count;
  }
  rep.flat = rep.witness_count == static_cast<std::size_t>(2 * w.a) && rep.max_mu2 < 2.0 * rep.level;
  for (std::uint64_t i = w.beta + 1; i <= w.gamma; ++i) rep.tail_sum += stats.mu_of(i);
  rep.tail_ok = rep.tail_sum <= rep.tail_bound;
  return rep;
}

struct GaussianWindow {
  int k = 0;
  std::uint64_t alpha = 0;
  std::uint64_t beta = 0;
  std::uint64_t gamma = 0;
  double v = 0.0;  // sum_{i=alpha+1}^{beta} mu_i^2
  bool flat = false;
  bool tail_ok = false;
  std::size_t witness_count = 0;
  Site x_low = 0;   // nu_beta
  Site x_high = 0;  // nu_gamma
};

inline GaussianWindow gaussian_window(const CrossingStats& stats, const WindowSpec& w, double s) {
  const FlatWindowReport f = detect_flat_window(stats, w, s);
  GaussianWindow g;
  g.k = w.k;
  g.alpha = w.alpha;
  g.beta = w.beta;
  g.gamma = w.gamma;
  for (std::uint64_t i = w.alpha + 1; i <= w.beta; ++i) g.v += stats.mu_of(i) * stats.mu_of(i);
  g.flat = f.flat;
  g.tail_ok = f.tail_ok;
  g.witness_count = f.witness_count;
  g.x_low = stats.nu_end[w.beta - stats.first_block];
  g.x_high = stats.nu_end[w.gamma - stats.first_block];
  return g;
}

// ---------------------------------------------------------------- planted windows

struct PlantedWindow {
  Environment env;
  LadderIndex ladder;
  CrossingStats stats;  // radius b_d, blocks 1 .. gamma
  GaussianWindow window;
  FlatWindowReport flat;
  std::size_t attempts = 0;
  std::size_t pool_witnesses = 0;
};

struct PlantOptions {
  std::size_t pool_size = 20'000;
  std::size_t max_attempts = 200;
  double witness_low = 1.1;   // witness mu in [low, high] d^{1/s}
  double witness_high = 1.25;
  double body_max = 0.9;      // other window and prefix blocks: mu < body_max d^{1/s}
  double tail_max = 0.1;      // tail blocks: mu < tail_max d^{1/s}
  double tail_fill = 0.9;     // tail pool sum <= tail_fill * 2 d^{1/s}
  std::size_t right_filler = 4096;  // P-distributed sites after the last planted block
  unsigned threads = 1;
};

/// Environment whose window (alpha, beta] holds exactly 2a witness blocks
/// and whose tail (beta, gamma] is light, assembled from Q-sampled first
/// ladder blocks. The left half-line is a Q sample. S and U are checked on
/// the assembled environment and the assembly is redrawn until both hold.
inline PlantedWindow plant_flat_window(const EnvLaw& law, const WindowSpec& w, double s, std::uint64_t seed,
                                       const PlantOptions& opt = {}) {
  if (!(s > 0.0)) throw InvalidArgument("plant_flat_window: s must be positive");
  if (w.alpha >= w.beta || w.beta > w.gamma) throw InvalidArgument("plant_flat_window: need alpha < beta <= gamma");
  if (w.beta - w.alpha < static_cast<std::uint64_t>(2 * w.a)) throw InvalidArgument("plant_flat_window: window too short");
  const double root = std::pow(static_cast<double>(w.d), 1.0 / s);

  struct Segment {
    std::vector<double> rho;
    double mu = 0.0;
  };
  const std::vector<Segment> pool = parallel_map(
      opt.pool_size,
      [&](std::size_t i) {
        Environment env = Environment::sample(law, derive_seed(seed, i + 1), LeftMode::conditioned_q, q_block_options());
        const LadderIndex lad = ladder_locations(env, 1);
        const CrossingStats st = block_crossing_stats(env, lad, std::nullopt);
        Segment seg;
        for (Site x = 0; x < lad.nu[1]; ++x) seg.rho.push_back(env.rho(x));
        seg.mu = st.mu[0];
        return seg;
      },
      opt.threads);

  std::vector<std::size_t> witness, body, tail;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double m = pool[i].mu;
    if (m >= opt.witness_low * root && m <= opt.witness_high * root) witness.push_back(i);
    if (m < opt.body_max * root) body.push_back(i);
    if (m < opt.tail_max * root) tail.push_back(i);
  }
  if (witness.empty() || body.empty() || tail.empty())
    throw BudgetExceeded("plant_flat_window: block pool has no blocks at the required depths");

  const Environment base = Environment::sample(law, derive_seed(seed, 0), LeftMode::conditioned_q, {.right_sites = 1});
  CounterStream rng(seed, StreamTag::synthetic, 0);
  auto pick = [&](const std::vector<std::size_t>& v) { return v[rng() % v.size()]; };
  const std::uint64_t width = w.beta - w.alpha;
  const double tail_budget = opt.tail_fill * 2.0 * root;

  for (std::size_t attempt = 1; attempt <= opt.max_attempts; ++attempt) {
    std::vector<std::size_t> blocks;
    for (std::uint64_t i = 1; i <= w.alpha; ++i) blocks.push_back(pick(body));
    std::vector<std::uint64_t> slots;
    while (slots.size() < static_cast<std::size_t>(2 * w.a)) {
      const std::uint64_t p = rng() % width;
      if (std::find(slots.begin(), slots.end(), p) == slots.end()) slots.push_back(p);
    }
    for (std::uint64_t i = 0; i < width; ++i)
      blocks.push_back(std::find(slots.begin(), slots.end(), i) != slots.end() ? pick(witness) : pick(body));
    std::vector<std::size_t> tail_blocks;
    for (;;) {
      tail_blocks.clear();
      double sum = 0.0;
      for (std::uint64_t i = w.beta + 1; i <= w.gamma; ++i) {
        tail_blocks.push_back(pick(tail));
        sum += pool[tail_blocks.back()].mu;
      }
      if (sum <= tail_budget) break;
    }
    blocks.insert(blocks.end(), tail_blocks.begin(), tail_blocks.end());

    std::vector<double> rho;
    for (Site x = base.lo(); x < 0; ++x) rho.push_back(base.rho(x));
    for (std::size_t b : blocks) rho.insert(rho.end(), pool[b].rho.begin(), pool[b].rho.end());
    CounterStream filler(seed, StreamTag::synthetic, attempt);
    for (std::size_t k = 0; k < opt.right_filler; ++k) rho.push_back(law.sample(filler).rho);
    Environment env = Environment::from_rhos(base.lo(), std::move(rho));
    LadderIndex ladder = ladder_locations(env, w.gamma);
    CrossingStats stats = block_crossing_stats(env, ladder, w.d, 1, w.gamma);
    const FlatWindowReport flat = detect_flat_window(stats, w, s);
    if (!(flat.flat && flat.tail_ok)) continue;
    GaussianWindow g = gaussian_window(stats, w, s);
    return {std::move(env), std::move(ladder), std::move(stats), g, flat, attempt, witness.size()};
  }
  throw BudgetExceeded("plant_flat_window: no assembly satisfied both predicates");
}

}  // namespace rwre
