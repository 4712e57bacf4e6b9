#pragma once

// Ladder blocks under Q: independent first blocks and consecutive blocks of
// one environment, with a two-sample check that their laws agree.

#include <cstdint>
#include <vector>

#include "rwre/ladder.hpp"
#include "rwre/parallel.hpp"
#include "rwre/quenched.hpp"
#include "rwre/stats.hpp"

namespace rwre {

struct BlockRecord {
  Site length = 0;
  double block_max = 0.0;
  double mu = 0.0;      // E_omega^{nu_{i-1}} T_{nu_i}
  double sigma2 = 0.0;  // Var_omega of the same crossing time
};

inline EnvOptions q_block_options() {
  EnvOptions opt;
  opt.right_sites = 64;
  return opt;
}

/// First ladder block of a Q-sampled environment.
inline BlockRecord q_first_block(const EnvLaw& law, std::uint64_t seed, const EnvOptions& opt = q_block_options()) {
  Environment env = Environment::sample(law, seed, LeftMode::conditioned_q, opt);
  LadderIndex ladder = ladder_locations(env, 1);
  const CrossingStats st = block_crossing_stats(env, ladder, std::nullopt);
  return {ladder.block_len[0], ladder.block_max[0], st.mu[0], st.sigma2[0]};
}

/// The first `count` blocks of one Q-sampled environment.
inline std::vector<BlockRecord> q_consecutive_blocks(const EnvLaw& law, std::uint64_t seed, std::size_t count,
                                                     const EnvOptions& opt = q_block_options()) {
  Environment env = Environment::sample(law, seed, LeftMode::conditioned_q, opt);
  LadderIndex ladder = ladder_locations(env, count);
  const CrossingStats st = block_crossing_stats(env, ladder, std::nullopt);
  std::vector<BlockRecord> out(count);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = {ladder.block_len[k], ladder.block_max[k], st.mu[k], st.sigma2[k]};
  return out;
}

struct BlockIidReport {
  std::size_t n_blocks = 0;
  double ks_length = 0.0;
  double ks_block_max = 0.0;
  double ks_mu = 0.0;
};

/// KS distances between n consecutive blocks drawn under `law_consecutive`
/// and n independent first blocks drawn under `law_independent`.
inline BlockIidReport block_iid_check(const EnvLaw& law_consecutive, const EnvLaw& law_independent,
                                      std::size_t n_blocks, std::uint64_t seed, unsigned threads = 1) {
  if (n_blocks < 1) throw InvalidArgument("block_iid_check: need n_blocks >= 1");
  const auto chain = q_consecutive_blocks(law_consecutive, derive_seed(seed, 0), n_blocks);
  const auto indep = parallel_map(
      n_blocks, [&](std::size_t i) { return q_first_block(law_independent, derive_seed(seed, i + 1)); }, threads);
  auto column = [](const std::vector<BlockRecord>& v, auto field) {
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& b : v) out.push_back(static_cast<double>(b.*field));
    return out;
  };
  BlockIidReport rep;
  rep.n_blocks = n_blocks;
  rep.ks_length = ks_two_sample(column(chain, &BlockRecord::length), column(indep, &BlockRecord::length));
  rep.ks_block_max = ks_two_sample(column(chain, &BlockRecord::block_max), column(indep, &BlockRecord::block_max));
  rep.ks_mu = ks_two_sample(column(chain, &BlockRecord::mu), column(indep, &BlockRecord::mu));
  return rep;
}

inline BlockIidReport block_iid_check(const EnvLaw& law, std::size_t n_blocks, std::uint64_t seed, unsigned threads = 1) {
  return block_iid_check(law, law, n_blocks, seed, threads);
}

}  // namespace rwre
