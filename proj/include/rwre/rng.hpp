#pragma once

// Counter-based random streams.
//
// Philox4x32-10 (Salmon et al., SC'11) keyed by a 64-bit seed. Every random
// quantity in the library is a pure function of (key, counter), so a site of
// the environment or a step of a path can be regenerated without replaying
// anything before it, and replicas never share state across threads.

#include <array>
#include <cstdint>
#include <limits>

namespace rwre {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void philox_round(Counter& c, const Key& k) noexcept {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace detail

constexpr Counter philox4x32_10(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += detail::kPhiloxW0;
      key[1] += detail::kPhiloxW1;
    }
    detail::philox_round(ctr, key);
  }
  return ctr;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of replica `index` under `master`. Distinct indices give unrelated
/// keys; the mapping does not depend on how replicas are scheduled.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

constexpr Key key_from_seed(std::uint64_t seed) noexcept {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Map 64 random bits to a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stream tags keep independent uses of one seed on disjoint counters.
enum class StreamTag : std::uint32_t {
  site_p = 1,
  site_q_left = 2,
  walk = 3,
  bootstrap = 4,
  synthetic = 5,
};

/// UniformRandomBitGenerator over Philox. A stream is identified by
/// (seed, tag, lane, id); its draws are the successive counter blocks.
/// `lane` is 24 bits (used for rejection-attempt numbers), `id` is 64 bits
/// (a site index or a path index).
class CounterStream {
 public:
  using result_type = std::uint64_t;

  CounterStream() = default;
  CounterStream(std::uint64_t seed, StreamTag tag, std::uint64_t id, std::uint32_t lane = 0) noexcept
      : key_(key_from_seed(seed)),
        id_lo_(static_cast<std::uint32_t>(id)),
        id_hi_(static_cast<std::uint32_t>(id >> 32)),
        tag_lane_((static_cast<std::uint32_t>(tag) & 0xFFu) | (lane << 8)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (avail_ == 0) refill();
    return buffer_[--avail_];
  }

  double uniform() noexcept { return to_unit((*this)()); }

  /// Number of 64-bit draws consumed so far.
  std::uint64_t position() const noexcept { return block_ * 2 - avail_; }

 private:
  void refill() noexcept {
    const Counter out = philox4x32_10(
        {id_lo_, id_hi_, tag_lane_, static_cast<std::uint32_t>(block_)}, key_);
    buffer_[1] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    buffer_[0] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    ++block_;
    // Past 2^32 blocks the high half of the block number is folded into the key.
    if ((block_ & 0xFFFFFFFFull) == 0) key_[1] ^= static_cast<std::uint32_t>(block_ >> 32);
    avail_ = 2;
  }

  Key key_{};
  std::uint32_t id_lo_ = 0;
  std::uint32_t id_hi_ = 0;
  std::uint32_t tag_lane_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int avail_ = 0;
};

}  // namespace rwre
