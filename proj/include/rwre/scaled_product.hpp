#pragma once

// Overflow-free running products of nonnegative factors.
//
// The value is mant * 2^exp with exp a multiple of 512 and mant in
// [2^-512, 2^512), so every positive value has exactly one representation
// and comparisons against 1 are exact. Rescaling by powers of two is exact,
// hence a product of powers of two (lattice environments) stays exact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace rwre {

class ScaledProduct {
 public:
  constexpr ScaledProduct() = default;
  explicit ScaledProduct(double value) : mant_(value) { normalize(); }

  static ScaledProduct from_log(double log_value) {
    const double binary = log_value / std::numbers::ln2;
    const auto chunks = static_cast<std::int64_t>(std::floor(binary / 512.0));
    ScaledProduct p;
    p.mant_ = std::exp(log_value - static_cast<double>(chunks * 512) * std::numbers::ln2);
    p.exp_ = chunks * 512;
    p.normalize();
    return p;
  }

  ScaledProduct& operator*=(double factor) {
    mant_ *= factor;
    if (mant_ >= kHi || mant_ < kLo) normalize();
    return *this;
  }

  ScaledProduct& operator*=(const ScaledProduct& other) {
    mant_ *= other.mant_;
    exp_ += other.exp_;
    normalize();
    return *this;
  }

  friend ScaledProduct operator*(ScaledProduct a, double b) { return a *= b; }

  bool is_zero() const noexcept { return mant_ == 0.0; }

  bool less_than_one() const noexcept { return exp_ < 0 || (exp_ == 0 && mant_ < 1.0); }

  /// Three-way comparison of values (exact).
  friend bool operator<(const ScaledProduct& a, const ScaledProduct& b) noexcept {
    if (a.is_zero() || b.is_zero()) return a.mant_ < b.mant_;
    if (a.exp_ != b.exp_) return a.exp_ < b.exp_;
    return a.mant_ < b.mant_;
  }

  double log() const {
    if (is_zero()) return -std::numeric_limits<double>::infinity();
    return std::log(mant_) + static_cast<double>(exp_) * std::numbers::ln2;
  }

  /// Plain double; saturates to 0 or +inf outside the representable range.
  double value() const {
    if (is_zero() || exp_ == 0) return mant_;
    return std::ldexp(mant_, static_cast<int>(std::clamp<std::int64_t>(exp_, -4096, 4096)));
  }

 private:
  static constexpr double kHi = 0x1.0p512;
  static constexpr double kLo = 0x1.0p-512;

  void normalize() {
    if (mant_ == 0.0 || !std::isfinite(mant_)) return;
    while (mant_ >= kHi) {
      mant_ *= kLo;
      exp_ += 512;
    }
    while (mant_ < kLo) {
      mant_ *= kHi;
      exp_ -= 512;
    }
  }

  double mant_ = 1.0;
  std::int64_t exp_ = 0;
};

}  // namespace rwre
