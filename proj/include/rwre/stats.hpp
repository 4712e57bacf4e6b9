#pragma once

// Tail-index and distributional estimators: Hill with bootstrap interval,
// log-log survival regression with a curvature diagnostic, one- and
// two-sample Kolmogorov-Smirnov distances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"

namespace rwre {

struct TailFit {
  std::size_t n_samples = 0;
  std::size_t k_order = 0;
  double s_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double k_inf_hat = 0.0;  // x^s_hat * survival(x) at x = X_(k+1)
};

inline nlohmann::json to_json(const TailFit& f) {
  return {{"n_samples", f.n_samples}, {"k_order", f.k_order}, {"s_hat", f.s_hat},
          {"ci_low", f.ci_low},       {"ci_high", f.ci_high}, {"k_inf_hat", f.k_inf_hat}};
}

namespace detail {

/// Hill statistic on the k+1 largest values of `x` (reorders `x`).
inline std::optional<double> hill_core(std::vector<double>& x, std::size_t k, double* threshold = nullptr) {
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k), x.end(), std::greater<>());
  const double xk = x[k];
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(x[i] / xk);
  if (threshold) *threshold = xk;
  if (!(sum > 0.0)) return std::nullopt;
  return static_cast<double>(k) / sum;
}

inline double quantile_sorted(const std::vector<double>& v, double p) {
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Hill estimator s_hat = k / sum_{i<=k} log(X_(i) / X_(k+1)) on descending
/// order statistics; k defaults to floor(sqrt(n)). The 95% interval is the
/// percentile interval of `resamples` bootstrap replicates, widened if
/// needed to contain s_hat.
inline TailFit hill_estimate(std::span<const double> samples, std::optional<std::size_t> k_order = std::nullopt,
                             std::uint64_t seed = 0, std::size_t resamples = 200, unsigned threads = 1) {
  const std::size_t n = samples.size();
  if (n < 4) throw InvalidArgument("hill_estimate: need at least 4 samples");
  for (double v : samples)
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("hill_estimate: samples must be positive and finite");
  const std::size_t k = k_order.value_or(static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n)))));
  if (k < 1 || 2 * k >= n) throw InvalidArgument("hill_estimate: need 1 <= k_order < n/2");

  TailFit fit;
  fit.n_samples = n;
  fit.k_order = k;
  std::vector<double> x(samples.begin(), samples.end());
  double threshold = 0.0;
  const auto s = detail::hill_core(x, k, &threshold);
  if (!s) throw InvalidArgument("hill_estimate: zero log spacings (tied upper order statistics)");
  fit.s_hat = *s;
  fit.k_inf_hat = std::pow(threshold, fit.s_hat) * static_cast<double>(k) / static_cast<double>(n);

  fit.ci_low = fit.ci_high = fit.s_hat;
  if (resamples > 0) {
    auto reps = parallel_map(
        resamples,
        [&](std::size_t b) {
          CounterStream rng(seed, StreamTag::bootstrap, b);
          std::vector<double> r(n);
          for (auto& v : r) v = samples[static_cast<std::size_t>(rng() % n)];
          return detail::hill_core(r, k).value_or(std::numeric_limits<double>::quiet_NaN());
        },
        threads);
    std::erase_if(reps, [](double v) { return std::isnan(v); });
    if (!reps.empty()) {
      std::sort(reps.begin(), reps.end());
      fit.ci_low = std::min(fit.s_hat, detail::quantile_sorted(reps, 0.025));
      fit.ci_high = std::max(fit.s_hat, detail::quantile_sorted(reps, 0.975));
    }
  }
  return fit;
}

/// sup_x |F_n(x) - F(x)|, checking both sides of every jump of F_n. The
/// reference's left limit at a sample point is taken at the next smaller
/// double, so discontinuous references are handled too.
inline double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InvalidArgument("ks_distance: empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double below = static_cast<double>(i) / n;  // F_n(x-)
    const double at = static_cast<double>(j) / n;     // F_n(x)
    const double f_at = cdf(x[i]);
    const double f_below = cdf(std::nextafter(x[i], -std::numeric_limits<double>::infinity()));
    d = std::max({d, std::abs(at - f_at), std::abs(below - f_below)});
    i = j;
  }
  return d;
}

/// The empirical CDF of `sample` as a callable.
inline std::function<double(double)> empirical_cdf(std::span<const double> sample) {
  auto x = std::make_shared<std::vector<double>>(sample.begin(), sample.end());
  std::sort(x->begin(), x->end());
  return [x](double t) {
    return static_cast<double>(std::upper_bound(x->begin(), x->end(), t) - x->begin()) / static_cast<double>(x->size());
  };
}

/// sup_x |F_a(x) - F_b(x)| between two empirical laws.
inline double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    double t = 0.0;
    if (j == y.size() || (i < x.size() && x[i] <= y[j])) {
      t = x[i];
    } else {
      t = y[j];
    }
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Phi(x) = erfc(-x / sqrt 2) / 2.
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Two-sample KS distance after rescaling the 2n sample by 2^{-1/s}; a
/// common s-stable limit of n^{-1/s} S_n makes it small.
inline double scaling_stability(std::span<const double> sample_n, std::span<const double> sample_2n, double s) {
  if (!(s > 0.0)) throw InvalidArgument("scaling_stability: s must be positive");
  for (double v : sample_n)
    if (!(v > 0.0)) throw InvalidArgument("scaling_stability: samples must be positive");
  const double scale = std::pow(2.0, -1.0 / s);
  std::vector<double> r(sample_2n.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(sample_2n[i] > 0.0)) throw InvalidArgument("scaling_stability: samples must be positive");
    r[i] = sample_2n[i] * scale;
  }
  return ks_two_sample(sample_n, r);
}

inline constexpr double kCurvatureThreshold = 0.1;

struct SurvivalFit {
  double slope = 0.0;      // -s_hat
  double intercept = 0.0;  // log K_hat
  double s_hat = 0.0;
  double k_hat = 0.0;
  double curvature = 0.0;  // |c| * span(log x) / |b| for log S = a + b u + c u^2
  bool non_power = false;
  std::size_t n_points = 0;
  double ci_low = 0.0;  // bootstrap interval for s_hat (equal to s_hat without resampling)
  double ci_high = 0.0;
};

inline nlohmann::json to_json(const SurvivalFit& f) {
  return {{"slope", f.slope},         {"intercept", f.intercept}, {"s_hat", f.s_hat},
          {"k_hat", f.k_hat},         {"curvature", f.curvature}, {"non_power", f.non_power},
          {"n_points", f.n_points},   {"ci_low", f.ci_low},       {"ci_high", f.ci_high}};
}

namespace detail {

/// Least squares of log S on log x over descending ranks [i_lo, i_hi] of
/// the sorted (descending) sample; S at rank i is i/n.
inline SurvivalFit loglog_core(const std::vector<double>& desc, std::size_t i_lo, std::size_t i_hi) {
  const double n = static_cast<double>(desc.size());
  std::vector<double> u;
  std::vector<double> y;
  for (std::size_t i = i_lo; i <= i_hi; ++i) {
    const double x = desc[i - 1];
    if (!(x > 0.0)) throw InvalidArgument("survival_loglog_fit: samples must be positive");
    u.push_back(std::log(x));
    y.push_back(std::log(static_cast<double>(i) / n));
  }
  const double umin = *std::min_element(u.begin(), u.end());
  const double umax = *std::max_element(u.begin(), u.end());
  if (!(umax > umin)) throw InvalidArgument("survival_loglog_fit: degenerate quantile range (single atom)");

  // Centered and scaled abscissa keeps the normal equations well conditioned.
  const double mid = 0.5 * (umin + umax);
  const double half = 0.5 * (umax - umin);
  const std::size_t m = u.size();
  double s0 = static_cast<double>(m), s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double z = (u[i] - mid) / half;
    s1 += z;
    s2 += z * z;
    s3 += z * z * z;
    s4 += z * z * z * z;
    t0 += y[i];
    t1 += z * y[i];
    t2 += z * z * y[i];
  }
  SurvivalFit f;
  f.n_points = m;
  const double det1 = s0 * s2 - s1 * s1;
  if (!(std::abs(det1) > 0.0)) throw InvalidArgument("survival_loglog_fit: degenerate quantile range");
  const double bz = (s0 * t1 - s1 * t0) / det1;
  const double az = (t0 - bz * s1) / s0;
  f.slope = bz / half;
  f.intercept = az - f.slope * mid;
  f.s_hat = -f.slope;
  f.k_hat = std::exp(f.intercept);

  // Quadratic fit by Cramer's rule on the 3x3 normal equations.
  auto det3 = [](double a, double b, double c, double d, double e, double g, double h, double i, double j) {
    return a * (e * j - g * i) - b * (d * j - g * h) + c * (d * i - e * h);
  };
  const double D = det3(s0, s1, s2, s1, s2, s3, s2, s3, s4);
  if (std::abs(D) > 0.0) {
    const double b2 = det3(s0, t0, s2, s1, t1, s3, s2, t2, s4) / D;
    const double c2 = det3(s0, s1, t0, s1, s2, t1, s2, s3, t2) / D;
    // In z units the span is 2; the ratio is invariant under the rescaling.
    if (std::abs(b2) > 0.0) f.curvature = std::abs(c2) * 2.0 / std::abs(b2);
    else f.curvature = std::numeric_limits<double>::infinity();
  }
  f.non_power = f.curvature > kCurvatureThreshold;
  return f;
}

}  // namespace detail

/// Regression of log empirical survival on log x over the upper quantile
/// band [q_low, q_high] (default: top 10% down to top 1%).
inline SurvivalFit survival_loglog_fit(std::span<const double> samples, double q_high = 0.10, double q_low = 0.01,
                                       std::size_t resamples = 0, std::uint64_t seed = 0, unsigned threads = 1) {
  const std::size_t n = samples.size();
  if (n < 1000) throw InvalidArgument("survival_loglog_fit: need at least 1000 samples");
  if (!(q_low > 0.0 && q_low < q_high && q_high <= 1.0)) throw InvalidArgument("survival_loglog_fit: bad quantile range");
  const auto i_lo = static_cast<std::size_t>(std::ceil(q_low * static_cast<double>(n)));
  const auto i_hi = static_cast<std::size_t>(std::floor(q_high * static_cast<double>(n)));
  if (i_hi <= i_lo + 1) throw InvalidArgument("survival_loglog_fit: degenerate quantile range");

  std::vector<double> desc(samples.begin(), samples.end());
  std::sort(desc.begin(), desc.end(), std::greater<>());
  SurvivalFit fit = detail::loglog_core(desc, i_lo, i_hi);
  fit.ci_low = fit.ci_high = fit.s_hat;
  if (resamples > 0) {
    auto reps = parallel_map(
        resamples,
        [&](std::size_t b) {
          CounterStream rng(seed, StreamTag::bootstrap, (1ull << 40) + b);
          std::vector<double> r(n);
          for (auto& v : r) v = samples[static_cast<std::size_t>(rng() % n)];
          std::sort(r.begin(), r.end(), std::greater<>());
          try {
            return detail::loglog_core(r, i_lo, i_hi).s_hat;
          } catch (const InvalidArgument&) {
            return std::numeric_limits<double>::quiet_NaN();
          }
        },
        threads);
    std::erase_if(reps, [](double v) { return std::isnan(v); });
    if (!reps.empty()) {
      std::sort(reps.begin(), reps.end());
      fit.ci_low = std::min(fit.s_hat, detail::quantile_sorted(reps, 0.025));
      fit.ci_high = std::max(fit.s_hat, detail::quantile_sorted(reps, 0.975));
    }
  }
  return fit;
}

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se = 0.0;        // standard error of the mean
};

inline Moments sample_moments(std::span<const double> x) {
  Moments m;
  m.n = x.size();
  if (x.empty()) return m;
  // Welford.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (double v : x) {
    ++k;
    const double d = v - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (v - mean);
  }
  m.mean = mean;
  m.variance = k > 1 ? m2 / static_cast<double>(k - 1) : 0.0;
  m.se = std::sqrt(m.variance / static_cast<double>(k));
  return m;
}

inline double median(std::vector<double> x) {
  if (x.empty()) throw InvalidArgument("median: empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

/// Ordinary least squares y = a + b x; returns {a, b}.
inline std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("linear_fit: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("linear_fit: constant abscissa");
  const double b = sxy / sxx;
  return {my - b * mx, b};
}

}  // namespace rwre
