#pragma once

// Realized environments: immutable windows of site values over [lo, hi].
//
// Site values are a pure function of (seed, site) (and of the accepted
// rejection attempt for the conditioned left half), so extending a window
// reproduces the overlap bit for bit. Copies share storage.

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwre/env_law.hpp"
#include "rwre/error.hpp"
#include "rwre/rng.hpp"
#include "rwre/scaled_product.hpp"

namespace rwre {

using Site = std::int64_t;

/// How the half-line left of the origin is realized.
///  plain_p       - i.i.d. under P, extended on demand.
///  conditioned_q - P conditioned on Pi_{-k,-1} < 1 for all k >= 1.
///  reflecting    - omega = 1 at the reflection point, nothing to its left.
///  fixed         - an explicit finite array; no extension possible.
enum class LeftMode { plain_p, conditioned_q, reflecting, fixed };

inline const char* to_string(LeftMode m) {
  switch (m) {
    case LeftMode::plain_p: return "plain_P";
    case LeftMode::conditioned_q: return "conditioned_Q";
    case LeftMode::reflecting: return "reflecting";
    case LeftMode::fixed: return "fixed";
  }
  return "?";
}

struct EnvOptions {
  Site right_sites = 1024;            // initial hi = right_sites - 1
  Site left_sites = 0;                // plain_P only: initial lo = -left_sites
  double left_depth_tol = 1e-12;      // conditioned_Q: stop once Pi_{-k,-1} < tol
  Site reflect_at = 0;                // reflecting only
  std::uint64_t max_restarts = 1'000'000;
  std::uint64_t max_left_sites = 100'000'000;
};

/// Site value of a plain P site. Both half-lines share one stream so the
/// plain field is a single i.i.d. sequence indexed by site.
inline SiteValue draw_p_site(const EnvLaw& law, std::uint64_t seed, Site site) {
  CounterStream rng(seed, StreamTag::site_p, static_cast<std::uint64_t>(site));
  return law.sample(rng);
}

inline SiteValue draw_q_site(const EnvLaw& law, std::uint64_t seed, std::uint32_t attempt, Site site) {
  CounterStream rng(seed, StreamTag::site_q_left, static_cast<std::uint64_t>(site), attempt);
  return law.sample(rng);
}

class Environment {
 public:
  /// Draw an environment from `law`.
  static Environment sample(const EnvLaw& law, std::uint64_t seed, LeftMode mode, const EnvOptions& opt = {}) {
    if (mode == LeftMode::fixed) throw InvalidArgument("sample: fixed environments are built from arrays");
    if (opt.right_sites < 1) throw InvalidArgument("sample: right_sites must be >= 1");
    Environment env;
    env.law_ = std::make_shared<const EnvLaw>(law);
    env.seed_ = seed;
    env.mode_ = mode;
    env.opt_ = opt;
    auto st = std::make_shared<Storage>();
    const Site hi = opt.right_sites - 1;

    Site lo = 0;
    std::vector<SiteValue> left;  // sites -1, -2, ... (reverse order)
    switch (mode) {
      case LeftMode::plain_p:
        lo = -opt.left_sites;
        break;
      case LeftMode::reflecting:
        if (opt.reflect_at > 0) throw InvalidArgument("sample: reflect_at must be <= 0");
        lo = opt.reflect_at;
        break;
      case LeftMode::conditioned_q: {
        if (!(opt.left_depth_tol > 0.0 && opt.left_depth_tol < 1.0))
          throw InvalidArgument("sample: left_depth_tol must lie in (0, 1)");
        env.sample_q_left(left);
        lo = -static_cast<Site>(left.size());
        break;
      }
      case LeftMode::fixed:
        break;
    }

    st->lo = lo;
    const auto n = static_cast<std::size_t>(hi - lo + 1);
    st->omega.resize(n);
    st->rho.resize(n);
    for (Site i = lo; i <= hi; ++i) {
      SiteValue v{};
      if (i < 0 && mode == LeftMode::conditioned_q) {
        v = left[static_cast<std::size_t>(-i - 1)];
      } else if (mode == LeftMode::reflecting && i == opt.reflect_at) {
        v = {1.0, 0.0};
      } else {
        v = draw_p_site(law, seed, i);
      }
      st->omega[static_cast<std::size_t>(i - lo)] = v.omega;
      st->rho[static_cast<std::size_t>(i - lo)] = v.rho;
    }
    env.store_ = std::move(st);
    return env;
  }

  /// Fixed environment from explicit omega values starting at site `lo`.
  /// omega = 1 marks a reflecting site.
  static Environment from_omegas(Site lo, std::vector<double> omega) {
    std::vector<double> rho(omega.size());
    for (std::size_t i = 0; i < omega.size(); ++i) {
      if (!(omega[i] > 0.0 && omega[i] <= 1.0)) throw InvalidArgument("from_omegas: omega must lie in (0, 1]");
      rho[i] = (1.0 - omega[i]) / omega[i];
    }
    return make_fixed(lo, std::move(omega), std::move(rho));
  }

  /// Fixed environment from rho values; rho = 0 marks a reflecting site.
  static Environment from_rhos(Site lo, std::vector<double> rho) {
    std::vector<double> omega(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (!(rho[i] >= 0.0) || !std::isfinite(rho[i])) throw InvalidArgument("from_rhos: rho must be finite and >= 0");
      omega[i] = 1.0 / (1.0 + rho[i]);
    }
    return make_fixed(lo, std::move(omega), std::move(rho));
  }

  Site lo() const noexcept { return store_->lo; }
  Site hi() const noexcept { return store_->lo + static_cast<Site>(store_->omega.size()) - 1; }
  bool covers(Site a, Site b) const noexcept { return a >= lo() && b <= hi(); }
  std::size_t size() const noexcept { return store_->omega.size(); }

  double omega(Site i) const { return store_->omega[index(i)]; }
  double rho(Site i) const { return store_->rho[index(i)]; }
  bool is_reflecting(Site i) const { return omega(i) == 1.0; }

  /// Unchecked access for hot loops; caller guarantees covers(i, i).
  double rho_unchecked(Site i) const noexcept { return store_->rho[static_cast<std::size_t>(i - store_->lo)]; }

  std::span<const double> omegas() const noexcept { return store_->omega; }
  std::span<const double> rhos() const noexcept { return store_->rho; }

  std::uint64_t seed() const noexcept { return seed_; }
  LeftMode left_mode() const noexcept { return mode_; }
  const EnvLaw* law() const noexcept { return law_.get(); }

  bool can_extend_left() const noexcept {
    return mode_ == LeftMode::plain_p || mode_ == LeftMode::conditioned_q;
  }
  bool can_extend_right() const noexcept { return mode_ != LeftMode::fixed; }

  /// A snapshot covering [min(lo, new_lo), max(hi, new_hi)] whose overlap
  /// with this one is bit-identical.
  Environment extended(Site new_lo, Site new_hi) const {
    new_lo = std::min(new_lo, lo());
    new_hi = std::max(new_hi, hi());
    if (new_lo == lo() && new_hi == hi()) return *this;
    if (new_hi > hi() && !can_extend_right()) throw WindowError("environment cannot be extended to the right");
    if (new_lo < lo() && !can_extend_left()) throw WindowError("environment cannot be extended to the left");
    if (lo() - new_lo > static_cast<Site>(opt_.max_left_sites))
      throw BudgetExceeded("environment: left extension budget exhausted");

    Environment env = *this;
    auto st = std::make_shared<Storage>();
    st->lo = new_lo;
    const auto n = static_cast<std::size_t>(new_hi - new_lo + 1);
    st->omega.resize(n);
    st->rho.resize(n);
    const auto offset = static_cast<std::size_t>(lo() - new_lo);
    std::copy(store_->omega.begin(), store_->omega.end(), st->omega.begin() + static_cast<std::ptrdiff_t>(offset));
    std::copy(store_->rho.begin(), store_->rho.end(), st->rho.begin() + static_cast<std::ptrdiff_t>(offset));

    for (Site i = hi() + 1; i <= new_hi; ++i) {
      const SiteValue v = draw_p_site(*law_, seed_, i);
      st->omega[static_cast<std::size_t>(i - new_lo)] = v.omega;
      st->rho[static_cast<std::size_t>(i - new_lo)] = v.rho;
    }
    ScaledProduct running = q_running_;
    for (Site i = lo() - 1; i >= new_lo; --i) {
      SiteValue v{};
      if (mode_ == LeftMode::conditioned_q) {
        v = draw_q_site(*law_, seed_, q_attempt_, i);
        running *= v.rho;
        if (!running.less_than_one())
          throw BudgetExceeded("conditioned environment: left extension left the conditioning event");
      } else {
        v = draw_p_site(*law_, seed_, i);
      }
      st->omega[static_cast<std::size_t>(i - new_lo)] = v.omega;
      st->rho[static_cast<std::size_t>(i - new_lo)] = v.rho;
    }
    env.q_running_ = running;
    env.store_ = std::move(st);
    return env;
  }

  /// Accepted rejection attempt of the conditioned left half.
  std::uint32_t q_attempt() const noexcept { return q_attempt_; }

  void dump_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path);
    out << "site,omega\n";
    char buf[64];
    for (Site i = lo(); i <= hi(); ++i) {
      std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(i), omega(i));
      out << buf;
    }
  }

 private:
  struct Storage {
    Site lo = 0;
    std::vector<double> omega;
    std::vector<double> rho;
  };

  Environment() = default;

  static Environment make_fixed(Site lo, std::vector<double> omega, std::vector<double> rho) {
    if (omega.empty()) throw InvalidArgument("fixed environment: empty site list");
    Environment env;
    env.mode_ = LeftMode::fixed;
    auto st = std::make_shared<Storage>();
    st->lo = lo;
    st->omega = std::move(omega);
    st->rho = std::move(rho);
    env.store_ = std::move(st);
    return env;
  }

  std::size_t index(Site i) const {
    if (i < lo() || i > hi())
      throw WindowError("site " + std::to_string(i) + " outside window [" + std::to_string(lo()) + ", " +
                        std::to_string(hi()) + "]");
    return static_cast<std::size_t>(i - lo());
  }

  // Rejection sampling of the left half under Q: restart on any
  // Pi_{-k,-1} >= 1, accept once the product falls below left_depth_tol.
  void sample_q_left(std::vector<SiteValue>& left) {
    std::uint64_t drawn = 0;
    for (std::uint64_t attempt = 0; attempt < opt_.max_restarts; ++attempt) {
      left.clear();
      ScaledProduct running;
      const ScaledProduct depth(opt_.left_depth_tol);
      bool rejected = false;
      for (Site k = 1;; ++k) {
        const SiteValue v = draw_q_site(*law_, seed_, static_cast<std::uint32_t>(attempt), -k);
        left.push_back(v);
        running *= v.rho;
        if (++drawn > opt_.max_left_sites) throw BudgetExceeded("conditioned sampling: site budget exhausted");
        if (!running.less_than_one()) {
          rejected = true;
          break;
        }
        if (running < depth) break;
      }
      if (!rejected) {
        q_attempt_ = static_cast<std::uint32_t>(attempt);
        q_running_ = running;
        return;
      }
    }
    throw BudgetExceeded("conditioned sampling: rejection budget exhausted (law too close to recurrent)");
  }

  std::shared_ptr<const Storage> store_;
  std::shared_ptr<const EnvLaw> law_;
  std::uint64_t seed_ = 0;
  LeftMode mode_ = LeftMode::fixed;
  EnvOptions opt_{};
  std::uint32_t q_attempt_ = 0;
  ScaledProduct q_running_{};  // Pi_{lo,-1} for conditioned_Q
};

}  // namespace rwre
