#pragma once

// Marginal law P of a single site value omega_0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <nlohmann/json.hpp>

#include "rwre/error.hpp"
#include "rwre/rng.hpp"

namespace rwre {

enum class LawKind { discrete, beta };

/// Value of one site: the right-step probability and its odds ratio
/// rho = (1 - omega) / omega. Both are carried so that laws given by their
/// rho atoms keep rho bit-exact (needed for ties of lattice products).
struct SiteValue {
  double omega;
  double rho;
};

class EnvLaw {
 public:
  /// Discrete law on omega values.
  static EnvLaw discrete(std::vector<double> omegas, std::vector<double> probs) {
    std::vector<double> rhos(omegas.size());
    std::transform(omegas.begin(), omegas.end(), rhos.begin(),
                   [](double w) { return (1.0 - w) / w; });
    return make_discrete(std::move(omegas), std::move(rhos), std::move(probs));
  }

  /// Discrete law given by its rho atoms; omega = 1 / (1 + rho).
  static EnvLaw discrete_rho(std::vector<double> rhos, std::vector<double> probs) {
    std::vector<double> omegas(rhos.size());
    std::transform(rhos.begin(), rhos.end(), omegas.begin(), [](double r) { return 1.0 / (1.0 + r); });
    return make_discrete(std::move(omegas), std::move(rhos), std::move(probs));
  }

  /// rho = 2 with probability q, rho = 1/2 otherwise.
  static EnvLaw two_point(double q) { return discrete_rho({2.0, 0.5}, {q, 1.0 - q}); }

  /// Non-lattice three-atom law with s < 1: rho in {3, 2/3, 1/4}.
  static EnvLaw three_atom_default() { return discrete({0.25, 0.6, 0.8}, {0.3, 0.4, 0.3}); }

  static EnvLaw constant(double omega) { return discrete({omega}, {1.0}); }

  /// Beta(a, b) clamped into [eps, 1 - eps].
  static EnvLaw beta(double a, double b, double eps) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("beta law: shape parameters must be positive");
    if (!(eps > 0.0) || !(eps < 0.5)) throw InvalidArgument("beta law: eps must lie in (0, 1/2)");
    EnvLaw law;
    law.kind_ = LawKind::beta;
    law.a_ = a;
    law.b_ = b;
    law.eps_ = eps;
    return law;
  }

  LawKind kind() const noexcept { return kind_; }
  const std::vector<double>& omegas() const noexcept { return omegas_; }
  const std::vector<double>& rhos() const noexcept { return rhos_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  double beta_a() const noexcept { return a_; }
  double beta_b() const noexcept { return b_; }
  double beta_eps() const noexcept { return eps_; }

  /// E_P f(omega, rho). Exact sum for discrete laws, adaptive Gauss-Kronrod
  /// plus the two clamp atoms for beta laws.
  template <class F>
  double expect(F&& f) const {
    if (kind_ == LawKind::discrete) {
      double acc = 0.0;
      for (std::size_t i = 0; i < probs_.size(); ++i) acc += probs_[i] * f(omegas_[i], rhos_[i]);
      return acc;
    }
    const boost::math::beta_distribution<double> dist(a_, b_);
    auto g = [&](double w) { return f(w, (1.0 - w) / w) * boost::math::pdf(dist, w); };
    const double lo = eps_;
    const double hi = 1.0 - eps_;
    const double body = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, lo, hi, 20, 1e-13);
    const double mass_lo = boost::math::cdf(dist, lo);
    const double mass_hi = boost::math::cdf(boost::math::complement(dist, hi));
    return body + mass_lo * f(lo, (1.0 - lo) / lo) + mass_hi * f(hi, (1.0 - hi) / hi);
  }

  double rho_moment(double gamma) const {
    return expect([gamma](double, double rho) { return std::pow(rho, gamma); });
  }

  double mean_log_rho() const {
    return expect([](double, double rho) { return std::log(rho); });
  }

  SiteValue sample(CounterStream& rng) const {
    if (kind_ == LawKind::discrete) {
      const double u = rng.uniform();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                             probs_.size() - 1);
      return {omegas_[idx], rhos_[idx]};
    }
    // Beta via the gamma ratio; both gammas draw from the same site stream.
    std::gamma_distribution<double> ga(a_, 1.0);
    std::gamma_distribution<double> gb(b_, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    const double w = std::clamp(x / (x + y), eps_, 1.0 - eps_);
    return {w, (1.0 - w) / w};
  }

  nlohmann::json to_json() const {
    if (kind_ == LawKind::beta) return {{"kind", "beta"}, {"a", a_}, {"b", b_}, {"eps", eps_}};
    return {{"kind", "discrete"}, {"values", omegas_}, {"probs", probs_}};
  }

  /// Accepts {kind:"discrete", values:[omega...], probs:[...]} or
  /// {kind:"discrete", rho_values:[rho...], probs:[...]} or
  /// {kind:"beta", a, b, eps}.
  static EnvLaw from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) throw InvalidArgument("law: expected an object with a 'kind' field");
    const std::string kind = j.at("kind").get<std::string>();
    auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
      for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
          throw InvalidArgument("law: unknown key '" + key + "'");
      }
    };
    try {
      if (kind == "discrete") {
        reject_unknown({"kind", "values", "rho_values", "probs"});
        auto probs = j.at("probs").get<std::vector<double>>();
        if (j.contains("rho_values")) {
          if (j.contains("values")) throw InvalidArgument("law: give either 'values' or 'rho_values'");
          return discrete_rho(j.at("rho_values").get<std::vector<double>>(), std::move(probs));
        }
        return discrete(j.at("values").get<std::vector<double>>(), std::move(probs));
      }
      if (kind == "beta") {
        reject_unknown({"kind", "a", "b", "eps"});
        return beta(j.at("a").get<double>(), j.at("b").get<double>(), j.value("eps", 1e-3));
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("law: ") + e.what());
    }
    throw InvalidArgument("law: unknown kind '" + kind + "'");
  }

 private:
  EnvLaw() = default;

  static EnvLaw make_discrete(std::vector<double> omegas, std::vector<double> rhos, std::vector<double> probs) {
    if (omegas.empty() || omegas.size() != probs.size())
      throw InvalidArgument("discrete law: values and probs must be nonempty and of equal length");
    for (std::size_t i = 0; i < omegas.size(); ++i) {
      if (!(omegas[i] > 0.0 && omegas[i] < 1.0) || !(rhos[i] > 0.0) || !std::isfinite(rhos[i]))
        throw InvalidArgument("discrete law: every omega must lie strictly inside (0, 1)");
      if (!(probs[i] >= 0.0)) throw InvalidArgument("discrete law: negative probability");
    }
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("discrete law: probabilities must sum to 1");
    EnvLaw law;
    law.kind_ = LawKind::discrete;
    law.omegas_ = std::move(omegas);
    law.rhos_ = std::move(rhos);
    law.probs_ = std::move(probs);
    law.cumulative_.resize(law.probs_.size());
    std::partial_sum(law.probs_.begin(), law.probs_.end(), law.cumulative_.begin());
    return law;
  }

  LawKind kind_ = LawKind::discrete;
  std::vector<double> omegas_;
  std::vector<double> rhos_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
  double a_ = 0.0;
  double b_ = 0.0;
  double eps_ = 0.0;
};

}  // namespace rwre
