#pragma once

// The acceptance criteria, shared by the acceptance binary (full scale) and
// the `validate` experiment (smallest scale).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "rwre/experiments.hpp"
#include "rwre/oracle.hpp"

namespace rwre {

enum class AcceptanceScale { full, smoke };

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Closed-form mean and variance of T_to from `from` with reflection at `reflect`.
using MomentsFn = std::function<HittingMoments(Environment&, Site, Site, Site)>;

inline HittingMoments closed_form_moments(Environment& env, Site from, Site to, Site reflect) {
  return hitting_moments(env, from, to, reflect);
}

/// The variance recursion with the sign of the 8 V term flipped.
inline HittingMoments mutated_moments(Environment& env, Site from, Site to, Site reflect) {
  HittingMoments m;
  if (from >= to) return m;
  const QuenchedProfile p = quenched_profile(env, from, to - 1, reflect);
  for (std::size_t k = 0; k < p.w.size(); ++k) {
    m.mean += 1.0 + 2.0 * p.w[k];
    m.variance += 4.0 * (p.w[k] + p.w[k] * p.w[k]) - 8.0 * p.v[k];
  }
  return m;
}

namespace detail {

inline std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline std::string metric_summary(const ExperimentReport& rep) {
  std::string out;
  for (const auto& m : rep.metrics) {
    if (!m.pass) continue;
    if (!out.empty()) out += "; ";
    out += m.name + "=" + fmt("%.4g", m.value) + (*m.pass ? "" : " (FAIL: " + m.target + ")");
  }
  for (const auto& n : rep.notes)
    if (n.find("not found") != std::string::npos) out += "; " + n;
  return out;
}

inline CriterionResult from_report(int id, std::string name, const ExperimentReport& rep) {
  return {id, std::move(name), rep.passed(), metric_summary(rep), 0.0};
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

/// Criterion 1 with an injectable closed form: 100 environments, windows of
/// at most 50 sites with a reflecting left end, relative error <= 1e-10.
inline CriterionResult criterion_oracle(std::uint64_t seed, const MomentsFn& moments = closed_form_moments) {
  const std::vector<EnvLaw> laws{EnvLaw::two_point(0.4), EnvLaw::three_atom_default(), EnvLaw::beta(2.0, 1.2, 0.02),
                                 EnvLaw::two_point(0.25)};
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::uint64_t es = derive_seed(seed, i);
    CounterStream pick(es, StreamTag::synthetic, 0);
    const Site reflect = -static_cast<Site>(pick() % 20);
    const Site to = reflect + 2 + static_cast<Site>(pick() % 49);  // window to - reflect <= 50
    const Site from = reflect + static_cast<Site>(pick() % static_cast<std::uint64_t>(to - reflect));
    Environment env = Environment::sample(laws[i % laws.size()], es, LeftMode::reflecting,
                                          {.right_sites = 64, .reflect_at = reflect});
    const HittingMoments cf = moments(env, from, to, reflect);
    const OracleMoments orc = hitting_oracle(env, from, to, reflect);
    worst = std::max(worst, std::abs(cf.mean - orc.mean) / std::abs(orc.mean));
    worst = std::max(worst, std::abs(cf.variance - orc.variance) / std::max(std::abs(orc.variance), 1e-300));
  }
  return {1, "oracle equivalence of hitting-time mean and variance", worst <= 1e-10,
          "max relative error " + detail::fmt("%.3g", worst) + " (<= 1e-10)"};
}

inline CriterionResult criterion_homogeneous(std::uint64_t seed, std::size_t paths, unsigned threads) {
  Environment env = Environment::sample(EnvLaw::constant(0.75), seed, LeftMode::plain_p, {});
  const double mean = expected_crossing(env, 0, std::nullopt, 1e-17);
  const double var = crossing_variance(env, 0, std::nullopt, 1e-17);
  const auto hits = detail::map_paths(env, paths, threads, [&](QuenchedWalker& w, std::size_t p) {
    return w.simulate_hit(0, 1, derive_seed(seed, 0xC2), p);
  });
  std::vector<double> t;
  bool capped = false;
  for (const auto& h : hits) {
    capped = capped || h.capped;
    t.push_back(static_cast<double>(h.steps));
  }
  const Moments mo = sample_moments(t);
  const bool exact = std::abs(mean - 2.0) <= 1e-12 && std::abs(var - 6.0) <= 1e-12;
  const bool mc = std::abs(mo.mean - 2.0) <= 3.0 * mo.se && std::abs(mo.variance - 6.0) <= 0.05 * 6.0 && !capped;
  return {2, "homogeneous omega = 0.75: E T_1 = 2, Var T_1 = 6", exact && mc,
          "closed form " + detail::fmt("%.15g", mean) + ", " + detail::fmt("%.15g", var) + "; MC mean " +
              detail::fmt("%.4f", mo.mean) + " (se " + detail::fmt("%.4f", mo.se) + "), var " +
              detail::fmt("%.4f", mo.variance)};
}

inline CriterionResult criterion_coupling(std::uint64_t seed, std::size_t envs, std::size_t paths_per_env,
                                          unsigned threads) {
  const EnvLaw law = EnvLaw::two_point(0.4);
  constexpr std::uint64_t n = 3;
  constexpr Site target = 100;
  struct Tally {
    std::uint64_t violations = 0;
    std::uint64_t inconsistent = 0;
    std::uint64_t capped = 0;
    std::uint64_t diverged = 0;
  };
  const auto parts = parallel_map(
      envs * ((paths_per_env + detail::kPathChunk - 1) / detail::kPathChunk),
      [&](std::size_t task) {
        const std::size_t chunks = (paths_per_env + detail::kPathChunk - 1) / detail::kPathChunk;
        const std::size_t e = task / chunks;
        const std::size_t c = task % chunks;
        const std::uint64_t es = derive_seed(seed, e);
        QuenchedWalker w(Environment::sample(law, es, LeftMode::plain_p, {.left_sites = 2000}));
        Tally t;
        for (std::size_t p = c * detail::kPathChunk; p < std::min(paths_per_env, (c + 1) * detail::kPathChunk); ++p) {
          const CoupledSample cs = w.simulate_coupled(n, 0, target, derive_seed(es, 1), p);
          t.violations += cs.violations;
          if (cs.capped) ++t.capped;
          if (cs.divergence_step) ++t.diverged;
          if (!cs.divergence_step && cs.t_reflected != cs.t_plain) ++t.inconsistent;
        }
        return t;
      },
      threads);
  Tally sum;
  for (const auto& t : parts) {
    sum.violations += t.violations;
    sum.inconsistent += t.inconsistent;
    sum.capped += t.capped;
    sum.diverged += t.diverged;
  }
  const bool pass = sum.violations == 0 && sum.inconsistent == 0 && sum.capped == 0;
  return {8, "coupling: reflected walk never below the plain walk", pass,
          std::to_string(envs * paths_per_env) + " paths, " + std::to_string(sum.violations) + " violations, " +
              std::to_string(sum.diverged) + " diverged, " + std::to_string(sum.capped) + " capped"};
}

/// Runs `cfg` with 1 and with 8 threads and compares every output byte
/// except the wall-clock file.
inline CriterionResult criterion_determinism(std::vector<ExperimentConfig> cfgs, const std::string& scratch) {
  std::string detail;
  bool pass = true;
  for (auto cfg : cfgs) {
    std::vector<std::string> dirs;
    for (unsigned th : {1u, 8u}) {
      cfg.threads = th;
      const std::string dir = scratch + "/" + cfg.experiment + "_t" + std::to_string(th);
      std::filesystem::remove_all(dir);
      run_experiment(cfg).write(dir);
      dirs.push_back(dir);
    }
    std::size_t files = 0;
    bool same = true;
    for (const auto& entry : std::filesystem::directory_iterator(dirs[0])) {
      const auto name = entry.path().filename().string();
      if (name.find("_timing") != std::string::npos) continue;
      ++files;
      const auto other = std::filesystem::path(dirs[1]) / name;
      if (!std::filesystem::exists(other) || detail::slurp(entry.path()) != detail::slurp(other)) same = false;
    }
    pass = pass && same && files > 0;
    if (!detail.empty()) detail += "; ";
    detail += cfg.experiment + ": " + std::to_string(files) + " files " + (same ? "identical" : "DIFFER");
  }
  return {10, "determinism: 1 vs 8 threads give byte-identical output", pass, detail};
}

struct AcceptanceOptions {
  AcceptanceScale scale = AcceptanceScale::full;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string scratch_dir = "rwre_acceptance_scratch";
  std::function<void(const CriterionResult&)> on_result;  // called as each criterion finishes
};

inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt) {
  const bool full = opt.scale == AcceptanceScale::full;
  std::vector<CriterionResult> out;
  auto timed = [&](auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = f();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(r);
    if (opt.on_result) opt.on_result(out.back());
  };
  auto base = [&](const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    c.seed = opt.seed;
    c.threads = opt.threads;
    return c;
  };

  timed([&] { return criterion_oracle(opt.seed); });
  timed([&] { return criterion_homogeneous(opt.seed, 100'000, opt.threads); });
  timed([&] {
    auto r = detail::from_report(3, "tail exponent of E_omega T_nu (Hill and log-log)", run_experiment(base("tail-et")));
    return r;
  });
  timed([&] { return detail::from_report(4, "tail exponent of Var_omega T_nu", run_experiment(base("tail-var"))); });
  timed([&] { return detail::from_report(5, "stable scaling of E_omega T_{nu_n}", run_experiment(base("stable-et"))); });
  timed([&] {
    auto c = base("localize");
    c.max_hits = full ? 5 : 2;
    return detail::from_report(6, "localization near u_m at times t_m (m = 5)", run_experiment(c));
  });
  timed([&] {
    return detail::from_report(7, "Gaussian window: KS of standardized T_x", run_experiment(base("gaussian-t")));
  });
  timed([&] { return criterion_coupling(opt.seed, 10, full ? 1000 : 200, opt.threads); });
  timed([&] {
    auto c = base("annealed-t");
    if (!full) c.n_values = {128, 256, 512, 1024, 2048};
    return detail::from_report(9, "annealed scaling exponent of median T_n", run_experiment(c));
  });
  timed([&] {
    auto s = base("stable-et");
    s.replicas = 300;
    s.blocks = 100;
    auto w = base("speed");
    w.replicas = 100;
    w.target = 1000;
    auto l = base("localize");
    l.search = 60;
    l.paths_per_env = 200;
    l.max_hits = 1;
    l.t_max = 2e5;
    return criterion_determinism({s, w, l}, opt.scratch_dir);
  });
  return out;
}

/// The mutation check: the oracle criterion must fail on a broken variance.
inline CriterionResult mutation_check(std::uint64_t seed) {
  const CriterionResult r = criterion_oracle(seed, mutated_moments);
  return {0, "mutation: sign-flipped variance term is rejected", !r.pass, "mutant " + r.detail};
}

inline ExperimentReport run_validate(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  AcceptanceOptions opt;
  opt.scale = AcceptanceScale::smoke;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.scratch_dir = cfg.out_dir + "/validate_scratch";
  opt.on_result = [](const CriterionResult& r) {
    std::printf("criterion %2d %s  %s: %s\n", r.id, r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    std::fflush(stdout);
  };
  std::vector<CriterionResult> results = run_acceptance(opt);
  results.push_back(mutation_check(cfg.seed));
  opt.on_result(results.back());
  CsvTable t({"criterion", "name", "pass", "detail"});
  for (const auto& r : results) {
    t.add({std::int64_t{r.id}, r.name, std::string(r.pass ? "true" : "false"), r.detail});
    rep.add({"criterion_" + std::to_string(r.id), r.pass ? 1.0 : 0.0, {}, {}, r.name, r.pass, ""});
  }
  rep.tables["validate"] = std::move(t);
  std::filesystem::remove_all(opt.scratch_dir);
  return rep;
}

}  // namespace rwre
