// rwre <experiment> [--config FILE] [--seed U64] [--threads N] [--out DIR]
// Exit codes: 0 all thresholds met, 1 a threshold failed, 2 usage or config error.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "rwre/rwre.hpp"

namespace {

std::string experiment_list() {
  std::string s;
  for (const auto& n : rwre::experiment_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

void print_report(const rwre::ExperimentReport& rep, const std::string& out_dir) {
  for (const auto& m : rep.metrics) {
    const char* tag = !m.pass ? "INFO" : (*m.pass ? "PASS" : "FAIL");
    std::printf("[%s] %s = %s  (%s)\n", tag, m.name.c_str(), rwre::format_double(m.value).c_str(), m.target.c_str());
  }
  for (const auto& n : rep.notes) std::printf("note: %s\n", n.c_str());
  std::printf("samples %llu, capped %llu, wall clock %.1f s, output in %s\n",
              static_cast<unsigned long long>(rep.samples), static_cast<unsigned long long>(rep.capped),
              rep.wall_clock_s, out_dir.c_str());
  std::printf("%s\n", rep.passed() ? "RESULT: PASS" : "RESULT: FAIL");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random walk in random environment: theorem verification campaigns"};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  app.add_option("experiment", experiment, "one of: " + experiment_list())->required();
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed, "master seed (overrides the config file)");
  app.add_option("--threads", threads, "worker threads, 0 = all cores (output does not depend on it)");
  app.add_option("--out", out_dir, "output directory (overrides the config file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    rwre::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = rwre::load_config_file(config_path, cfg);
    cfg.experiment = experiment;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (out_dir) cfg.out_dir = *out_dir;
    rwre::validate_config(cfg);
    const rwre::ExperimentReport rep = rwre::run_experiment(cfg);
    rep.write(cfg.out_dir);
    print_report(rep, cfg.out_dir);
    return rep.passed() ? 0 : 1;
  } catch (const rwre::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const rwre::InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 2;
  } catch (const rwre::BudgetExceeded& e) {
    std::fprintf(stderr, "budget exhausted: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
