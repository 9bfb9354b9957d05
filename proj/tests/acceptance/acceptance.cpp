// Runs acceptance criteria and prints one PASS/FAIL line each. Numerical
// tolerances live with the criteria; wall-clock limits are enforced here.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "errors.hpp"
#include "rng.hpp"
#include "verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string tier = "full";
  std::vector<int> ids;
  double total_budget = 0.0;
  std::uint64_t seed = decoupler::default_seed();
  bool verbose = false;
  app.add_option("--tier", tier)->check(CLI::IsMember({"smoke", "full"}));
  app.add_option("--criterion", ids, "criterion ids (default: every id of the tier)")->check(CLI::Range(1, 14));
  app.add_option("--total-budget", total_budget, "wall-clock limit for the whole run in seconds");
  app.add_option("--seed", seed);
  app.add_flag("-v,--verbose", verbose);
  CLI11_PARSE(app, argc, argv);
  if (ids.empty()) ids = decoupler::tier_criteria(tier);

  decoupler::VerifyOptions opt;
  opt.tier = tier;
  opt.seed = seed;
  if (verbose) opt.log = [](const std::string& s) { std::fprintf(stderr, "  %s\n", s.c_str()); };

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  int failed = 0;
  for (int id : ids) {
    const auto t0 = clock::now();
    decoupler::CriterionResult r;
    try {
      r = decoupler::run_criterion(id, opt);
    } catch (const std::exception& e) {
      r.id = id;
      r.name = "error";
      r.detail = e.what();
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    const bool in_time = r.budget_seconds <= 0.0 || secs <= r.budget_seconds;
    const bool pass = r.pass && in_time;
    failed += !pass;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f s", secs);
    std::string timing = buf;
    if (r.budget_seconds > 0.0) timing += " / " + std::to_string(int(r.budget_seconds)) + " s";
    if (!in_time) timing += " over budget";
    std::printf("[%s] criterion %2d %s: %s (%s)\n", pass ? "PASS" : "FAIL", id, r.name.c_str(), r.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  if (total_budget > 0.0) {
    const double secs = std::chrono::duration<double>(clock::now() - start).count();
    const bool ok = secs <= total_budget;
    failed += !ok;
    std::printf("[%s] %s tier wall clock %.1f s / %.0f s\n", ok ? "PASS" : "FAIL", tier.c_str(), secs, total_budget);
  }
  return failed ? 1 : 0;
}
