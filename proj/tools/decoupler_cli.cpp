#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "decoupler/decoupler.h"

namespace {

void print_line(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
  std::fflush(stderr);
}

bool slurp(const std::string& path, std::string& out) {
  std::ifstream is(path);
  if (!is) return false;
  std::ostringstream ss;
  ss << is.rdbuf();
  out = ss.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoupling fields, the H equation and smoothed SPDE harnesses"};
  app.set_version_flag("--version", std::string(dc_version()));
  app.require_subcommand(1);

  std::string config_path, out_dir, tier;
  int64_t seed = -1;
  int workers = -1;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    sub->add_option("--seed", seed, "master seed (defaults to DECOUPLER_SEED, then the built-in seed)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--workers", workers, "worker threads, 0 = hardware concurrency")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--quiet", quiet, "suppress progress lines");
  };

  for (const char* name : {"decouple", "pde", "spde-onepoint", "spde-multipoint", "oracle"})
    add_common(app.add_subcommand(name, std::string("run ") + name), true);
  auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
  add_common(verify, false);
  verify->add_option("--tier", tier, "budget tier")->check(CLI::IsMember({"smoke", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::string config = "{}";
  if (!config_path.empty() && !slurp(config_path, config)) {
    std::cerr << "error: cannot read " << config_path << "\n";
    return 2;
  }

  dc_run_options opt;
  dc_run_options_init(&opt);
  opt.seed = seed;
  opt.workers = workers;
  opt.out_dir = out_dir.empty() ? nullptr : out_dir.c_str();
  opt.tier = tier.empty() ? nullptr : tier.c_str();
  if (!quiet) opt.log = print_line;

  char* report = nullptr;
  const int rc = dc_run(command.c_str(), config.c_str(), &opt, &report);
  if (report) {
    if (out_dir.empty()) std::cout << report << "\n";
    dc_string_free(report);
  }
  if (rc == 2 || rc == 3) std::cerr << "error: " << dc_last_error() << "\n";
  return rc;
}
