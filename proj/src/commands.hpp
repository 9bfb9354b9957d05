#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

namespace decoupler {

constexpr const char* kLibraryVersion = "1.0.0";
constexpr int kConfigVersion = 1;  ///< accepted value of the optional top-level "version" key

/// Process exit codes shared by the CLI and the C API.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitCriterion = 4 };

struct RunOptions {
  std::optional<std::uint64_t> seed;  ///< overrides config "seed"
  std::optional<int> workers;
  std::string out_dir;                ///< empty: no files written
  std::optional<std::string> tier;    ///< verify only
  std::function<void(const std::string&)> log;
};

struct CommandOutcome {
  int exit_code = kExitOk;
  nlohmann::json report;
  std::string error;
};

/// Runs one of: decouple, pde, spde-onepoint, spde-multipoint, oracle, verify.
/// Never throws; failures map to exit codes 2 (config), 3 (numerical) and 4 (criterion).
CommandOutcome run_command(const std::string& command, const nlohmann::json& config, const RunOptions& opt);

}  // namespace decoupler
