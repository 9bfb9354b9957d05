#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace decoupler {

struct VerifyOptions {
  std::string tier = "full";  ///< "smoke" or "full"
  std::uint64_t seed = 20240521;
  std::function<void(const std::string&)> log;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;  ///< one-line summary of the measured quantities
  double budget_seconds = 0.0;  ///< wall-clock limit, 0 when none
  nlohmann::json data;
};

/// Numerical part of acceptance criterion `id` (1..14). Wall-clock limits are
/// reported through budget_seconds and enforced by the caller.
CriterionResult run_criterion(int id, const VerifyOptions& opt);

/// Criteria run by a tier: smoke = {5, 13, 14} plus a reduced variance check (id 9);
/// full = 1..14.
std::vector<int> tier_criteria(const std::string& tier);

}  // namespace decoupler
