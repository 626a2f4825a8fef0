#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace condstable {

inline constexpr int kCriterionCount = 12;

struct AcceptanceOptions {
  /// Multiplies every replicate count (self-check runs use scale < 1).
  double scale = 1.0;
  std::uint64_t seed = 20261014;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  /// One line per sub-check.
  std::vector<std::string> details;
};

/// Runs acceptance criterion `id` in 1..kCriterionCount.
CriterionResult run_criterion(int id, const AcceptanceOptions& opt);

/// "criterion <id> PASS|FAIL <title>" followed by indented details.
std::string format_result(const CriterionResult& r);

}  // namespace condstable
