#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "condstable/acceptance.hpp"
#include "condstable/harness.hpp"

int main(int argc, char** argv) {
  condstable::AcceptanceOptions opt;
  std::vector<int> ids;
  CLI::App app{"Acceptance criteria, one pass/fail line each", "condstable_acceptance"};
  app.add_option("--criterion", ids, "Criteria to run (default: all)")
      ->check(CLI::Range(1, condstable::kCriterionCount));
  app.add_option("--scale", opt.scale, "Replicate count multiplier")->capture_default_str();
  app.add_option("--seed", opt.seed, "Base seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  if (ids.empty())
    for (int id = 1; id <= condstable::kCriterionCount; ++id) ids.push_back(id);

  bool all = true;
  try {
    for (int id : ids) {
      const condstable::CriterionResult r = condstable::run_criterion(id, opt);
      std::cout << condstable::format_result(r) << std::flush;
      all = all && r.pass;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return condstable::exit_code_for_current_exception();
  }
  return all ? condstable::kExitOk : condstable::kExitTolerance;
}
