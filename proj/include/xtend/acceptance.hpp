#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace xtend {

enum class Suite { Core, MonteCarlo, All };

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  std::string csv;  // numeric rows behind the verdict (Monte Carlo criteria)
};

/// Criteria 1-7 form the core suite, 8-14 the Monte Carlo suite. Monte Carlo
/// criteria 9-12 are marked failed without running when the clock calibration
/// (criterion 8) fails.
std::vector<CriterionResult> run_acceptance(Suite suite, std::uint64_t seed = 20240601,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

std::string format_result(const CriterionResult& r);

}  // namespace xtend
