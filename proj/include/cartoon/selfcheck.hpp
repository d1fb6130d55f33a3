#pragma once

// Quick property checks run by `cartoon check`: Soft-AdaIN reductions and
// statistics, a finite-difference gradient probe, loss arithmetic and the
// shape ladder through the full-size model.

#include <string>
#include <vector>

namespace cr {

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

std::vector<CheckResult> run_property_checks();

}  // namespace cr
