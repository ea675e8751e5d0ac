#pragma once

#include <string>
#include <vector>

// Command-line front end. run() implements the `optomech` tool:
//   simulate  --config <json> --out <dir> [--force]
//   synth     --config <json> --out <dir> [--seed <u64>] [--force]
//   calibrate <dataset_dir> [--config <json>] --out <dir> [--force]
//   selftest  [--mutate <check>]
// Exit codes: 0 success, 1 configuration error, 2 runtime/numerical error,
// 3 calibration-stage failure.
namespace optomech::cli {

int run(int argc, const char* const* argv);

}  // namespace optomech::cli

namespace optomech::selftest {

struct CheckResult {
  std::string name;
  double value = 0.0;      // measured deviation / quantity
  double tolerance = 0.0;  // bound it must satisfy
  bool pass = false;
  std::string note;
};

// Oracle-equivalence and integration-identity checks. `mutate` perturbs
// one named closed-form quantity to demonstrate the checks have teeth;
// empty means no perturbation.
std::vector<CheckResult> run_all(const std::string& mutate = {});

std::vector<std::string> mutation_targets();

}  // namespace optomech::selftest
