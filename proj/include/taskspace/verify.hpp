// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace taskspace {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Fast self-checks of the numeric core and the store: gradients against
/// finite differences, Fisher diagonal against a per-example loop, frozen
/// backbone under prefix tuning, bit-identical embedding files, fingerprint
/// guards and the NDCG hand value. Scratch files go under `scratch`.
std::vector<CheckResult> run_invariant_suite(const std::filesystem::path& scratch);

}  // namespace taskspace
