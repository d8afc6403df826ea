#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace quasistab {

/// Outcome of one acceptance criterion. `passed` is the content verdict and
/// is reproducible run to run; `seconds` is wall time and is reported next to
/// the pinned `budget` but kept out of every serialization.
struct CriterionResult {
  int number = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;

  bool ok() const { return passed && seconds <= budget; }
};

struct AcceptanceOutcome {
  std::vector<CriterionResult> results;
  bool all_passed = false;
  double total_seconds = 0.0;
};

/// Canonical JSON for the outcome: number, name, passed and detail per
/// criterion, sorted keys, shortest round-trip numbers, no timings. Two runs
/// with the same seed must produce identical bytes.
std::string acceptance_to_json(const AcceptanceOutcome& outcome);

/// Run the full acceptance suite. Criteria 1 through 10 execute twice; the
/// eleventh compares the serialized outcomes of the two passes byte for byte.
AcceptanceOutcome run_acceptance(std::uint64_t seed = 0);

}  // namespace quasistab
