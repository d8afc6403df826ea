#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <string>

#include "quasistab/acceptance.hpp"
#include "quasistab/io.hpp"

// Runs every acceptance criterion, prints one verdict line per criterion and
// exits 0 when all pass, 2 when any fails, 1 on an unexpected error.
// Usage: acceptance [--seed N] [--out DIR]
int main(int argc, char** argv) {
  std::uint64_t seed = 0;
  std::string out_dir;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--seed") == 0 && i + 1 < argc) {
      seed = std::strtoull(argv[++i], nullptr, 10);
    } else if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc) {
      out_dir = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--seed N] [--out DIR]\n");
      return 1;
    }
  }

  try {
    const quasistab::AcceptanceOutcome outcome =
        quasistab::run_acceptance(seed);
    for (const auto& r : outcome.results) {
      const char* verdict = r.ok() ? "PASS" : "FAIL";
      std::printf("[%2d] %s %-28s (%7.2f s / %g s budget)  %s\n", r.number,
                  verdict, r.name.c_str(), r.seconds, r.budget,
                  r.detail.c_str());
      if (r.passed && !r.ok())
        std::printf("     criterion content passed but ran over budget\n");
    }
    std::printf("acceptance: %s, total %.2f s\n",
                outcome.all_passed ? "all criteria passed" : "FAILURES above",
                outcome.total_seconds);
    if (!out_dir.empty())
      quasistab::write_text_atomic(
          std::filesystem::path(out_dir) / "report.json",
          quasistab::acceptance_to_json(outcome));
    return outcome.all_passed ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance: unexpected error: %s\n", e.what());
    return 1;
  }
}
