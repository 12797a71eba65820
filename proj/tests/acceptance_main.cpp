// Acceptance battery runner: one pass/fail line per criterion, nonzero exit
// if anything fails. An optional integer argument runs a single criterion;
// --seed N changes the suite seed.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "starvol/acceptance.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 1;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--seed") == 0 && i + 1 < argc) {
      seed = std::strtoull(argv[++i], nullptr, 10);
    } else {
      only = std::atoi(argv[i]);
    }
  }

  std::vector<starvol::acceptance::CriterionResult> results;
  if (only > 0) {
    results.push_back(starvol::acceptance::run_criterion(only, seed));
  } else {
    results = starvol::acceptance::run_all(seed);
  }

  bool all = true;
  double total = 0;
  for (const auto& r : results) {
    all = all && r.passed;
    total += r.seconds;
    std::printf("%s  criterion %2d  %-24s  (%6.1fs)  %s\n", r.passed ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.seconds, r.details.c_str());
  }
  std::printf("%s  %zu criteria in %.1fs\n", all ? "PASS" : "FAIL", results.size(), total);
  return all ? 0 : 1;
}
