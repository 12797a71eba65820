#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace starvol::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string details;
  double seconds = 0;
};

// Runs the full verification battery (model volumes, polynomial identity,
// inequality suites, invariance, Legendre involution, volume comparison,
// averaging identity, conformal chains, the periodic-flow constant, the
// commuting construction, the normal form, and dynamics quality).
std::vector<CriterionResult> run_all(std::uint64_t seed = 1);

// Runs one criterion by id (1-12).
CriterionResult run_criterion(int id, std::uint64_t seed = 1);

}  // namespace starvol::acceptance
