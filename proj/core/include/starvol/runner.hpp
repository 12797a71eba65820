#pragma once

#include <optional>
#include <string>

#include "starvol/config.hpp"
#include "starvol/dualvol.hpp"

namespace starvol::cli {

// One dispatched run. exit_code follows the CLI contract: 0 all verdicts
// hold, 1 some verdict failed. Config errors throw ConfigError (exit 2),
// numerical failures throw (exit 3).
struct RunOutcome {
  Report report;
  int exit_code = 0;
  std::optional<std::string> csv;       // flow trajectory export
  std::optional<std::string> csv_path;  // destination from the config, if any
};

RunOutcome run(const std::string& command, const RunConfig& config);

// Seeded low-degree trigonometric star Hamiltonian on a 2-torus; closed form,
// so bodies re-grid exactly for refinement error estimates.
starbody::StarHamiltonian random_body_hamiltonian(const geometry::ManifoldModel& model,
                                                  std::uint64_t seed, std::uint64_t index);

// The `check` suite: polynomial expansion, main inequality, dual Minkowski,
// dual Brunn-Minkowski, and shear invariance on seeded random bodies.
std::vector<dualvol::InequalityVerdict> run_check_suite(const RunConfig& config, int trials);

}  // namespace starvol::cli
