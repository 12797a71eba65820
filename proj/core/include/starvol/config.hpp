#pragma once

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "starvol/finsler.hpp"
#include "starvol/geometry.hpp"
#include "starvol/starbody.hpp"

namespace starvol::cli {

// Validated run configuration. `raw` keeps the full document for command
// handlers and for the config echo in reports.
struct RunConfig {
  nlohmann::json raw;
  geometry::ManifoldModel model;
  geometry::GridResolution grid;
  std::uint64_t seed = 1;
  double tolerance_scale = 1.0;
  int threads = 1;
};

// Embedded schema texts; docs/ ships identical copies.
const char* config_schema_text();
const char* report_schema_text();

// Validates `value` against a schema written in the supported subset (type,
// required, properties, additionalProperties, items, enum, minimum,
// minItems). Throws ConfigError with a JSON-pointer path on failure.
void validate_against_schema(const nlohmann::json& schema, const nlohmann::json& value,
                             const std::string& path = "");

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// Builders for the configured objects.
finsler::FinslerMetric metric_from_config(const RunConfig& config);
std::map<std::string, starbody::StarHamiltonian> bodies_from_config(const RunConfig& config);
geometry::GridPtr grid_from_config(const RunConfig& config);

struct Report {
  std::string command;
  nlohmann::json config_echo;
  nlohmann::json results;
  std::optional<double> seconds;  // populated only when timing was requested

  nlohmann::json to_json() const;
  std::string dump() const;  // stable two-space indentation
};

}  // namespace starvol::cli
