#include "starvol/config.hpp"

#include <fstream>

#include "starvol/version.hpp"

namespace starvol::cli {

namespace {

constexpr const char* kConfigSchema = R"SCHEMA({
  "type": "object",
  "required": ["model"],
  "additionalProperties": false,
  "properties": {
    "model": {
      "type": "object",
      "required": ["kind"],
      "additionalProperties": false,
      "properties": {
        "kind": {"type": "string",
                 "enum": ["flat_torus", "round_sphere2", "projective_plane2"]},
        "dim": {"type": "integer", "minimum": 2},
        "periods": {"type": "array", "minItems": 2, "items": {"type": "number"}}
      }
    },
    "grid": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "base": {"type": "array", "items": {"type": "integer", "minimum": 4}},
        "fiber": {"type": "integer", "minimum": 4},
        "sphere_refine": {"type": "integer", "minimum": 0}
      }
    },
    "seed": {"type": "integer", "minimum": 0},
    "tolerance_scale": {"type": "number"},
    "threads": {"type": "integer", "minimum": 1},
    "bodies": {"type": "object", "items": {"type": "string"}},
    "metric": {
      "type": "object",
      "required": ["kind"],
      "additionalProperties": false,
      "properties": {
        "kind": {"type": "string",
                 "enum": ["euclidean", "quadratic", "conformal", "randers", "custom"]},
        "a": {"type": "number"},
        "b": {"type": "number"},
        "rho": {"type": "string"},
        "drift": {"type": "array", "items": {"type": "number"}},
        "lagrangian": {"type": "string"},
        "reversible": {"type": "boolean"}
      }
    },
    "volume": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "notion": {"type": "string", "enum": ["ht", "busemann", "symplectic"]},
        "body": {"type": "string"}
      }
    },
    "dmv": {
      "type": "object",
      "required": ["bodies"],
      "additionalProperties": false,
      "properties": {
        "bodies": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "w_tilde_k": {"type": "integer", "minimum": 1}
      }
    },
    "legendre": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "points": {"type": "array", "items": {
          "type": "object",
          "required": ["base", "momentum"],
          "additionalProperties": false,
          "properties": {
            "base": {"type": "array", "items": {"type": "number"}},
            "momentum": {"type": "array", "items": {"type": "number"}}
          }
        }},
        "involution_probes": {"type": "integer", "minimum": 0}
      }
    },
    "flow": {
      "type": "object",
      "required": ["initial", "duration"],
      "additionalProperties": false,
      "properties": {
        "hamiltonian": {"type": "string"},
        "initial": {
          "type": "object",
          "required": ["base", "momentum"],
          "additionalProperties": false,
          "properties": {
            "base": {"type": "array", "items": {"type": "number"}},
            "momentum": {"type": "array", "items": {"type": "number"}}
          }
        },
        "duration": {"type": "number", "minimum": 0},
        "dt": {"type": "number"},
        "stride": {"type": "integer", "minimum": 1},
        "csv_out": {"type": "string"}
      }
    },
    "systole": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "class": {"type": "array", "items": {"type": "integer"}},
        "m": {"type": "integer", "minimum": 8},
        "restarts": {"type": "integer", "minimum": 1},
        "zmax": {"type": "integer", "minimum": 1},
        "chain": {"type": "boolean"}
      }
    },
    "normalform": {
      "type": "object",
      "required": ["perturbation"],
      "additionalProperties": false,
      "properties": {
        "perturbation": {"type": "string"},
        "probes": {"type": "integer", "minimum": 1},
        "steps": {"type": "integer", "minimum": 16}
      }
    },
    "check": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "trials": {"type": "integer", "minimum": 1}
      }
    },
    "report": {
      "type": "object",
      "additionalProperties": false,
      "properties": {}
    }
  }
})SCHEMA";

constexpr const char* kReportSchema = R"SCHEMA({
  "type": "object",
  "required": ["command", "config", "results", "timing", "versions"],
  "additionalProperties": false,
  "properties": {
    "command": {"type": "string"},
    "config": {"type": "object"},
    "results": {"type": "object"},
    "timing": {},
    "versions": {
      "type": "object",
      "required": ["starvol"],
      "properties": {"starvol": {"type": "string"}}
    }
  }
})SCHEMA";

std::string type_name(const nlohmann::json& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  return "null";
}

}  // namespace

const char* config_schema_text() { return kConfigSchema; }
const char* report_schema_text() { return kReportSchema; }

void validate_against_schema(const nlohmann::json& schema, const nlohmann::json& value,
                             const std::string& path) {
  const std::string at = path.empty() ? "/" : path;
  if (schema.contains("type")) {
    const std::string want = schema.at("type").get<std::string>();
    const std::string got = type_name(value);
    const bool ok = want == got || (want == "number" && got == "integer");
    if (!ok)
      throw ConfigError("config error at " + at + ": expected " + want + ", got " + got);
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema.at("enum")) found = found || e == value;
    if (!found)
      throw ConfigError("config error at " + at + ": value " + value.dump() +
                        " not in the allowed set " + schema.at("enum").dump());
  }
  if (schema.contains("minimum") && value.is_number()) {
    if (value.get<double>() < schema.at("minimum").get<double>())
      throw ConfigError("config error at " + at + ": value below minimum " +
                        schema.at("minimum").dump());
  }
  if (value.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema.at("required"))
        if (!value.contains(key.get<std::string>()))
          throw ConfigError("config error at " + at + ": missing required key '" +
                            key.get<std::string>() + "'");
    }
    const auto& props =
        schema.contains("properties") ? schema.at("properties") : nlohmann::json::object();
    const bool extra_ok = !schema.contains("additionalProperties") ||
                          schema.at("additionalProperties").get<bool>();
    for (const auto& [key, sub] : value.items()) {
      if (props.contains(key)) {
        validate_against_schema(props.at(key), sub, path + "/" + key);
      } else if (schema.contains("items")) {
        // object-as-map: every value follows the "items" schema
        validate_against_schema(schema.at("items"), sub, path + "/" + key);
      } else if (!extra_ok) {
        throw ConfigError("config error at " + at + ": unknown key '" + key + "'");
      }
    }
  }
  if (value.is_array()) {
    if (schema.contains("minItems") &&
        value.size() < schema.at("minItems").get<std::size_t>())
      throw ConfigError("config error at " + at + ": needs at least " +
                        schema.at("minItems").dump() + " items");
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < value.size(); ++i)
        validate_against_schema(schema.at("items"), value[i], path + "/" + std::to_string(i));
    }
  }
}

RunConfig parse_config(const nlohmann::json& j) {
  static const nlohmann::json schema = nlohmann::json::parse(kConfigSchema);
  validate_against_schema(schema, j);

  RunConfig config;
  config.raw = j;

  const auto& jm = j.at("model");
  const std::string kind = jm.at("kind").get<std::string>();
  if (kind == "flat_torus") {
    const int dim = jm.value("dim", 2);
    std::vector<double> periods = jm.value("periods", std::vector<double>{});
    if (!periods.empty() && static_cast<int>(periods.size()) != dim)
      throw ConfigError("config error at /model/periods: expected " + std::to_string(dim) +
                        " entries");
    config.model = geometry::ManifoldModel::flat_torus(dim, periods);
  } else if (kind == "round_sphere2") {
    config.model = geometry::ManifoldModel::round_sphere2();
  } else {
    config.model = geometry::ManifoldModel::projective_plane2();
  }

  geometry::GridResolution res;
  if (j.contains("grid")) {
    const auto& jg = j.at("grid");
    res.base = jg.value("base", std::vector<int>{});
    res.fiber = jg.value("fiber", 32);
    res.sphere_refine = jg.value("sphere_refine", -1);
  }
  if (config.model.kind == geometry::ManifoldKind::FlatTorus) {
    if (res.base.empty()) res.base.assign(static_cast<std::size_t>(config.model.dim), 16);
    if (static_cast<int>(res.base.size()) != config.model.dim)
      throw ConfigError("config error at /grid/base: expected one count per torus axis");
    res.sphere_refine = -1;
  } else {
    if (res.sphere_refine < 0) res.sphere_refine = 3;
    res.base.clear();
  }
  config.grid = res;
  config.seed = j.value("seed", 1u);
  config.tolerance_scale = j.value("tolerance_scale", 1.0);
  if (!(config.tolerance_scale > 0)) throw ConfigError("tolerance_scale must be positive");
  config.threads = j.value("threads", 1);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

geometry::GridPtr grid_from_config(const RunConfig& config) {
  return geometry::build_grid_ptr(config.model, config.grid);
}

finsler::FinslerMetric metric_from_config(const RunConfig& config) {
  if (!config.raw.contains("metric")) return finsler::euclidean_metric(config.model);
  const auto& jm = config.raw.at("metric");
  const std::string kind = jm.at("kind").get<std::string>();
  if (kind == "euclidean") return finsler::euclidean_metric(config.model);
  if (kind == "quadratic") {
    if (!jm.contains("a") || !jm.contains("b"))
      throw ConfigError("config error at /metric: quadratic needs 'a' and 'b'");
    return finsler::quadratic_metric(config.model, jm.at("a").get<double>(),
                                     jm.at("b").get<double>());
  }
  if (kind == "conformal") {
    if (!jm.contains("rho")) throw ConfigError("config error at /metric: conformal needs 'rho'");
    std::vector<std::string> slots;
    for (int i = 1; i <= config.model.ambient_dim(); ++i)
      slots.push_back("x" + std::to_string(i));
    exprlang::VarSet vars = exprlang::VarSet::of(slots);
    const char* alias[3] = {"x", "y", "z"};
    for (int i = 0; i < std::min(config.model.ambient_dim(), 3); ++i)
      vars.alias(alias[i], "x" + std::to_string(i + 1));
    exprlang::Expr rho = exprlang::parse(jm.at("rho").get<std::string>(), vars);
    return finsler::conformal_metric_expr(config.model, rho);
  }
  if (kind == "randers") {
    if (!jm.contains("drift")) throw ConfigError("config error at /metric: randers needs 'drift'");
    auto b = jm.at("drift").get<std::vector<double>>();
    if (static_cast<int>(b.size()) != config.model.dim)
      throw ConfigError("config error at /metric/drift: wrong dimension");
    return finsler::randers_metric(config.model, Vec::from(b));
  }
  if (!jm.contains("lagrangian"))
    throw ConfigError("config error at /metric: custom needs 'lagrangian'");
  exprlang::Expr lag = exprlang::parse(jm.at("lagrangian").get<std::string>(),
                                       starbody::phase_vars(config.model));
  return finsler::custom_metric(config.model, lag, jm.value("reversible", false));
}

std::map<std::string, starbody::StarHamiltonian> bodies_from_config(const RunConfig& config) {
  std::map<std::string, starbody::StarHamiltonian> out;
  if (!config.raw.contains("bodies")) return out;
  const exprlang::VarSet vars = starbody::phase_vars(config.model);
  for (const auto& [name, text] : config.raw.at("bodies").items()) {
    exprlang::Expr e = exprlang::parse(text.get<std::string>(), vars);
    out.emplace(name, starbody::hamiltonian_from_expr(config.model, e));
  }
  return out;
}

nlohmann::json Report::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config_echo;
  j["results"] = results;
  j["timing"] = seconds ? nlohmann::json(*seconds) : nlohmann::json(nullptr);
  j["versions"] = {{"starvol", kVersion}};
  return j;
}

std::string Report::dump() const { return to_json().dump(2) + "\n"; }

}  // namespace starvol::cli
