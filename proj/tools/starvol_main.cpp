// Command-line front end: dispatches subcommands to the library and writes
// JSON reports (CSV for trajectory exports).

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "starvol/runner.hpp"
#include "starvol/version.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_path;
  std::int64_t seed = -1;
  int threads = 0;
  double tolerance_scale = 0;
  bool timing = false;
  // per-subcommand overrides
  std::string notion;      // volume
  std::string loop_class;  // systole, "1,0"
  int polygon_m = 0;       // systole
  int restarts = 0;        // systole
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "Path to the JSON run configuration")->required();
  cmd->add_option("--out", opt.out_path, "Write the report here instead of stdout");
  cmd->add_option("--seed", opt.seed, "Override the config seed");
  cmd->add_option("--threads", opt.threads, "Worker count for node evaluation");
  cmd->add_option("--tolerance-scale", opt.tolerance_scale,
                  "Multiply suite tolerances by this factor");
  cmd->add_flag("--timing", opt.timing, "Record wall time in the report (breaks byte-identical "
                                        "reports across runs)");
}

std::vector<int> parse_class(const std::string& text) {
  std::vector<int> z;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t used = 0;
    z.push_back(std::stoi(text.substr(pos), &used));
    pos += used;
    if (pos < text.size() && text[pos] == ',') ++pos;
  }
  if (z.empty()) throw starvol::ConfigError("--class needs a comma-separated integer vector");
  return z;
}

int run_command(const std::string& name, const CommonOptions& opt) {
  starvol::cli::RunConfig config = starvol::cli::load_config(opt.config_path);
  if (opt.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(opt.seed);
    config.raw["seed"] = opt.seed;
  }
  if (opt.threads > 0) config.threads = opt.threads;
  if (opt.tolerance_scale > 0) config.tolerance_scale = opt.tolerance_scale;
  starvol::set_worker_threads(config.threads);

  // flag overrides fold into the config the handlers read
  if (!opt.notion.empty()) config.raw["volume"]["notion"] = opt.notion;
  if (!opt.loop_class.empty()) config.raw["systole"]["class"] = parse_class(opt.loop_class);
  if (opt.polygon_m > 0) config.raw["systole"]["m"] = opt.polygon_m;
  if (opt.restarts > 0) config.raw["systole"]["restarts"] = opt.restarts;

  const auto t0 = std::chrono::steady_clock::now();
  starvol::cli::RunOutcome outcome = starvol::cli::run(name, config);
  if (opt.timing)
    outcome.report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const bool out_is_csv = opt.out_path.ends_with(".csv");
  bool out_used_for_csv = false;
  if (outcome.csv) {
    std::string csv_path = outcome.csv_path.value_or(out_is_csv ? opt.out_path : "");
    out_used_for_csv = !csv_path.empty() && csv_path == opt.out_path;
    if (!csv_path.empty()) {
      std::ofstream out(csv_path);
      if (!out) throw starvol::Error("cannot write CSV to '" + csv_path + "'");
      out << *outcome.csv;
    } else if (opt.out_path.empty()) {
      // bare `flow`: the CSV is the output
      std::cout << *outcome.csv;
      return outcome.exit_code;
    }
  }

  const std::string text = outcome.report.dump();
  if (opt.out_path.empty() || out_used_for_csv) {
    std::cout << text;
  } else {
    std::ofstream out(opt.out_path);
    if (!out) throw starvol::Error("cannot write report to '" + opt.out_path + "'");
    out << text;
  }
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-mixed-volume calculus for star bodies in cotangent bundles"};
  app.set_version_flag("--version", starvol::kVersion);
  app.require_subcommand(1);

  const char* commands[] = {"volume", "dmv", "legendre", "flow",
                            "systole", "normalform", "check", "report"};
  const char* blurbs[] = {
      "Volumes: star-body, Holmes-Thompson, or Busemann",
      "Dual mixed volumes and W~_k of named bodies",
      "Legendre duality values and involution checks",
      "Integrate a Reeb flow; export trajectory CSV",
      "Systole estimates and the isosystolic chain",
      "Normal-form decomposition diagnostics",
      "Inequality/identity suite on random bodies",
      "Run the full verification battery",
  };
  std::map<std::string, CommonOptions> opts;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i], blurbs[i]);
    CommonOptions& opt = opts[commands[i]];
    add_common(sub, opt);
    if (std::string(commands[i]) == "volume")
      sub->add_option("--notion", opt.notion, "Volume notion: symplectic, ht, or busemann")
          ->check(CLI::IsMember({"symplectic", "ht", "busemann"}));
    if (std::string(commands[i]) == "systole") {
      sub->add_option("--class", opt.loop_class, "Homotopy class, e.g. \"1,0\" (tori)");
      sub->add_option("--m", opt.polygon_m, "Polygon vertex count");
      sub->add_option("--restarts", opt.restarts, "Random restarts");
    }
  }

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run_command(name, opts[name]);
  } catch (const starvol::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const starvol::SyntaxError& e) {
    std::cerr << "expression error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
