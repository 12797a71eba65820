#include "starvol/runner.hpp"

#include <cmath>
#include <sstream>

#include "starvol/acceptance.hpp"
#include "starvol/dynamics.hpp"
#include "starvol/systole.hpp"

namespace starvol::cli {

using dualvol::InequalityVerdict;
using geometry::CotangentPoint;
using geometry::GridPtr;
using geometry::ManifoldKind;
using geometry::ManifoldModel;
using starbody::StarBody;
using starbody::StarHamiltonian;

starbody::StarHamiltonian random_body_hamiltonian(const ManifoldModel& model, std::uint64_t seed,
                                                  std::uint64_t index) {
  if (model.kind != ManifoldKind::FlatTorus || model.dim != 2)
    throw UnsupportedError("random bodies are generated on 2-tori");
  auto rng = make_rng(seed, 0xb0d1e5 + index);
  std::uniform_int_distribution<int> pick_terms(2, 3);
  std::uniform_int_distribution<int> pick_freq(-2, 2);
  std::uniform_int_distribution<int> pick_fiber(0, 2);
  std::uniform_real_distribution<double> amp(0.05, 0.2);
  std::uniform_real_distribution<double> phase(0, 2 * kPi);
  std::uniform_int_distribution<int> sign(0, 1);

  struct Term {
    double a;
    int k1, k2, m;
    double phi;
  };
  const int terms = pick_terms(rng);
  std::vector<Term> ts;
  double total = 0;
  for (int j = 0; j < terms; ++j) {
    Term t;
    t.a = amp(rng) * (sign(rng) ? 1.0 : -1.0);
    t.k1 = pick_freq(rng);
    t.k2 = pick_freq(rng);
    t.m = pick_fiber(rng);
    t.phi = phase(rng);
    total += std::fabs(t.a);
    ts.push_back(t);
  }
  if (total > 0.45) {
    const double s = 0.45 / total;
    for (Term& t : ts) t.a *= s;
  }
  const double p1 = model.periods[0], p2 = model.periods[1];

  StarHamiltonian h;
  h.evaluator = [ts, p1, p2](const CotangentPoint& z) {
    const double r = norm(z.momentum);
    const double theta = std::atan2(z.momentum[1], z.momentum[0]);
    double g = 1.0;
    for (const auto& t : ts)
      g += t.a * std::cos(2 * kPi * (t.k1 * z.base[0] / p1 + t.k2 * z.base[1] / p2) +
                          t.m * theta + t.phi);
    return r * g;
  };
  h.smooth = true;
  h.reversible = false;
  h.description = "random_body(seed=" + std::to_string(seed) + ",i=" + std::to_string(index) + ")";
  return h;
}

std::vector<InequalityVerdict> run_check_suite(const RunConfig& config, int trials) {
  if (config.model.kind != ManifoldKind::FlatTorus || config.model.dim != 2)
    throw ConfigError("the check suite runs on a 2-torus model");
  GridPtr grid = grid_from_config(config);
  std::vector<InequalityVerdict> verdicts;

  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t a_idx = 2 * static_cast<std::uint64_t>(trial);
    StarHamiltonian ha = random_body_hamiltonian(config.model, config.seed, a_idx);
    StarHamiltonian hb = random_body_hamiltonian(config.model, config.seed, a_idx + 1);
    StarBody a = starbody::body_from_hamiltonian(ha, grid);
    StarBody b = starbody::body_from_hamiltonian(hb, grid);

    // refinement-estimated relative quadrature error of the pair
    const StarBody pair_arr[2] = {a, b};
    const std::string names[2] = {"A", "B"};
    dualvol::DmvReport rep = dualvol::dmv_report({pair_arr, 2}, {names, 2});
    const double rel_err = rep.estimated_error / std::fabs(rep.value);
    const double tol = std::max(3.0 * rel_err, 1e-12) * config.tolerance_scale;

    auto rng = make_rng(config.seed, 0xc43c + static_cast<std::uint64_t>(trial));
    std::uniform_real_distribution<double> coeff(0.5, 1.5);
    const double lambda = coeff(rng), mu = coeff(rng);

    verdicts.push_back(dualvol::check_polynomial_expansion(a, b, lambda, mu));
    verdicts.push_back(dualvol::check_main_inequality({pair_arr, 2}, tol));
    auto mink = dualvol::check_dual_minkowski(a, b, tol);
    verdicts.push_back(mink[0]);
    verdicts.push_back(mink[1]);
    verdicts.push_back(dualvol::check_dual_bm(a, b, tol));
  }

  // shear invariance on one fresh pair
  StarHamiltonian hams[2] = {
      random_body_hamiltonian(config.model, config.seed, 1000),
      random_body_hamiltonian(config.model, config.seed, 1001),
  };
  geometry::BaseDiffeo shear = geometry::BaseDiffeo::torus_shear(0.1, config.model.periods[1]);
  verdicts.push_back(dualvol::check_invariance({hams, 2}, shear, grid));
  return verdicts;
}

namespace {

Vec vec_from_json(const nlohmann::json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Vec::from(v);
}

nlohmann::json vec_to_json(const Vec& v) {
  return nlohmann::json(std::vector<double>(v.span().begin(), v.span().end()));
}

StarHamiltonian named_body(const RunConfig& config, const std::string& name) {
  auto bodies = bodies_from_config(config);
  auto it = bodies.find(name);
  if (it == bodies.end()) throw ConfigError("config error at /bodies: no body named '" + name + "'");
  return it->second;
}

nlohmann::json estimate_json(const systole::SystoleEstimate& est) {
  nlohmann::json j;
  j["length"] = est.length;
  j["class"] = est.cls.z;
  j["converged"] = est.converged;
  j["lower_bound"] = est.lower_bound;
  nlohmann::json poly = nlohmann::json::array();
  for (const Vec& v : est.polygon) poly.push_back(vec_to_json(v));
  j["polygon"] = std::move(poly);
  return j;
}

RunOutcome run_volume(const RunConfig& config) {
  RunOutcome out;
  const auto& jv = config.raw.contains("volume") ? config.raw.at("volume")
                                                 : nlohmann::json::object();
  const std::string notion = jv.value("notion", "symplectic");
  nlohmann::json results;
  if (notion == "symplectic") {
    GridPtr grid = grid_from_config(config);
    StarBody body = jv.contains("body")
                        ? starbody::body_from_hamiltonian(named_body(config, jv.at("body")), grid)
                        : starbody::model_body(grid);
    const double value = dualvol::volume(body);
    GridPtr fine = geometry::build_grid_ptr(config.model, config.grid.refined());
    const double fine_value = dualvol::volume(body.regrid(fine));
    results["value"] = value;
    results["estimated_error"] = std::fabs(fine_value - value);
  } else if (notion == "ht") {
    const double value = finsler::holmes_thompson_volume(metric_from_config(config),
                                                         grid_from_config(config));
    GridPtr fine = geometry::build_grid_ptr(config.model, config.grid.refined());
    results["value"] = value;
    results["estimated_error"] =
        std::fabs(finsler::holmes_thompson_volume(metric_from_config(config), fine) - value);
  } else {
    geometry::BaseGrid base = geometry::build_base_grid(config.model, config.grid);
    geometry::BaseGrid fine = geometry::build_base_grid(config.model, config.grid.refined());
    const double value = finsler::busemann_volume(metric_from_config(config), base);
    results["value"] = value;
    results["estimated_error"] =
        std::fabs(finsler::busemann_volume(metric_from_config(config), fine) - value);
  }
  results["notion"] = notion;
  out.report.results = results;
  return out;
}

RunOutcome run_dmv(const RunConfig& config) {
  RunOutcome out;
  const auto& jd = config.raw.at("dmv");
  GridPtr grid = grid_from_config(config);
  auto names = jd.at("bodies").get<std::vector<std::string>>();
  std::vector<StarBody> bodies;
  for (const auto& name : names)
    bodies.push_back(starbody::body_from_hamiltonian(named_body(config, name), grid));
  nlohmann::json results;
  if (jd.contains("w_tilde_k")) {
    if (bodies.size() != 1) throw ConfigError("w_tilde_k needs exactly one body");
    results["w_tilde_k"] = dualvol::w_tilde_k(bodies[0], jd.at("w_tilde_k").get<int>());
    results["k"] = jd.at("w_tilde_k").get<int>();
  } else {
    dualvol::DmvReport rep = dualvol::dmv_report(bodies, names);
    results["value"] = rep.value;
    results["estimated_error"] = rep.estimated_error;
    results["bodies"] = rep.bodies;
    results["resolution"] = rep.resolution.str();
  }
  out.report.results = results;
  return out;
}

RunOutcome run_legendre(const RunConfig& config) {
  RunOutcome out;
  finsler::FinslerMetric metric = metric_from_config(config);
  const auto& jl = config.raw.contains("legendre") ? config.raw.at("legendre")
                                                   : nlohmann::json::object();
  nlohmann::json results;
  nlohmann::json values = nlohmann::json::array();
  if (jl.contains("points")) {
    for (const auto& jp : jl.at("points")) {
      const Vec x = vec_from_json(jp.at("base"));
      const Vec p = vec_from_json(jp.at("momentum"));
      finsler::LegendreResult r = finsler::legendre_dual(metric, x, p);
      values.push_back({{"value", r.value}, {"converged", r.converged},
                        {"iterations", r.iterations}});
    }
  }
  results["dual_values"] = std::move(values);

  const int probes = jl.value("involution_probes", 0);
  if (probes > 0) {
    finsler::OpticalHamiltonian dual = finsler::dual_hamiltonian(metric);
    finsler::FinslerMetric back =
        finsler::metric_from_hamiltonian(config.model, dual.ham, "double dual");
    auto rng = make_rng(config.seed, 0x1e6);
    std::normal_distribution<double> gauss(0, 1);
    std::uniform_real_distribution<double> unif(0, 1);
    double worst = 0;
    for (int i = 0; i < probes; ++i) {
      Vec x, v;
      if (config.model.sphere_based()) {
        x = normalized(Vec{gauss(rng), gauss(rng), gauss(rng)});
        Vec raw{gauss(rng), gauss(rng), gauss(rng)};
        v = raw - dot(raw, x) * x;
      } else {
        x = Vec::zero(static_cast<std::size_t>(config.model.dim));
        v = x;
        for (int c = 0; c < config.model.dim; ++c) {
          x[static_cast<std::size_t>(c)] = config.model.periods[static_cast<std::size_t>(c)] *
                                           unif(rng);
          v[static_cast<std::size_t>(c)] = gauss(rng);
        }
      }
      if (norm(v) < 1e-6) continue;
      const double direct = metric(x, v);
      const double doubled = back(x, v);
      worst = std::max(worst, std::fabs(direct - doubled));
    }
    results["involution_defect"] = worst;
  }
  out.report.results = results;
  return out;
}

RunOutcome run_flow(const RunConfig& config) {
  RunOutcome out;
  const auto& jf = config.raw.at("flow");
  // "hamiltonian" is a named body when the name exists, otherwise an inline
  // expression; absent means the model norm
  StarHamiltonian ham = starbody::model_norm_hamiltonian(config.model);
  if (jf.contains("hamiltonian")) {
    const std::string text = jf.at("hamiltonian").get<std::string>();
    auto bodies = bodies_from_config(config);
    auto it = bodies.find(text);
    if (it != bodies.end()) {
      ham = it->second;
    } else {
      exprlang::Expr e = exprlang::parse(text, starbody::phase_vars(config.model));
      ham = starbody::hamiltonian_from_expr(config.model, e);
    }
  }
  dynamics::HamiltonianField field = dynamics::make_field(config.model, ham);
  CotangentPoint z0{vec_from_json(jf.at("initial").at("base")),
                    vec_from_json(jf.at("initial").at("momentum"))};
  const double level = field(z0);
  if (std::fabs(level - 1.0) > 1e-9)
    throw ConfigError("flow initial point must satisfy H = 1 within 1e-9 (H = " +
                      std::to_string(level) + ")");
  const double T = jf.at("duration").get<double>();
  const double dt = jf.value("dt", 1e-3);
  const int stride = jf.value("stride", 1);
  dynamics::Trajectory traj = dynamics::integrate_flow(field, z0, T, dt, stride);

  // CSV export: t, base..., momentum..., H, running action
  std::ostringstream csv;
  const int d = config.model.ambient_dim();
  csv << "t";
  for (int i = 1; i <= d; ++i) csv << ",x" << i;
  for (int i = 1; i <= d; ++i) csv << ",p" << i;
  csv << ",H,action\n";
  double running = 0;
  double prev_integrand = 0, prev_t = 0;
  csv.precision(17);
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const CotangentPoint& z = traj.samples[k];
    Vec xdot, pdot;
    dynamics::hamiltonian_vector_field(field, z, xdot, pdot);
    const double integrand = dot(z.momentum, xdot);
    if (k > 0) running += 0.5 * (integrand + prev_integrand) * (traj.times[k] - prev_t);
    prev_integrand = integrand;
    prev_t = traj.times[k];
    csv << traj.times[k];
    for (int i = 0; i < d; ++i) csv << ',' << z.base[static_cast<std::size_t>(i)];
    for (int i = 0; i < d; ++i) csv << ',' << z.momentum[static_cast<std::size_t>(i)];
    csv << ',' << field(z) << ',' << running << "\n";
  }
  out.csv = csv.str();
  if (jf.contains("csv_out")) out.csv_path = jf.at("csv_out").get<std::string>();

  nlohmann::json results;
  results["action"] = traj.action;
  results["duration"] = T;
  results["h_drift"] = traj.h_drift;
  results["samples"] = traj.samples.size();
  results["endpoint"] = {{"base", vec_to_json(traj.back().base)},
                         {"momentum", vec_to_json(traj.back().momentum)}};
  out.report.results = results;
  return out;
}

RunOutcome run_systole(const RunConfig& config) {
  RunOutcome out;
  const auto& js = config.raw.contains("systole") ? config.raw.at("systole")
                                                  : nlohmann::json::object();
  finsler::FinslerMetric metric = metric_from_config(config);
  const int m = js.value("m", 256);
  const int restarts = js.value("restarts", 8);
  nlohmann::json results;
  if (js.value("chain", false)) {
    systole::ReportOptions opt;
    opt.m = m;
    opt.restarts = restarts;
    opt.seed = config.seed;
    opt.zmax = js.value("zmax", 3);
    systole::IsosystolicReport rep = systole::isosystolic_report(metric, grid_from_config(config),
                                                                 opt);
    results["sys_ratio"] = rep.sys_ratio;
    results["w_tilde"] = rep.w_tilde;
    results["vol_ratio_root"] = rep.vol_ratio_root;
    results["chain_holds"] = rep.chain_holds;
    results["verdicts"] = {dualvol::verdict_to_json(rep.chain_lower),
                           dualvol::verdict_to_json(rep.chain_upper)};
    if (rep.pu_ratio) results["pu_ratio"] = *rep.pu_ratio;
    results["estimate"] = estimate_json(rep.estimate);
    out.exit_code = rep.chain_holds ? 0 : 1;
  } else if (config.model.sphere_based()) {
    results["estimate"] = estimate_json(systole::systole_rp2(metric, m, restarts, config.seed));
  } else if (js.contains("class")) {
    systole::LoopClass cls{js.at("class").get<std::vector<int>>()};
    results["estimate"] =
        estimate_json(systole::systole_torus(metric, cls, m, restarts, config.seed));
  } else {
    results["estimate"] = estimate_json(
        systole::systole_torus_all(metric, m, restarts, config.seed, js.value("zmax", 3)));
  }
  out.report.results = results;
  return out;
}

RunOutcome run_normalform(const RunConfig& config) {
  RunOutcome out;
  const auto& jn = config.raw.at("normalform");
  if (!config.model.sphere_based())
    throw ConfigError("normalform needs a sphere-based model (periodic model flow)");
  dynamics::PeriodicFlow flow = dynamics::model_geodesic_flow(config.model);

  exprlang::Expr expr = exprlang::parse(jn.at("perturbation").get<std::string>(),
                                        starbody::phase_vars(config.model));
  StarHamiltonian raw = starbody::hamiltonian_from_expr(config.model, expr);
  dynamics::ScalarField h1{dynamics::ambient_extension_deg1(raw.evaluator)};

  const int nprobes = jn.value("probes", 64);
  auto rng = make_rng(config.seed, 0x9f);
  std::normal_distribution<double> gauss(0, 1);
  std::vector<CotangentPoint> probes;
  for (int i = 0; i < nprobes; ++i) {
    Vec x = normalized(Vec{gauss(rng), gauss(rng), gauss(rng)});
    Vec raw_p{gauss(rng), gauss(rng), gauss(rng)};
    Vec p = raw_p - dot(raw_p, x) * x;
    if (norm(p) < 1e-8) {
      --i;
      continue;
    }
    probes.push_back({x, normalized(p)});
  }
  dynamics::NormalFormOptions opt;
  opt.steps = jn.value("steps", 800);
  dynamics::NormalFormPair pair = dynamics::normal_form_decompose(flow, h1, probes, opt);
  nlohmann::json results;
  results["residual"] = pair.residual;
  results["max_h0e_bracket"] = pair.max_h0e_bracket;
  results["homogeneity_defect"] = pair.homogeneity_defect;
  results["probes"] = nprobes;
  out.report.results = results;
  return out;
}

RunOutcome run_check(const RunConfig& config) {
  RunOutcome out;
  const int trials = config.raw.contains("check")
                         ? config.raw.at("check").value("trials", 5)
                         : 5;
  auto verdicts = run_check_suite(config, trials);
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& v : verdicts) {
    all = all && v.holds;
    arr.push_back(dualvol::verdict_to_json(v));
  }
  out.report.results["verdicts"] = std::move(arr);
  out.report.results["all_hold"] = all;
  out.exit_code = all ? 0 : 1;
  return out;
}

RunOutcome run_report(const RunConfig& config) {
  RunOutcome out;
  auto results = acceptance::run_all(config.seed);
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    arr.push_back({{"id", r.id},
                   {"name", r.name},
                   {"passed", r.passed},
                   {"details", r.details}});
  }
  out.report.results["criteria"] = std::move(arr);
  out.report.results["all_passed"] = all;
  out.exit_code = all ? 0 : 1;
  return out;
}

}  // namespace

RunOutcome run(const std::string& command, const RunConfig& config) {
  RunOutcome out;
  if (command == "volume")
    out = run_volume(config);
  else if (command == "dmv")
    out = run_dmv(config);
  else if (command == "legendre")
    out = run_legendre(config);
  else if (command == "flow")
    out = run_flow(config);
  else if (command == "systole")
    out = run_systole(config);
  else if (command == "normalform")
    out = run_normalform(config);
  else if (command == "check")
    out = run_check(config);
  else if (command == "report")
    out = run_report(config);
  else
    throw ConfigError("unknown command '" + command + "'");
  out.report.command = command;
  out.report.config_echo = config.raw;
  return out;
}

}  // namespace starvol::cli
