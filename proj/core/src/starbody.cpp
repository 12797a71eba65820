#include "starvol/starbody.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace starvol::starbody {

StarHamiltonian model_norm_hamiltonian(const ManifoldModel& model) {
  StarHamiltonian h;
  h.evaluator = [model](const CotangentPoint& z) {
    return model.momentum_norm(z.base, z.momentum);
  };
  h.smooth = true;
  h.reversible = true;
  h.description = "model norm";
  return h;
}

exprlang::VarSet phase_vars(const ManifoldModel& model) {
  const int d = model.ambient_dim();
  std::vector<std::string> slots;
  for (int i = 1; i <= d; ++i) slots.push_back("x" + std::to_string(i));
  for (int i = 1; i <= d; ++i) slots.push_back("p" + std::to_string(i));
  exprlang::VarSet vars = exprlang::VarSet::of(std::move(slots));
  const char* alias[3] = {"x", "y", "z"};
  for (int i = 0; i < std::min(d, 3); ++i) vars.alias(alias[i], "x" + std::to_string(i + 1));
  return vars;
}

StarHamiltonian hamiltonian_from_expr(const ManifoldModel& model, const exprlang::Expr& e,
                                      bool smooth, bool reversible) {
  const std::size_t d = static_cast<std::size_t>(model.ambient_dim());
  StarHamiltonian h;
  h.evaluator = [e, d](const CotangentPoint& z) {
    double vals[2 * kMaxDim];
    for (std::size_t i = 0; i < d; ++i) {
      vals[i] = z.base[i];
      vals[d + i] = z.momentum[i];
    }
    return e.eval({vals, 2 * d});
  };
  h.smooth = smooth;
  h.reversible = reversible;
  h.description = e.source();
  return h;
}

void audit_homogeneity(const StarHamiltonian& h, const CosphereGrid& grid, std::uint64_t seed,
                       int probes, double tol) {
  auto rng = make_rng(seed, 0x686f6d);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  const double scales[2] = {0.5, 2.0};
  for (int i = 0; i < probes; ++i) {
    CotangentPoint z = grid.node(pick(rng));
    const double base = h(z);
    const double t = scales[i % 2];
    const double scaled = h(geometry::fiber_scale(t, z));
    if (!(std::fabs(scaled - t * base) <= tol * std::fabs(t * base)))
      throw InvariantError("Hamiltonian failed the degree-1 homogeneity audit: H(" +
                           std::to_string(t) + " p) = " + std::to_string(scaled) + " vs " +
                           std::to_string(t * base));
  }
}

StarBody::StarBody(GridPtr grid, std::vector<double> rho, std::optional<StarHamiltonian> form)
    : grid_(std::move(grid)), rho_(std::move(rho)), form_(std::move(form)) {
  if (!grid_) throw Error("StarBody requires a grid");
  if (rho_.size() != grid_->size()) throw GridMismatch("radial samples do not match the grid");
  for (double r : rho_)
    if (!(r > 0) || !std::isfinite(r))
      throw InvariantError("radial function must be strictly positive and finite");
}

StarBody StarBody::regrid(GridPtr grid) const {
  if (!form_) throw Error("body has no closed form; cannot re-grid");
  return body_from_hamiltonian(*form_, std::move(grid), /*audit=*/false);
}

StarBody body_from_hamiltonian(const StarHamiltonian& h, GridPtr grid, bool audit) {
  if (audit) audit_homogeneity(h, *grid);
  std::vector<double> rho(grid->size());
  std::atomic<bool> bad{false};
  parallel_for(grid->size(), [&](std::size_t i) {
    const double v = h(grid->node(i));
    if (!(v > 0) || !std::isfinite(v)) {
      bad.store(true);
      rho[i] = 1.0;
      return;
    }
    rho[i] = 1.0 / v;
  });
  if (bad.load())
    throw InvariantError("Hamiltonian is nonpositive or non-finite at a grid node");
  return StarBody(std::move(grid), std::move(rho), h);
}

StarBody model_body(GridPtr grid) {
  StarHamiltonian h = model_norm_hamiltonian(grid->model());
  return body_from_hamiltonian(h, std::move(grid), /*audit=*/false);
}

namespace {

void require_same_grid(const StarBody& a, const StarBody& b) {
  if (a.grid() != b.grid())
    throw GridMismatch("star bodies must share the same grid for radial algebra");
}

// Composite closed forms keep bodies re-griddable through the algebra.
std::optional<StarHamiltonian> combine_forms(const StarBody& a, const StarBody& b,
                                             double (*op)(double, double),
                                             const std::string& what) {
  if (!a.form() || !b.form()) return std::nullopt;
  StarHamiltonian ha = *a.form(), hb = *b.form();
  StarHamiltonian h;
  h.evaluator = [ha, hb, op](const CotangentPoint& z) {
    return op(ha(z), hb(z));
  };
  h.smooth = ha.smooth && hb.smooth;
  h.reversible = ha.reversible && hb.reversible;
  h.description = what + "(" + ha.description + ", " + hb.description + ")";
  return h;
}

}  // namespace

StarBody radial_sum(const StarBody& a, const StarBody& b) {
  require_same_grid(a, b);
  std::vector<double> rho(a.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = a.rho(i) + b.rho(i);
  // rho = 1/Ha + 1/Hb corresponds to the harmonic combination of Hamiltonians
  auto form = combine_forms(
      a, b, +[](double x, double y) { return x * y / (x + y); }, "radial_sum");
  return StarBody(a.grid(), std::move(rho), std::move(form));
}

StarBody dilate(const StarBody& a, double lambda) {
  if (!(lambda > 0)) throw Error("dilation factor must be positive");
  std::vector<double> rho(a.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = lambda * a.rho(i);
  std::optional<StarHamiltonian> form;
  if (a.form()) {
    StarHamiltonian h = *a.form();
    StarHamiltonian scaled;
    scaled.evaluator = [h, lambda](const CotangentPoint& z) { return h(z) / lambda; };
    scaled.smooth = h.smooth;
    scaled.reversible = h.reversible;
    scaled.description = "dilate(" + h.description + ", " + std::to_string(lambda) + ")";
    form = scaled;
  }
  return StarBody(a.grid(), std::move(rho), std::move(form));
}

StarBody union_body(const StarBody& a, const StarBody& b) {
  require_same_grid(a, b);
  std::vector<double> rho(a.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::max(a.rho(i), b.rho(i));
  auto form = combine_forms(
      a, b, +[](double x, double y) { return std::min(x, y); }, "union");
  if (form) form->smooth = false;  // max of radial functions has corners
  return StarBody(a.grid(), std::move(rho), std::move(form));
}

StarBody intersection_body(const StarBody& a, const StarBody& b) {
  require_same_grid(a, b);
  std::vector<double> rho(a.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::min(a.rho(i), b.rho(i));
  auto form = combine_forms(
      a, b, +[](double x, double y) { return std::max(x, y); }, "intersection");
  if (form) form->smooth = false;
  return StarBody(a.grid(), std::move(rho), std::move(form));
}

double radial_distance(const StarBody& a, const StarBody& b) {
  require_same_grid(a, b);
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a.rho(i) - b.rho(i)));
  return d;
}

nlohmann::json body_to_json(const StarBody& body) {
  nlohmann::json j;
  j["grid"]["checksum"] = body.grid()->total_weight();
  j["grid"]["nodes"] = body.grid()->size();
  j["grid"]["resolution"] = body.grid()->resolution().str();
  j["rho"] = std::vector<double>(body.rho().begin(), body.rho().end());
  if (body.form()) j["hamiltonian"] = body.form()->description;
  return j;
}

StarBody body_from_json(const nlohmann::json& j, GridPtr grid) {
  const double checksum = j.at("grid").at("checksum").get<double>();
  const auto nodes = j.at("grid").at("nodes").get<std::size_t>();
  if (nodes != grid->size() ||
      std::fabs(grid->total_weight() - checksum) > 1e-9 * std::fabs(checksum))
    throw ConfigError("body belongs to a different grid");
  auto rho = j.at("rho").get<std::vector<double>>();
  return StarBody(std::move(grid), std::move(rho));
}

}  // namespace starvol::starbody
