#include "starvol/dualvol.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace starvol::dualvol {

using geometry::CosphereGrid;
using geometry::CotangentPoint;
using geometry::ManifoldModel;

namespace {

int body_dim(const StarBody& a) { return a.grid()->model().dim; }

void require_shared_grid(std::span<const StarBody> bodies) {
  for (std::size_t i = 1; i < bodies.size(); ++i)
    if (bodies[i].grid() != bodies[0].grid())
      throw GridMismatch("bodies must share one grid");
}

double reduce_product(const CosphereGrid& grid, std::span<const StarBody> bodies,
                      std::span<const int> powers) {
  return chunked_sum(grid.size(), [&](std::size_t i) {
    double t = grid.weight(i);
    for (std::size_t k = 0; k < bodies.size(); ++k) {
      const int pw = powers[k];
      const double r = bodies[k].rho(i);
      if (pw == 1)
        t *= r;
      else if (pw > 1)
        t *= std::pow(r, pw);
    }
    return t;
  });
}

double binomial(int n, int k) {
  double c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace

double volume(const StarBody& a) {
  const int n = body_dim(a);
  const int powers[1] = {n};
  const StarBody bodies[1] = {a};
  return reduce_product(*a.grid(), {bodies, 1}, {powers, 1});
}

double dual_mixed_volume(std::span<const StarBody> bodies) {
  if (bodies.empty()) throw Error("dual mixed volume of an empty list");
  require_shared_grid(bodies);
  const int n = body_dim(bodies[0]);
  if (static_cast<int>(bodies.size()) != n)
    throw Error("dual mixed volume needs dim(M) = " + std::to_string(n) + " bodies, got " +
                std::to_string(bodies.size()));
  std::vector<int> powers(bodies.size(), 1);
  return reduce_product(*bodies[0].grid(), bodies, powers);
}

double dmv_k(const StarBody& a, const StarBody& b, int k) {
  if (a.grid() != b.grid()) throw GridMismatch("bodies must share one grid");
  const int n = body_dim(a);
  if (k < 0 || k > n) throw Error("dmv_k index out of range");
  const int powers[2] = {n - k, k};
  const StarBody bodies[2] = {a, b};
  return reduce_product(*a.grid(), {bodies, 2}, {powers, 2});
}

double w_tilde_k(const StarBody& a, int k) {
  const int n = body_dim(a);
  if (k < 1 || k > n - 1) throw Error("w_tilde_k requires 1 <= k <= n-1");
  const int powers[1] = {n - k};
  const StarBody bodies[1] = {a};
  return reduce_product(*a.grid(), {bodies, 1}, {powers, 1}) / a.grid()->total_weight();
}

DmvReport dmv_report(std::span<const StarBody> bodies, std::span<const std::string> names) {
  DmvReport rep;
  rep.value = dual_mixed_volume(bodies);
  rep.bodies.assign(names.begin(), names.end());
  rep.resolution = bodies[0].grid()->resolution();

  GridPtr fine = geometry::build_grid_ptr(bodies[0].grid()->model(), rep.resolution.refined());
  std::vector<StarBody> refined;
  refined.reserve(bodies.size());
  for (const StarBody& b : bodies) refined.push_back(b.regrid(fine));
  rep.estimated_error = std::fabs(dual_mixed_volume(refined) - rep.value);
  return rep;
}

InequalityVerdict make_verdict(std::string name, VerdictKind kind, double lhs, double rhs,
                               double tol, bool equality_case) {
  InequalityVerdict v;
  v.name = std::move(name);
  v.kind = kind;
  v.lhs = lhs;
  v.rhs = rhs;
  v.slack = rhs - lhs;
  v.tol = tol;
  const double scale = std::max(std::fabs(lhs), std::fabs(rhs));
  if (kind == VerdictKind::Inequality)
    v.holds = v.slack >= -tol * scale;
  else
    v.holds = std::fabs(v.slack) <= tol * scale;
  v.equality_case_detected = equality_case;
  return v;
}

nlohmann::json verdict_to_json(const InequalityVerdict& v) {
  return nlohmann::json{{"name", v.name},
                        {"kind", v.kind == VerdictKind::Inequality ? "inequality" : "identity"},
                        {"lhs", v.lhs},
                        {"rhs", v.rhs},
                        {"slack", v.slack},
                        {"tol", v.tol},
                        {"holds", v.holds},
                        {"equality_case_detected", v.equality_case_detected}};
}

bool dilation_family(std::span<const StarBody> bodies, double tol) {
  if (bodies.size() < 2) return true;
  for (std::size_t k = 1; k < bodies.size(); ++k) {
    double lo = bodies[k].rho(0) / bodies[0].rho(0);
    double hi = lo;
    for (std::size_t i = 1; i < bodies[0].size(); ++i) {
      const double r = bodies[k].rho(i) / bodies[0].rho(i);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    if (hi - lo > tol * (0.5 * (hi + lo))) return false;
  }
  return true;
}

InequalityVerdict check_polynomial_expansion(const StarBody& a, const StarBody& b, double lambda,
                                             double mu, double tol) {
  if (!(lambda > 0) && !(mu > 0)) throw Error("at least one coefficient must be positive");
  const int n = body_dim(a);
  // left side: V(lambda A + mu B); degenerate coefficients collapse to a dilation
  StarBody mix = lambda > 0 && mu > 0
                     ? starbody::radial_sum(starbody::dilate(a, lambda), starbody::dilate(b, mu))
                     : (lambda > 0 ? starbody::dilate(a, lambda) : starbody::dilate(b, mu));
  const double lhs = volume(mix);
  double rhs = 0;
  for (int k = 0; k <= n; ++k)
    rhs += binomial(n, k) * std::pow(lambda, n - k) * std::pow(mu, k) * dmv_k(a, b, k);
  const StarBody pair[2] = {a, b};
  return make_verdict("polynomial_expansion", VerdictKind::Identity, lhs, rhs, tol,
                      dilation_family({pair, 2}));
}

InequalityVerdict check_main_inequality(std::span<const StarBody> bodies, double tol) {
  const int n = body_dim(bodies[0]);
  if (static_cast<int>(bodies.size()) != n) throw Error("main inequality needs n bodies");
  const double lhs = std::pow(dual_mixed_volume(bodies), n);
  double rhs = 1;
  for (const StarBody& b : bodies) rhs *= volume(b);
  return make_verdict("main_inequality", VerdictKind::Inequality, lhs, rhs, tol,
                      dilation_family(bodies));
}

std::array<InequalityVerdict, 2> check_dual_minkowski(const StarBody& a, const StarBody& b,
                                                      double tol) {
  const int n = body_dim(a);
  const double va = volume(a), vb = volume(b);
  const StarBody pair[2] = {a, b};
  const bool eq = dilation_family({pair, 2});
  InequalityVerdict first =
      make_verdict("dual_minkowski_1", VerdictKind::Inequality, std::pow(dmv_k(a, b, 1), n),
                   std::pow(va, n - 1) * vb, tol, eq);
  InequalityVerdict second =
      make_verdict("dual_minkowski_n-1", VerdictKind::Inequality, std::pow(dmv_k(a, b, n - 1), n),
                   va * std::pow(vb, n - 1), tol, eq);
  return {first, second};
}

InequalityVerdict check_dual_bm(const StarBody& a, const StarBody& b, double tol) {
  const int n = body_dim(a);
  const double lhs = std::pow(volume(starbody::radial_sum(a, b)), 1.0 / n);
  const double rhs = std::pow(volume(a), 1.0 / n) + std::pow(volume(b), 1.0 / n);
  const StarBody pair[2] = {a, b};
  return make_verdict("dual_brunn_minkowski", VerdictKind::Inequality, lhs, rhs, tol,
                      dilation_family({pair, 2}));
}

InequalityVerdict check_invariance(std::span<const StarHamiltonian> hams, const BaseDiffeo& phi,
                                   GridPtr grid, std::optional<double> tol_override) {
  const ManifoldModel& model = grid->model();

  auto transported = [&](const StarHamiltonian& h) {
    StarHamiltonian out;
    out.evaluator = [h, phi, model](const CotangentPoint& z) {
      return h(geometry::cotangent_lift_inverse(model, phi, z));
    };
    out.smooth = h.smooth;
    out.reversible = false;
    out.description = "lift(" + h.description + ")";
    return out;
  };

  auto dmv_on = [&](GridPtr g, bool lifted) {
    std::vector<StarBody> bodies;
    bodies.reserve(hams.size());
    for (const StarHamiltonian& h : hams)
      bodies.push_back(
          starbody::body_from_hamiltonian(lifted ? transported(h) : h, g, /*audit=*/false));
    return dual_mixed_volume(bodies);
  };

  const double before = dmv_on(grid, false);
  const double after = dmv_on(grid, true);
  const double scale = std::max(std::fabs(before), std::fabs(after));

  double tol;
  if (tol_override) {
    tol = *tol_override;
  } else {
    GridPtr fine = geometry::build_grid_ptr(model, grid->resolution().refined());
    const double err =
        std::fabs(dmv_on(fine, false) - before) + std::fabs(dmv_on(fine, true) - after);
    tol = (3.0 * err + 1e-12 * std::fabs(before)) / scale;
  }
  InequalityVerdict v =
      make_verdict("dmv_invariance", VerdictKind::Identity, before, after, tol, false);
  v.equality_case_detected = v.holds;
  return v;
}

}  // namespace starvol::dualvol
