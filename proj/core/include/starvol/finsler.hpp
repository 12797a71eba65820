#pragma once

#include <functional>
#include <optional>
#include <string>

#include "starvol/dualvol.hpp"
#include "starvol/starbody.hpp"

namespace starvol::finsler {

using geometry::BaseGrid;
using geometry::CotangentPoint;
using geometry::GridPtr;
using geometry::ManifoldModel;
using starbody::StarBody;
using starbody::StarHamiltonian;

enum class MetricKind { Euclidean, Quadratic, Conformal, Randers, Custom };

// Fiberwise norm on the tangent bundle. The evaluator receives the tangent
// vector in the momentum slot of a CotangentPoint (same storage conventions
// as Hamiltonians).
struct FinslerMetric {
  ManifoldModel model;
  std::function<double(const CotangentPoint&)> evaluator;
  bool reversible = true;
  bool smooth = true;
  MetricKind kind = MetricKind::Custom;
  std::string description;

  // family parameters, used for descriptions and fast lower bounds
  double quad_a = 1, quad_b = 1;
  Vec randers_b;
  std::function<double(const Vec&)> conformal_rho;  // base-only factor

  double operator()(const CotangentPoint& zv) const { return evaluator(zv); }
  double operator()(const Vec& x, const Vec& v) const { return evaluator({x, v}); }
};

FinslerMetric euclidean_metric(const ManifoldModel& model);
// sqrt((v1/a)^2 + (v2/b)^2) on a 2-torus.
FinslerMetric quadratic_metric(const ManifoldModel& model, double a, double b);
// rho(x) * L0 with rho a positive base function.
FinslerMetric conformal_metric(const ManifoldModel& model, std::function<double(const Vec&)> rho,
                               std::string description = "conformal");
FinslerMetric conformal_metric_expr(const ManifoldModel& model, const exprlang::Expr& rho);
// |v| + <b, v| on a flat torus, |b| < 1 (non-reversible).
FinslerMetric randers_metric(const ManifoldModel& model, const Vec& b);
// Lagrangian expression in x1..xn, p1..pn (fiber variables in the p slots).
FinslerMetric custom_metric(const ManifoldModel& model, const exprlang::Expr& lagrangian,
                            bool reversible = false, bool smooth = true);

// |L(v) - L(-v)| <= tol * L(v) at random probes; throws InvariantError.
void audit_reversibility(const FinslerMetric& metric, std::uint64_t seed = 99, int probes = 64,
                         double tol = 1e-9);

struct LegendreResult {
  double value = 0;
  bool converged = false;
  int iterations = 0;
};

// Dual norm value H(x,p) = max{ p(v) : L(x,v) <= 1 }, computed by maximizing
// p(v)/L(v) over the unit fiber sphere (2d fibers: scan + golden section +
// Newton on the angle; higher: multistart projected Newton, 8 starts). A
// non-converged result carries the best value found.
LegendreResult legendre_dual(const FinslerMetric& metric, const Vec& x, const Vec& p);

// Same construction with the roles swapped: L(x,v) = max{ p(v) : H(x,p) <= 1 }.
LegendreResult legendre_inverse(const StarHamiltonian& ham, const ManifoldModel& model,
                                const Vec& x, const Vec& v);

// The optical Hamiltonian of a metric; evaluator runs legendre_dual per point.
struct OpticalHamiltonian {
  StarHamiltonian ham;
  std::optional<double> min_fiber_curvature;  // set by certify()
};
OpticalHamiltonian dual_hamiltonian(const FinslerMetric& metric);

// The Finsler metric of an optical Hamiltonian (inverse Legendre transform).
FinslerMetric metric_from_hamiltonian(const ManifoldModel& model, const StarHamiltonian& ham,
                                      std::string description = "dual");

struct ConvexityCertificate {
  double min_curvature = 0;
  bool positive = false;
};

// Samples the unit fiber sphere of L at x (2d fibers, `samples` angles) and
// measures boundary curvature by finite differences. Throws NumericalError if
// the evaluator is not smooth enough to difference.
ConvexityCertificate check_quadratic_convexity(const FinslerMetric& metric, const Vec& x,
                                               int samples = 256);

// The dual body D*(M,H) sampled on the grid; carries the dual Hamiltonian as
// closed form so it can be re-gridded.
StarBody dual_body(const FinslerMetric& metric, GridPtr grid);

// V(D*(M,H)) / eps_n.
double holmes_thompson_volume(const FinslerMetric& metric, GridPtr grid);

// Hausdorff-type volume for reversible metrics on surfaces:
// integral of eps_2 / LebesgueArea{v : L(x,v) <= 1} over the base.
double busemann_volume(const FinslerMetric& metric, const BaseGrid& base, int fiber_samples = 512);

// V~_k of the dual bodies of two metrics on one grid.
double dmv_metrics(const FinslerMetric& l1, const FinslerMetric& l2, int k, GridPtr grid);

// W~_k(M, L) relative to the grid's model metric: V~_k(D*(M,H), U) / V(U).
double emv_metric(const FinslerMetric& metric, int k, GridPtr grid);

}  // namespace starvol::finsler
