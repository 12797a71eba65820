#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "starvol/starbody.hpp"

namespace starvol::dualvol {

using geometry::BaseDiffeo;
using geometry::GridPtr;
using starbody::StarBody;
using starbody::StarHamiltonian;

// V(A) = sum_i w_i rho_i^n.
double volume(const StarBody& a);

// Dual mixed volume of dim(M) bodies sharing one grid: sum_i w_i prod_k rho_k,i.
double dual_mixed_volume(std::span<const StarBody> bodies);

// V~_k(A,B): n-k copies of A, k copies of B (k = 0..n allowed; the ends are
// plain volumes).
double dmv_k(const StarBody& a, const StarBody& b, int k);

// W~_k(A) = (1/V(U)) sum_i w_i rho_i^{n-k}, 1 <= k <= n-1.
double w_tilde_k(const StarBody& a, int k);

struct DmvReport {
  double value = 0;
  std::vector<std::string> bodies;
  geometry::GridResolution resolution;
  double estimated_error = 0;  // |value - value on one refinement step|
};

// Requires closed-form bodies (re-gridding provides the refinement estimate).
DmvReport dmv_report(std::span<const StarBody> bodies, std::span<const std::string> names);

enum class VerdictKind { Inequality, Identity };

// Outcome of one inequality or identity check. For inequalities,
// holds <=> slack >= -tol*max(|lhs|,|rhs|); identities additionally require
// slack <= tol*max(|lhs|,|rhs|).
struct InequalityVerdict {
  std::string name;
  VerdictKind kind = VerdictKind::Inequality;
  double lhs = 0;
  double rhs = 0;
  double slack = 0;  // rhs - lhs
  double tol = 0;
  bool holds = false;
  bool equality_case_detected = false;
};

InequalityVerdict make_verdict(std::string name, VerdictKind kind, double lhs, double rhs,
                               double tol, bool equality_case);
nlohmann::json verdict_to_json(const InequalityVerdict& v);

// Pointwise proportionality of the radial fields within 1e-8 relative; this
// is the equality condition for the main inequality family, checked directly
// rather than through slack (slack scales with body size).
bool dilation_family(std::span<const StarBody> bodies, double tol = 1e-8);

// V(lambda A + mu B) vs the binomial expansion over V~_k(A,B); exact in
// quadrature, checked at 1e-10 relative by default.
InequalityVerdict check_polynomial_expansion(const StarBody& a, const StarBody& b, double lambda,
                                             double mu, double tol = 1e-10);

// V~(A_1,...,A_n)^n <= V(A_1)...V(A_n).
InequalityVerdict check_main_inequality(std::span<const StarBody> bodies, double tol = 1e-10);

// V~_1(A,B)^n <= V(A)^{n-1} V(B)  and  V~_{n-1}(A,B)^n <= V(A) V(B)^{n-1}.
std::array<InequalityVerdict, 2> check_dual_minkowski(const StarBody& a, const StarBody& b,
                                                      double tol = 1e-10);

// V(A + B)^{1/n} <= V(A)^{1/n} + V(B)^{1/n}.
InequalityVerdict check_dual_bm(const StarBody& a, const StarBody& b, double tol = 1e-10);

// Compares V~(A_1,...,A_n) with the value after transporting every body by
// the cotangent lift of phi (rho' = 1/H(lift of phi^{-1} at the node)).
// Tolerance defaults to 3x the refinement-estimated quadrature error of both
// sides; bodies must carry closed forms.
InequalityVerdict check_invariance(std::span<const StarHamiltonian> hams, const BaseDiffeo& phi,
                                   GridPtr grid, std::optional<double> tol_override = std::nullopt);

}  // namespace starvol::dualvol
