#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "starvol/exprlang.hpp"
#include "starvol/geometry.hpp"

namespace starvol::starbody {

using geometry::CosphereGrid;
using geometry::CotangentPoint;
using geometry::GridPtr;
using geometry::ManifoldModel;

// Fiberwise degree-1 homogeneous, positive-off-zero evaluator on T*M. The
// evaluator must accept any cotangent point, not just grid nodes, so bodies
// can be re-gridded for refinement error estimates.
struct StarHamiltonian {
  std::function<double(const CotangentPoint&)> evaluator;
  bool smooth = true;
  bool reversible = true;
  std::string description;

  double operator()(const CotangentPoint& z) const { return evaluator(z); }
};

// The reference-metric norm |p| (flat on tori, round on spheres); its unit
// sublevel set is the model body U.
StarHamiltonian model_norm_hamiltonian(const ManifoldModel& model);

// Variable slots for phase-space expressions: x1..xn then p1..pn, with x,y,z
// aliased onto the first base slots.
exprlang::VarSet phase_vars(const ManifoldModel& model);

StarHamiltonian hamiltonian_from_expr(const ManifoldModel& model, const exprlang::Expr& e,
                                      bool smooth = true, bool reversible = false);

// Degree-1 homogeneity audit at random grid nodes with scalings t in {1/2, 2}.
// Throws InvariantError beyond `tol` relative.
void audit_homogeneity(const StarHamiltonian& h, const CosphereGrid& grid,
                       std::uint64_t seed = 1234, int probes = 64, double tol = 1e-8);

// Radial scalar field over the grid nodes representing a star body via
// rho = 1/H on the boundary of U. Immutable; algebra returns new bodies.
class StarBody {
 public:
  StarBody(GridPtr grid, std::vector<double> rho,
           std::optional<StarHamiltonian> form = std::nullopt);

  const GridPtr& grid() const { return grid_; }
  std::span<const double> rho() const { return rho_; }
  double rho(std::size_t i) const { return rho_[i]; }
  std::size_t size() const { return rho_.size(); }
  // Closed form for re-gridding, when available. Composed bodies keep
  // composite forms so refinement estimates stay possible.
  const std::optional<StarHamiltonian>& form() const { return form_; }

  // Same body sampled on another grid (requires a closed form).
  StarBody regrid(GridPtr grid) const;

 private:
  GridPtr grid_;
  std::vector<double> rho_;
  std::optional<StarHamiltonian> form_;
};

// rho_i = 1/H(node_i); runs the homogeneity audit first unless disabled.
// Throws InvariantError if H is nonpositive or non-finite at a node.
StarBody body_from_hamiltonian(const StarHamiltonian& h, GridPtr grid, bool audit = true);

// The model body itself (rho = 1).
StarBody model_body(GridPtr grid);

StarBody radial_sum(const StarBody& a, const StarBody& b);
StarBody dilate(const StarBody& a, double lambda);
StarBody union_body(const StarBody& a, const StarBody& b);
StarBody intersection_body(const StarBody& a, const StarBody& b);

// max_i |rho_A - rho_B| (the radial Hausdorff distance).
double radial_distance(const StarBody& a, const StarBody& b);

// Serialization alongside the grid reference: the radial samples plus the
// grid's resolution and checksum. Loading verifies the samples belong to the
// supplied grid.
nlohmann::json body_to_json(const StarBody& body);
StarBody body_from_json(const nlohmann::json& j, GridPtr grid);

}  // namespace starvol::starbody
