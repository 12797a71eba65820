#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "starvol/common.hpp"

namespace starvol::geometry {

enum class ManifoldKind { FlatTorus, RoundSphere2, ProjectivePlane2 };

std::string to_string(ManifoldKind kind);
ManifoldKind manifold_kind_from_string(const std::string& s);

// Base manifold with fixed chart and measure conventions: flat tori of any
// dimension >= 2 with per-axis periods, the unit round 2-sphere, and the
// projective plane computed on its double cover.
struct ManifoldModel {
  ManifoldKind kind = ManifoldKind::FlatTorus;
  int dim = 2;
  Vec periods;  // torus only

  static ManifoldModel flat_torus(int n, std::span<const double> periods = {});
  static ManifoldModel round_sphere2();
  static ManifoldModel projective_plane2();

  // Dimension of the stored coordinate tuples (n for tori, 3 for spheres).
  int ambient_dim() const { return sphere_based() ? 3 : dim; }
  bool sphere_based() const { return kind != ManifoldKind::FlatTorus; }

  // Riemannian volume of the base: prod(periods), 4*pi, or 2*pi.
  double base_volume() const;

  // Torus: reduce mod periods into [0, period). Sphere: normalize. RP2:
  // normalize and pick the representative whose first nonzero coordinate is
  // positive.
  Vec reduce_base(const Vec& x) const;

  // Reference-metric norm of a momentum covector at x (flat or round).
  double momentum_norm(const Vec& x, const Vec& p) const;

  bool operator==(const ManifoldModel& o) const;
};

struct CotangentPoint {
  Vec base;
  Vec momentum;
};

// Scale the fiber coordinate: (x, p) -> (x, t p).
inline CotangentPoint fiber_scale(double t, const CotangentPoint& z) {
  return {z.base, t * z.momentum};
}

struct GridResolution {
  std::vector<int> base;   // torus: nodes per base axis
  int fiber = 32;          // fiber: azimuth node count
  int sphere_refine = -1;  // sphere/RP2: icosahedral refinement level

  GridResolution refined() const;
  std::string str() const;
};

// Quadrature nodes and weights on the boundary of the model codisc bundle,
// realizing Omega as (base volume x fiber sphere measure)/n. The total weight
// is V(U) = vol(M) * eps_n.
class CosphereGrid {
 public:
  CosphereGrid(ManifoldModel model, GridResolution resolution, std::vector<double> base_pts,
               std::vector<double> momenta, std::vector<double> weights);

  const ManifoldModel& model() const { return model_; }
  const GridResolution& resolution() const { return resolution_; }
  std::size_t size() const { return weights_.size(); }
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }
  CotangentPoint node(std::size_t i) const;
  double total_weight() const { return total_weight_; }

 private:
  ManifoldModel model_;
  GridResolution resolution_;
  std::vector<double> base_pts_;  // size() x ambient_dim, row-major
  std::vector<double> momenta_;   // same layout
  std::vector<double> weights_;
  double total_weight_ = 0;
};

using GridPtr = std::shared_ptr<const CosphereGrid>;

// Builds the product quadrature over (base grid) x (unit momentum sphere).
// Tori: uniform periodic rule per axis; fiber s^{n-1} by uniform azimuth and
// Gauss-Legendre polar levels. Sphere/RP2: refined icosahedral base with
// spherical-triangle centroid weights and uniform fiber angles; RP2 halves
// every weight.
CosphereGrid build_grid(const ManifoldModel& model, const GridResolution& resolution);
GridPtr build_grid_ptr(const ManifoldModel& model, const GridResolution& resolution);

// Base-only quadrature (points and weights) with the same conventions.
struct BaseGrid {
  ManifoldModel model;
  std::vector<double> pts;  // count x ambient_dim
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
  Vec point(std::size_t i) const;
};
BaseGrid build_base_grid(const ManifoldModel& model, const GridResolution& resolution);

// Volume of the k-dimensional Euclidean unit ball, pi^{k/2}/Gamma(k/2+1).
double euclidean_ball_volume(int k);
// Surface area of the unit sphere S^m.
double unit_sphere_area(int m);

// Base diffeomorphism given by forward/inverse maps in the torus chart.
// jacobian (row-major, J[i*n+j] = d phi_i / d x_j) is optional; a central
// finite-difference fallback is used when absent.
struct BaseDiffeo {
  std::function<Vec(const Vec&)> forward;
  std::function<Vec(const Vec&)> inverse;
  std::function<void(const Vec&, double*)> jacobian;

  static BaseDiffeo identity(int n);
  static BaseDiffeo torus_translation(const Vec& c);
  // x1 -> x1 + amp*sin(2*pi*x2/period2), other coordinates fixed.
  static BaseDiffeo torus_shear(double amp, double period2 = 1.0);
};

// Canonical lift (phi(x), p . Dphi(x)^{-1}); homogeneous of degree one in p
// and preserves the canonical 1-form. Throws NumericalError on a singular
// Jacobian (|det| < 1e-10).
CotangentPoint cotangent_lift(const ManifoldModel& model, const BaseDiffeo& phi,
                              const CotangentPoint& z);
// Lift of phi^{-1}; uses Dphi at the preimage so no Jacobian of the inverse
// map is required.
CotangentPoint cotangent_lift_inverse(const ManifoldModel& model, const BaseDiffeo& phi,
                                      const CotangentPoint& z);

// Textual (JSON) serialization with fields {model, resolution, nodes,
// checksum}; the checksum is the total weight and is verified on load.
nlohmann::json grid_to_json(const CosphereGrid& grid);
CosphereGrid grid_from_json(const nlohmann::json& j);

}  // namespace starvol::geometry
