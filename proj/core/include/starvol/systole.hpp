#pragma once

#include <optional>
#include <span>
#include <vector>

#include "starvol/dualvol.hpp"
#include "starvol/finsler.hpp"

namespace starvol::systole {

using dualvol::InequalityVerdict;
using finsler::FinslerMetric;
using geometry::GridPtr;
using geometry::ManifoldModel;

// Homotopy class: an integer vector for tori; RP2 has a single nontrivial
// class (empty vector).
struct LoopClass {
  std::vector<int> z;
  bool is_torus_class() const { return !z.empty(); }
};

struct SystoleEstimate {
  double length = 0;
  LoopClass cls;
  std::vector<Vec> polygon;  // torus: unwrapped chart points; RP2: cover points
  bool converged = false;
  // (min rho) * flat class length for conformal metrics; 0 when not applicable.
  double lower_bound = 0;
};

// Oriented polygonal length sum L(midpoint_i, delta_i). Torus polygons close
// through the class vector (the last segment returns to polygon[0] + z*periods).
// Throws NumericalError on a degenerate (zero-displacement) segment.
double loop_length(const FinslerMetric& metric, std::span<const Vec> polygon,
                   const LoopClass& cls);

// Geodesic-arc version for paths on the 2-sphere cover; vertices must be unit
// vectors and the path runs from polygon[0] to -polygon[0].
double loop_length_sphere(const FinslerMetric& metric, std::span<const Vec> polygon);

struct MinimizeOptions {
  int max_iterations = 2000;
  double grad_tol = 1e-7;  // on the length-relative gradient infinity norm
  double fd_step = 1e-6;
};

// Shortest loop in the class z by vertex gradient descent with backtracking
// and `restarts` random initializations.
SystoleEstimate systole_torus(const FinslerMetric& metric, const LoopClass& cls, int m,
                              int restarts, std::uint64_t seed,
                              const MinimizeOptions& options = {});

// Systole over all classes with |z|_inf <= zmax, pruned by the conformal
// lower bound when available.
SystoleEstimate systole_torus_all(const FinslerMetric& metric, int m, int restarts,
                                  std::uint64_t seed, int zmax = 3,
                                  const MinimizeOptions& options = {});

// Shortest antipodal path on the S2 cover for metrics conformal to the round
// one; multistart over `restarts` seeded start points, jointly optimizing the
// start point and the interior vertices.
SystoleEstimate systole_rp2(const FinslerMetric& metric, int m, int restarts, std::uint64_t seed,
                            const MinimizeOptions& options = {});

struct IsosystolicReport {
  double sys_l = 0;
  double sys_l0 = 0;
  double sys_ratio = 0;
  double w_tilde = 0;         // W~_{n-1}(M, L)
  double vol_l = 0;           // Holmes-Thompson volumes
  double vol_l0 = 0;
  double vol_ratio_root = 0;  // (vol_l / vol_l0)^{1/n}
  InequalityVerdict chain_lower;  // sys_ratio <= W~_{n-1}
  InequalityVerdict chain_upper;  // W~_{n-1} <= vol ratio root
  bool chain_holds = false;
  std::optional<double> pu_ratio;  // RP2: (2/pi) sys^2 / vol
  SystoleEstimate estimate;
};

struct ReportOptions {
  int m = 128;
  int restarts = 8;
  std::uint64_t seed = 1;
  int zmax = 3;
  double tol = 1e-4;  // verdict tolerance for the chain inequalities
};

// Inequality chain for a metric conformal to the grid's model metric.
IsosystolicReport isosystolic_report(const FinslerMetric& metric, GridPtr grid,
                                     const ReportOptions& options = {});

}  // namespace starvol::systole
