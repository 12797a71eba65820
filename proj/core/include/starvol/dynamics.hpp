#pragma once

#include <functional>
#include <span>
#include <vector>

#include "starvol/geometry.hpp"
#include "starvol/starbody.hpp"

namespace starvol::dynamics {

using geometry::CosphereGrid;
using geometry::CotangentPoint;
using geometry::ManifoldModel;
using starbody::StarHamiltonian;

// Scalar field on T*M minus the zero section. On sphere models, evaluators
// must be insensitive to the off-manifold directions (use the ambient
// extension helpers below), so that chart-style finite differences compute
// the intrinsic derivatives.
struct ScalarField {
  std::function<double(const CotangentPoint&)> value;
  double operator()(const CotangentPoint& z) const { return value(z); }
};

// Invariant extension |x|^degree f(x/|x|, p - <p,x>x/|x|^2) of an intrinsic
// field on the sphere bundle. With `degree` equal to the field's fiber
// homogeneity degree, ambient Hamiltonian flow and ambient-coordinate
// brackets restrict to the intrinsic ones on {|x| = 1, <x,p> = 0}.
std::function<double(const CotangentPoint&)> ambient_extension(
    std::function<double(const CotangentPoint&)> intrinsic, int degree);
std::function<double(const CotangentPoint&)> ambient_extension_deg1(
    std::function<double(const CotangentPoint&)> intrinsic);
std::function<double(const CotangentPoint&)> ambient_extension_deg0(
    std::function<double(const CotangentPoint&)> intrinsic);

// Hamiltonian with a gradient: analytic when available, otherwise central
// finite differences of the (extended) evaluator.
struct HamiltonianField {
  ManifoldModel model;
  std::function<double(const CotangentPoint&)> value;
  std::function<void(const CotangentPoint&, Vec&, Vec&)> gradient;  // fills grad_x, grad_p

  double operator()(const CotangentPoint& z) const { return value(z); }
};

// Wraps an intrinsic evaluator; sphere models get the degree-1 ambient
// extension automatically.
HamiltonianField make_field(const ManifoldModel& model,
                            std::function<double(const CotangentPoint&)> intrinsic,
                            double fd_step = 1e-6);
HamiltonianField make_field(const ManifoldModel& model, const StarHamiltonian& ham,
                            double fd_step = 1e-6);

// |x x p| with analytic gradients; the round-metric Hamiltonian on S^2/RP^2.
HamiltonianField round_sphere_hamiltonian(const ManifoldModel& model);

// X_H = (dH/dp, -dH/dx); equals the Reeb field on the level H = 1.
void hamiltonian_vector_field(const HamiltonianField& h, const CotangentPoint& z, Vec& xdot,
                              Vec& pdot);

struct Trajectory {
  std::vector<double> times;
  std::vector<CotangentPoint> samples;
  double dt = 0;
  double action = 0;   // Simpson quadrature of p . xdot
  double h_drift = 0;  // max relative |H - level| before each renormalization
  double level = 1;    // preserved energy level

  const CotangentPoint& back() const { return samples.back(); }
};

// RK4 with per-step renormalization onto the initial level (momentum scaling;
// sphere models also re-project onto the constraint set). Torus trajectories
// keep unreduced coordinates so paths stay continuous.
Trajectory integrate_flow(const HamiltonianField& h, const CotangentPoint& z0, double T, double dt,
                          int stride = 1);

// {f,g} = sum_i df/dx_i dg/dp_i - df/dp_i dg/dx_i, convention {x1,p1} = +1,
// by central differences (step scaled per coordinate).
double poisson_bracket(const ManifoldModel& model, const ScalarField& f, const ScalarField& g,
                       const CotangentPoint& z, double step = 1e-5);
// Variant using an analytic gradient for the first argument; only g is
// differenced. Used where g is expensive (orbit-averaged fields).
double poisson_bracket(const HamiltonianField& f, const ScalarField& g, const CotangentPoint& z,
                       double step = 1e-5);

// A Hamiltonian whose flow is periodic with a known common period.
struct PeriodicFlow {
  HamiltonianField field;
  double period = 0;
};

// The model geodesic flow: S^2 period 2*pi, RP^2 period pi (on the quotient).
PeriodicFlow model_geodesic_flow(const ManifoldModel& model);

// (1/T) integral of G along the H0-orbit through z, by composite Simpson on
// `steps` RK4 steps. Throws NumericalError if the orbit fails to close within
// 1e-6 (RP^2 closes up to the antipodal identification), and InvariantError
// if G is not antipodally even on RP^2.
double flow_average(const PeriodicFlow& flow, const ScalarField& g, const CotangentPoint& z,
                    int steps = 800);

// The averaged field as a function on T*M minus the zero section; `degree` is
// the fiber homogeneity degree of g (0 for base observables, 1 for
// Hamiltonian perturbations) and fixes the ambient extension on spheres.
ScalarField averaged_field(const PeriodicFlow& flow, const ScalarField& g, int steps = 800,
                           int degree = 0);

struct NormalFormPair {
  ScalarField invariant_part;   // E: flow-invariant, degree-1 homogeneous
  ScalarField generating_part;  // F: solves {H0,F} = H1 - E
  double residual = 0;          // max probe |H1 - E - {H0,F}|
  double max_h0e_bracket = 0;   // max probe |{H0,E}|
  double homogeneity_defect = 0;
};

struct NormalFormOptions {
  int steps = 800;          // RK4/Simpson steps per orbit
  double bracket_step = 1e-4;
  double residual_tol = 1e-3;  // throws NumericalError beyond this
};

// E(z) = orbit average of H1; F(z) = -(1/T) integral of t (H1-E)(phi_t z) dt.
// The sign of F makes {H0,F} = H1 - E under the bracket convention above; the
// residual is measured independently through poisson_bracket.
NormalFormPair normal_form_decompose(const PeriodicFlow& flow, const ScalarField& h1,
                                     std::span<const CotangentPoint> probes,
                                     const NormalFormOptions& options = {});

struct ClosedCharacteristicOptions {
  double dt = 2e-3;
  int orbit_steps = 1600;        // steps per period for the final characteristic
  int descent_steps = 50;
  double flow_invariance_tol = 1e-5;
  double residual_tol = 1e-4;
  std::size_t scan_stride = 1;   // argmin scan thinning over grid nodes
};

struct ClosedCharacteristic {
  Trajectory trajectory;  // integral curve of X_H on H = 1
  double lambda = 0;      // min of the radial function
  double action = 0;      // lambda * period of the model flow
  CotangentPoint minimizer;
  double hamilton_residual = 0;
};

// Critical-point construction for H commuting with the periodic model flow:
// locates the minimum of rho = 1/H over the unit cosphere bundle, takes the
// model characteristic through it and scales by lambda = min rho. Verifies
// the scaled curve satisfies Hamilton's equations for H.
ClosedCharacteristic find_closed_characteristic(const StarHamiltonian& ham,
                                                const PeriodicFlow& model_flow,
                                                const CosphereGrid& grid,
                                                const ClosedCharacteristicOptions& options = {});

}  // namespace starvol::dynamics
