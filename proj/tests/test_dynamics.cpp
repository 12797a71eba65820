#include <doctest.h>

#include <cmath>

#include "starvol/dynamics.hpp"

using namespace starvol;
using namespace starvol::dynamics;

namespace {

geometry::ManifoldModel t2() { return geometry::ManifoldModel::flat_torus(2); }
geometry::ManifoldModel s2() { return geometry::ManifoldModel::round_sphere2(); }
geometry::ManifoldModel rp2() { return geometry::ManifoldModel::projective_plane2(); }

HamiltonianField flat_norm_field() {
  return make_field(t2(), starbody::model_norm_hamiltonian(t2()));
}

double rho_y(const Vec& x) { return 1.0 + 0.3 * std::sin(2 * kPi * x[1]); }

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("Hamiltonian vector field in the flat chart") {
  HamiltonianField h = flat_norm_field();
  Vec xdot, pdot;
  hamiltonian_vector_field(h, {Vec{0.3, 0.4}, Vec{1.0, 0.0}}, xdot, pdot);
  CHECK(xdot[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::fabs(xdot[1]) < 1e-9);
  CHECK(norm(pdot) < 1e-9);
}

TEST_CASE("conformal optical Hamiltonian: momentum equation matches the closed form") {
  HamiltonianField h = make_field(
      t2(), std::function<double(const geometry::CotangentPoint&)>(
                [](const geometry::CotangentPoint& z) { return norm(z.momentum) / rho_y(z.base); }));
  const Vec x{0.2, 0.15};
  const Vec p{0.7, -0.4};
  Vec xdot, pdot;
  hamiltonian_vector_field(h, {x, p}, xdot, pdot);
  // pdot = |p| rho' / rho^2 in the x2 slot, zero in x1
  const double drho = 0.3 * 2 * kPi * std::cos(2 * kPi * x[1]);
  CHECK(pdot[0] == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(pdot[1] == doctest::Approx(norm(p) * drho / (rho_y(x) * rho_y(x))).epsilon(1e-7));
}

TEST_CASE("round-sphere field is tangent to the cosphere bundle") {
  HamiltonianField h = round_sphere_hamiltonian(s2());
  geometry::CotangentPoint z{normalized(Vec{0.3, -0.5, 0.8}), Vec{0, 0, 0}};
  // build a unit tangent momentum
  Vec raw{0.7, 0.4, 0.1};
  z.momentum = normalized(raw - dot(raw, z.base) * z.base);
  Vec xdot, pdot;
  hamiltonian_vector_field(h, z, xdot, pdot);
  CHECK(std::fabs(dot(xdot, z.base)) < 1e-8);                          // stays on the sphere
  CHECK(std::fabs(dot(pdot, z.base) + dot(z.momentum, xdot)) < 1e-8);  // keeps <x,p> = 0
}

TEST_CASE("flat geodesics and the action-time identity") {
  HamiltonianField h = flat_norm_field();
  Vec p0 = normalized(Vec{3.0, 4.0});
  Trajectory t = integrate_flow(h, {Vec{0.1, 0.2}, p0}, 1.0, 1e-3, 100);
  const Vec expect = Vec{0.1, 0.2} + p0;
  CHECK(norm(t.back().base - expect) < 1e-9);
  CHECK(std::fabs(t.action - 1.0) < 1e-8);
  CHECK(t.h_drift <= 1e-6);
}

TEST_CASE("great circles close after 2 pi") {
  HamiltonianField h = round_sphere_hamiltonian(s2());
  geometry::CotangentPoint z0{Vec{1, 0, 0}, Vec{0, 1, 0}};
  Trajectory t = integrate_flow(h, z0, 2 * kPi, 1e-3, 1000);
  CHECK(norm(t.back().base - z0.base) < 1e-6);
  CHECK(norm(t.back().momentum - z0.momentum) < 1e-6);
}

TEST_CASE("RK4 halves the step, the endpoint error drops ~16x") {
  HamiltonianField h = round_sphere_hamiltonian(s2());
  geometry::CotangentPoint z0{Vec{1, 0, 0}, Vec{0, 1, 0}};
  auto err = [&](double dt) {
    Trajectory t = integrate_flow(h, z0, 2 * kPi, dt, 1 << 20);
    return norm(t.back().base - z0.base) + norm(t.back().momentum - z0.momentum);
  };
  const double e1 = err(2 * kPi / 100), e2 = err(2 * kPi / 200);
  CHECK(std::log2(e1 / e2) > 3.8);
}

TEST_CASE("poisson brackets") {
  const auto model = t2();
  ScalarField x1{[](const geometry::CotangentPoint& z) { return z.base[0]; }};
  ScalarField p1{[](const geometry::CotangentPoint& z) { return z.momentum[0]; }};
  geometry::CotangentPoint z{Vec{0.4, 0.6}, Vec{0.3, 0.9}};
  CHECK(poisson_bracket(model, x1, p1, z) == doctest::Approx(1.0).epsilon(1e-9));

  ScalarField h{[](const geometry::CotangentPoint& w) { return norm(w.momentum); }};
  CHECK(std::fabs(poisson_bracket(model, h, h, z)) < 1e-12);

  // antisymmetry and Leibniz on polynomial fields
  ScalarField f{[](const geometry::CotangentPoint& w) {
    return w.base[0] * w.momentum[1] + w.base[1] * w.base[1];
  }};
  ScalarField g{[](const geometry::CotangentPoint& w) {
    return w.momentum[0] * w.momentum[0] + w.base[1] * w.momentum[0];
  }};
  ScalarField fg{[&](const geometry::CotangentPoint& w) { return f(w) * g(w); }};
  const double fgz = poisson_bracket(model, f, g, z);
  CHECK(fgz == doctest::Approx(-poisson_bracket(model, g, f, z)).epsilon(1e-9));
  ScalarField hh{[](const geometry::CotangentPoint& w) { return w.base[0] + w.momentum[1]; }};
  const double lhs = poisson_bracket(model, fg, hh, z);
  const double rhs =
      f(z) * poisson_bracket(model, g, hh, z) + g(z) * poisson_bracket(model, f, hh, z);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("flow averages on the round sphere") {
  PeriodicFlow flow = model_geodesic_flow(s2());

  // invariant integrand returns its own value
  ScalarField h0{flow.field.value};
  geometry::CotangentPoint z{Vec{1, 0, 0}, Vec{0, 1, 0}};
  CHECK(flow_average(flow, h0, z, 400) == doctest::Approx(1.0).epsilon(1e-9));

  // odd coordinate averages to zero over a great circle through the poles
  ScalarField xcoord{ambient_extension_deg0(
      [](const geometry::CotangentPoint& w) { return w.base[0]; })};
  geometry::CotangentPoint polar{Vec{1, 0, 0}, Vec{0, 0, 1}};
  CHECK(std::fabs(flow_average(flow, xcoord, polar, 400)) < 1e-9);

  // conformal integrand along the equator: mean of 1 + 0.3 cos = 1
  ScalarField weighted{[&flow](const geometry::CotangentPoint& w) {
    Vec xh = normalized(w.base);
    return (1.0 + 0.3 * xh[0]) * flow.field.value(w);
  }};
  CHECK(flow_average(flow, weighted, z, 400) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("averaging is a projector and produces invariant fields") {
  PeriodicFlow flow = model_geodesic_flow(rp2());
  ScalarField bump{ambient_extension_deg0(
      [](const geometry::CotangentPoint& w) { return w.base[2] * w.base[2]; })};
  ScalarField once = averaged_field(flow, bump, 400);
  auto probes = std::vector<geometry::CotangentPoint>{
      {Vec{1, 0, 0}, Vec{0, 1, 0}},
      {normalized(Vec{0.2, -0.7, 0.4}), Vec{0, 0, 0}},
  };
  probes[1].momentum =
      normalized(Vec{0.6, 0.1, 0.2} - dot(Vec{0.6, 0.1, 0.2}, probes[1].base) * probes[1].base);
  for (const auto& z : probes) {
    CHECK(flow_average(flow, once, z, 400) == doctest::Approx(once(z)).epsilon(1e-5));
    CHECK(std::fabs(poisson_bracket(flow.field, once, z, 1e-4)) < 1e-4);
  }
  // closed form for the average of x3^2 over the circle with unit normal mu
  for (const auto& z : probes) {
    Vec mu = normalized(cross3(z.base, z.momentum));
    CHECK(once(z) == doctest::Approx(0.5 * (1.0 - mu[2] * mu[2])).epsilon(1e-7));
  }
}

TEST_CASE("RP2 rejects integrands that do not descend") {
  PeriodicFlow flow = model_geodesic_flow(rp2());
  ScalarField odd{ambient_extension_deg0(
      [](const geometry::CotangentPoint& w) { return w.base[2]; })};
  // orbit through the poles, so the odd part is visible along it
  geometry::CotangentPoint z{Vec{1, 0, 0}, Vec{0, 0, 1}};
  CHECK_THROWS_AS(flow_average(flow, odd, z, 200), InvariantError);
}

TEST_CASE("normal form: invariant input returns itself") {
  PeriodicFlow flow = model_geodesic_flow(rp2());
  ScalarField h1{flow.field.value};
  auto probes = std::vector<geometry::CotangentPoint>{{Vec{1, 0, 0}, Vec{0, 1, 0}},
                                                      {Vec{0, 1, 0}, Vec{0, 0, 1}}};
  NormalFormOptions opt;
  opt.steps = 400;
  NormalFormPair pair = normal_form_decompose(flow, h1, probes, opt);
  CHECK(pair.residual <= 1e-6);
  for (const auto& z : probes)
    CHECK(pair.invariant_part(z) == doctest::Approx(h1(z)).epsilon(1e-8));
}

TEST_CASE("normal form: flow-invariant perturbations are fixed points of averaging") {
  PeriodicFlow flow = model_geodesic_flow(rp2());
  ScalarField bump{ambient_extension_deg0(
      [](const geometry::CotangentPoint& w) { return w.base[0] * w.base[0]; })};
  ScalarField invariant = averaged_field(flow, bump, 400);
  ScalarField h1{[&flow, invariant](const geometry::CotangentPoint& z) {
    return flow.field.value(z) * (1.0 + 0.25 * invariant(z));
  }};
  auto probes = std::vector<geometry::CotangentPoint>{{Vec{1, 0, 0}, Vec{0, 1, 0}}};
  NormalFormOptions opt;
  opt.steps = 300;
  opt.residual_tol = 1e-3;
  NormalFormPair pair = normal_form_decompose(flow, h1, probes, opt);
  CHECK(pair.invariant_part(probes[0]) == doctest::Approx(h1(probes[0])).epsilon(1e-5));
  CHECK(pair.residual <= 1e-4);
}

TEST_CASE("normal form on the sphere cover: odd conformal factor averages out") {
  PeriodicFlow flow = model_geodesic_flow(s2());
  ScalarField h1{[&flow](const geometry::CotangentPoint& z) {
    Vec xh = normalized(z.base);
    return (1.0 + 0.2 * xh[2]) * flow.field.value(z);  // degree-1 spherical harmonic factor
  }};
  auto probes = std::vector<geometry::CotangentPoint>{{Vec{1, 0, 0}, Vec{0, 1, 0}},
                                                      {Vec{0, 1, 0}, Vec{0, 0, 1}}};
  NormalFormOptions opt;
  opt.steps = 500;
  NormalFormPair pair = normal_form_decompose(flow, h1, probes, opt);
  // the Funk-type transform kills odd harmonics: E = H0 on these orbits
  for (const auto& z : probes)
    CHECK(pair.invariant_part(z) == doctest::Approx(flow.field.value(z)).epsilon(1e-7));
  CHECK(pair.residual <= 1e-3);
  CHECK(pair.max_h0e_bracket <= 1e-4);
}

TEST_CASE("closed characteristics of the model flow and its multiples") {
  PeriodicFlow flow = model_geodesic_flow(rp2());
  geometry::GridResolution res;
  res.sphere_refine = 2;
  res.fiber = 16;
  auto grid = geometry::build_grid(rp2(), res);

  starbody::StarHamiltonian h0;
  h0.evaluator = [](const geometry::CotangentPoint& z) {
    return norm(cross3(z.base, z.momentum));
  };
  ClosedCharacteristicOptions opt;
  ClosedCharacteristic cc = find_closed_characteristic(h0, flow, grid, opt);
  CHECK(cc.lambda == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(cc.action == doctest::Approx(kPi).epsilon(1e-8));
  CHECK(cc.hamilton_residual <= 1e-4);

  starbody::StarHamiltonian h2 = h0;
  h2.evaluator = [](const geometry::CotangentPoint& z) {
    return 2.0 * norm(cross3(z.base, z.momentum));
  };
  ClosedCharacteristic cc2 = find_closed_characteristic(h2, flow, grid, opt);
  CHECK(cc2.lambda == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(cc2.action == doctest::Approx(kPi / 2).epsilon(1e-8));
}

TEST_CASE("closed characteristic of a commuting deformation") {
  PeriodicFlow flow = model_geodesic_flow(rp2());
  geometry::GridResolution res;
  res.sphere_refine = 2;
  res.fiber = 16;
  auto grid = geometry::build_grid(rp2(), res);

  // u = psi(mu) with mu the unit angular momentum: exactly flow-invariant
  starbody::StarHamiltonian ham;
  ham.evaluator = [](const geometry::CotangentPoint& z) {
    Vec l = cross3(z.base, z.momentum);
    const double h0 = norm(l);
    const double mu3 = l[2] / h0;
    return h0 * (1.0 + 0.2 * mu3 * mu3);
  };
  ClosedCharacteristicOptions opt;
  ClosedCharacteristic cc = find_closed_characteristic(ham, flow, grid, opt);
  // max of 1 + 0.2 mu3^2 is 1.2 on equatorial orbits
  CHECK(cc.lambda == doctest::Approx(1.0 / 1.2).epsilon(1e-5));
  CHECK(cc.action == doctest::Approx(kPi / 1.2).epsilon(1e-4));
  CHECK(cc.hamilton_residual <= 1e-4);

  // direct integration of the H-flow from the same point returns and matches
  HamiltonianField hf = make_field(rp2(), ham);
  const geometry::CotangentPoint start = cc.trajectory.samples.front();
  Trajectory direct = integrate_flow(hf, start, cc.action, 1e-3);
  const auto& e = direct.back();
  const double close =
      std::min(norm(e.base - start.base) + norm(e.momentum - start.momentum),
               norm(e.base + start.base) + norm(e.momentum + start.momentum));
  CHECK(close < 1e-3);
  CHECK(direct.action == doctest::Approx(cc.action).epsilon(1e-4));
}

TEST_CASE("non-invariant radial fields are rejected") {
  PeriodicFlow flow = model_geodesic_flow(rp2());
  geometry::GridResolution res;
  res.sphere_refine = 1;
  res.fiber = 8;
  auto grid = geometry::build_grid(rp2(), res);
  starbody::StarHamiltonian ham;
  ham.evaluator = [](const geometry::CotangentPoint& z) {
    Vec xh = normalized(z.base);
    return (1.0 + 0.3 * xh[2] * xh[2]) * norm(cross3(z.base, z.momentum));
  };
  CHECK_THROWS_AS(find_closed_characteristic(ham, flow, grid), InvariantError);
}

TEST_CASE("energy drift over long runs stays within budget") {
  HamiltonianField h = round_sphere_hamiltonian(s2());
  Trajectory t = integrate_flow(h, {Vec{0, 0, 1}, Vec{1, 0, 0}}, 20.0, 1e-3, 2000);
  CHECK(t.h_drift <= 1e-6);
}

}  // TEST_SUITE
