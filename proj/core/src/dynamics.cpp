#include "starvol/dynamics.hpp"

#include <cmath>

namespace starvol::dynamics {

namespace {

void project_constraints(const ManifoldModel& model, Vec& x, Vec& p) {
  if (!model.sphere_based()) return;
  x = normalized(x);
  p = p - dot(p, x) * x;
}

double phase_dist(const CotangentPoint& a, const CotangentPoint& b) {
  return norm(a.base - b.base) + norm(a.momentum - b.momentum);
}

}  // namespace

std::function<double(const CotangentPoint&)> ambient_extension(
    std::function<double(const CotangentPoint&)> intrinsic, int degree) {
  return [intrinsic, degree](const CotangentPoint& z) {
    const double r = norm(z.base);
    Vec xh = (1.0 / r) * z.base;
    Vec q = z.momentum - dot(z.momentum, xh) * xh;
    const double value = intrinsic({xh, q});
    if (degree == 0) return value;
    if (degree == 1) return r * value;
    return std::pow(r, degree) * value;
  };
}

std::function<double(const CotangentPoint&)> ambient_extension_deg1(
    std::function<double(const CotangentPoint&)> intrinsic) {
  return ambient_extension(std::move(intrinsic), 1);
}

std::function<double(const CotangentPoint&)> ambient_extension_deg0(
    std::function<double(const CotangentPoint&)> intrinsic) {
  return ambient_extension(std::move(intrinsic), 0);
}

HamiltonianField make_field(const ManifoldModel& model,
                            std::function<double(const CotangentPoint&)> intrinsic,
                            double fd_step) {
  HamiltonianField f;
  f.model = model;
  f.value = model.sphere_based() ? ambient_extension_deg1(std::move(intrinsic))
                                 : std::move(intrinsic);
  auto value = f.value;
  const int d = model.ambient_dim();
  f.gradient = [value, d, fd_step](const CotangentPoint& z, Vec& gx, Vec& gp) {
    gx = Vec::zero(static_cast<std::size_t>(d));
    gp = Vec::zero(static_cast<std::size_t>(d));
    CotangentPoint w = z;
    for (int i = 0; i < d; ++i) {
      const auto is = static_cast<std::size_t>(i);
      const double hx = fd_step * std::max(1.0, std::fabs(z.base[is]));
      w.base[is] = z.base[is] + hx;
      const double fp = value(w);
      w.base[is] = z.base[is] - hx;
      const double fm = value(w);
      w.base[is] = z.base[is];
      gx[is] = (fp - fm) / (2 * hx);

      const double hp = fd_step * std::max(1.0, std::fabs(z.momentum[is]));
      w.momentum[is] = z.momentum[is] + hp;
      const double gp_p = value(w);
      w.momentum[is] = z.momentum[is] - hp;
      const double gp_m = value(w);
      w.momentum[is] = z.momentum[is];
      gp[is] = (gp_p - gp_m) / (2 * hp);
    }
  };
  return f;
}

HamiltonianField make_field(const ManifoldModel& model, const StarHamiltonian& ham,
                            double fd_step) {
  return make_field(model, ham.evaluator, fd_step);
}

HamiltonianField round_sphere_hamiltonian(const ManifoldModel& model) {
  if (!model.sphere_based())
    throw UnsupportedError("round-sphere Hamiltonian needs a sphere-based model");
  HamiltonianField f;
  f.model = model;
  f.value = [](const CotangentPoint& z) { return norm(cross3(z.base, z.momentum)); };
  f.gradient = [](const CotangentPoint& z, Vec& gx, Vec& gp) {
    const Vec& x = z.base;
    const Vec& p = z.momentum;
    const double h = norm(cross3(x, p));
    if (!(h > 0)) throw NumericalError("round Hamiltonian gradient at a degenerate point");
    gx = (1.0 / h) * (norm2(p) * x - dot(x, p) * p);
    gp = (1.0 / h) * (norm2(x) * p - dot(x, p) * x);
  };
  return f;
}

void hamiltonian_vector_field(const HamiltonianField& h, const CotangentPoint& z, Vec& xdot,
                              Vec& pdot) {
  Vec gx, gp;
  h.gradient(z, gx, gp);
  xdot = gp;
  pdot = -gx;
}

Trajectory integrate_flow(const HamiltonianField& h, const CotangentPoint& z0, double T, double dt,
                          int stride) {
  if (!(T > 0) || !(dt > 0)) throw Error("flow needs positive duration and step");
  if (dt < 1e-9) throw NumericalError("step underflow");
  const long steps = std::lround(T / dt);
  if (steps < 1) throw Error("flow duration shorter than one step");
  const double step = T / static_cast<double>(steps);
  if (stride < 1) stride = 1;

  Trajectory traj;
  traj.dt = step;
  CotangentPoint z = z0;
  project_constraints(h.model, z.base, z.momentum);
  const double level = h(z);
  if (!(level > 0) || !std::isfinite(level))
    throw InvariantError("Hamiltonian must be positive at the initial point");
  traj.level = level;

  std::vector<double> integrand;
  integrand.reserve(static_cast<std::size_t>(steps) + 1);
  auto record_integrand = [&](const CotangentPoint& w) {
    Vec gx, gp;
    h.gradient(w, gx, gp);
    integrand.push_back(dot(w.momentum, gp));  // p . xdot
  };

  traj.times.push_back(0.0);
  traj.samples.push_back(z);
  record_integrand(z);

  Vec k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p, gx, gp;
  for (long s = 0; s < steps; ++s) {
    auto eval = [&](const CotangentPoint& w, Vec& xd, Vec& pd) {
      h.gradient(w, gx, gp);
      xd = gp;
      pd = -gx;
    };
    eval(z, k1x, k1p);
    eval({z.base + (0.5 * step) * k1x, z.momentum + (0.5 * step) * k1p}, k2x, k2p);
    eval({z.base + (0.5 * step) * k2x, z.momentum + (0.5 * step) * k2p}, k3x, k3p);
    eval({z.base + step * k3x, z.momentum + step * k3p}, k4x, k4p);
    z.base = z.base + (step / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    z.momentum = z.momentum + (step / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);

    project_constraints(h.model, z.base, z.momentum);
    const double hv = h(z);
    const double drift = std::fabs(hv - level) / level;
    traj.h_drift = std::max(traj.h_drift, drift);
    if (drift > 1e-6)
      throw NumericalError("energy drift exceeded the renormalization budget: " +
                           std::to_string(drift));
    z.momentum = (level / hv) * z.momentum;

    record_integrand(z);
    if ((s + 1) % stride == 0 || s + 1 == steps) {
      traj.times.push_back(static_cast<double>(s + 1) * step);
      traj.samples.push_back(z);
    }
  }
  traj.action = simpson(integrand, step);
  return traj;
}

double poisson_bracket(const ManifoldModel& model, const ScalarField& f, const ScalarField& g,
                       const CotangentPoint& z, double step) {
  const int d = model.ambient_dim();
  double sum = 0;
  CotangentPoint w = z;
  auto dx = [&](const ScalarField& fn, int i) {
    const auto is = static_cast<std::size_t>(i);
    const double h = step * std::max(1.0, std::fabs(z.base[is]));
    w.base[is] = z.base[is] + h;
    const double fp = fn(w);
    w.base[is] = z.base[is] - h;
    const double fm = fn(w);
    w.base[is] = z.base[is];
    return (fp - fm) / (2 * h);
  };
  auto dp = [&](const ScalarField& fn, int i) {
    const auto is = static_cast<std::size_t>(i);
    const double h = step * std::max(1.0, std::fabs(z.momentum[is]));
    w.momentum[is] = z.momentum[is] + h;
    const double fp = fn(w);
    w.momentum[is] = z.momentum[is] - h;
    const double fm = fn(w);
    w.momentum[is] = z.momentum[is];
    return (fp - fm) / (2 * h);
  };
  for (int i = 0; i < d; ++i) sum += dx(f, i) * dp(g, i) - dp(f, i) * dx(g, i);
  return sum;
}

double poisson_bracket(const HamiltonianField& f, const ScalarField& g, const CotangentPoint& z,
                       double step) {
  const int d = f.model.ambient_dim();
  Vec fx, fp;
  f.gradient(z, fx, fp);
  double sum = 0;
  CotangentPoint w = z;
  for (int i = 0; i < d; ++i) {
    const auto is = static_cast<std::size_t>(i);
    const double hp = step * std::max(1.0, std::fabs(z.momentum[is]));
    w.momentum[is] = z.momentum[is] + hp;
    const double gpp = g(w);
    w.momentum[is] = z.momentum[is] - hp;
    const double gpm = g(w);
    w.momentum[is] = z.momentum[is];

    const double hx = step * std::max(1.0, std::fabs(z.base[is]));
    w.base[is] = z.base[is] + hx;
    const double gxp = g(w);
    w.base[is] = z.base[is] - hx;
    const double gxm = g(w);
    w.base[is] = z.base[is];

    sum += fx[is] * (gpp - gpm) / (2 * hp) - fp[is] * (gxp - gxm) / (2 * hx);
  }
  return sum;
}

PeriodicFlow model_geodesic_flow(const ManifoldModel& model) {
  using geometry::ManifoldKind;
  if (model.kind == ManifoldKind::RoundSphere2)
    return {round_sphere_hamiltonian(model), 2.0 * kPi};
  if (model.kind == ManifoldKind::ProjectivePlane2)
    return {round_sphere_hamiltonian(model), kPi};
  throw UnsupportedError("the model geodesic flow is periodic only on sphere-based models");
}

namespace {

bool closes_up(const ManifoldModel& model, const CotangentPoint& z0, const CotangentPoint& zT,
               double tol) {
  const double scale = 1.0 + norm(z0.base) + norm(z0.momentum);
  double d = phase_dist(zT, z0);
  if (model.kind == geometry::ManifoldKind::ProjectivePlane2) {
    CotangentPoint anti{-zT.base, -zT.momentum};
    d = std::min(d, phase_dist(anti, z0));
  }
  return d <= tol * scale;
}

// Compares g with its antipodal pullback at several orbit samples; a plain
// check at one point can miss odd fields that vanish there.
void check_even_on_rp2(const ManifoldModel& model, const ScalarField& g,
                       std::span<const CotangentPoint> samples) {
  if (model.kind != geometry::ManifoldKind::ProjectivePlane2) return;
  const std::size_t stride = std::max<std::size_t>(1, samples.size() / 8);
  for (std::size_t i = 0; i < samples.size(); i += stride) {
    const CotangentPoint& z = samples[i];
    const double a = g(z);
    const double b = g({-z.base, -z.momentum});
    if (!(std::fabs(a - b) <= 1e-8 * (1.0 + std::fabs(a))))
      throw InvariantError("field is not antipodally even; it does not descend to RP2");
  }
}

struct OrbitAverages {
  double e = 0;  // orbit average of the integrand
  double f = 0;  // -(1/T) integral of t (G - e)
};

OrbitAverages orbit_averages(const PeriodicFlow& flow, const ScalarField& g,
                             const CotangentPoint& z, int steps, bool validate_even = false) {
  const double T = flow.period;
  Trajectory traj = integrate_flow(flow.field, z, T, T / steps, /*stride=*/1);
  if (!closes_up(flow.field.model, traj.samples.front(), traj.back(), 1e-6))
    throw NumericalError("orbit failed to close after one period");
  if (validate_even) check_even_on_rp2(flow.field.model, g, traj.samples);
  std::vector<double> values(traj.samples.size());
  for (std::size_t i = 0; i < traj.samples.size(); ++i) values[i] = g(traj.samples[i]);
  OrbitAverages out;
  out.e = simpson(values, traj.dt) / T;
  std::vector<double> weighted(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    weighted[i] = traj.times[i] * (values[i] - out.e);
  out.f = -simpson(weighted, traj.dt) / T;
  return out;
}

// Extends a field defined through on-bundle orbit integration so that
// ambient finite differences see the invariant extension.
ScalarField extend_orbit_field(const ManifoldModel& model,
                               std::function<double(const CotangentPoint&)> on_bundle,
                               int degree) {
  if (!model.sphere_based()) return ScalarField{std::move(on_bundle)};
  return ScalarField{ambient_extension(std::move(on_bundle), degree)};
}

}  // namespace

double flow_average(const PeriodicFlow& flow, const ScalarField& g, const CotangentPoint& z,
                    int steps) {
  return orbit_averages(flow, g, z, steps, /*validate_even=*/true).e;
}

ScalarField averaged_field(const PeriodicFlow& flow, const ScalarField& g, int steps,
                           int degree) {
  return extend_orbit_field(
      flow.field.model,
      [flow, g, steps](const CotangentPoint& z) { return orbit_averages(flow, g, z, steps).e; },
      degree);
}

NormalFormPair normal_form_decompose(const PeriodicFlow& flow, const ScalarField& h1,
                                     std::span<const CotangentPoint> probes,
                                     const NormalFormOptions& options) {
  if (!probes.empty())
    orbit_averages(flow, h1, probes[0], options.steps, /*validate_even=*/true);
  const int steps = options.steps;
  NormalFormPair pair;
  // E and F are degree-1 homogeneous like H1; the extension makes ambient
  // finite differences (the bracket checks) intrinsic.
  pair.invariant_part = extend_orbit_field(
      flow.field.model,
      [flow, h1, steps](const CotangentPoint& z) { return orbit_averages(flow, h1, z, steps).e; },
      /*degree=*/1);
  pair.generating_part = extend_orbit_field(
      flow.field.model,
      [flow, h1, steps](const CotangentPoint& z) { return orbit_averages(flow, h1, z, steps).f; },
      /*degree=*/1);

  for (const CotangentPoint& z : probes) {
    const double e = pair.invariant_part(z);
    const double bracket =
        poisson_bracket(flow.field, pair.generating_part, z, options.bracket_step);
    pair.residual = std::max(pair.residual, std::fabs(h1(z) - e - bracket));
    pair.max_h0e_bracket = std::max(
        pair.max_h0e_bracket,
        std::fabs(poisson_bracket(flow.field, pair.invariant_part, z, options.bracket_step)));
    const double e2 = pair.invariant_part(geometry::fiber_scale(2.0, z));
    pair.homogeneity_defect =
        std::max(pair.homogeneity_defect, std::fabs(e2 - 2.0 * e) / std::max(1.0, 2.0 * e));
  }
  if (pair.residual > options.residual_tol)
    throw NumericalError("normal form residual " + std::to_string(pair.residual) +
                         " exceeds tolerance " + std::to_string(options.residual_tol));
  return pair;
}

// ---- closed characteristics -----------------------------------------------------------

namespace {

// Orthonormalizes the active constraint gradients and removes their span from g.
void project_tangent(const ManifoldModel& model, const HamiltonianField& h0,
                     const CotangentPoint& z, Vec& gx, Vec& gp) {
  const int d = model.ambient_dim();
  std::vector<std::pair<Vec, Vec>> basis;  // (x-part, p-part)
  if (model.sphere_based()) {
    basis.push_back({z.base, Vec::zero(static_cast<std::size_t>(d))});  // |x|^2 = 1
    basis.push_back({z.momentum, z.base});                              // <x,p> = 0
  }
  Vec hx, hp;
  h0.gradient(z, hx, hp);
  basis.push_back({hx, hp});  // H0 = 1

  for (std::size_t i = 0; i < basis.size(); ++i) {
    auto& [bx, bp] = basis[i];
    for (std::size_t j = 0; j < i; ++j) {
      const double c = dot(bx, basis[j].first) + dot(bp, basis[j].second);
      bx = bx - c * basis[j].first;
      bp = bp - c * basis[j].second;
    }
    const double nn = std::sqrt(norm2(bx) + norm2(bp));
    if (nn > 1e-12) {
      bx = (1.0 / nn) * bx;
      bp = (1.0 / nn) * bp;
    }
  }
  for (const auto& [bx, bp] : basis) {
    const double c = dot(gx, bx) + dot(gp, bp);
    gx = gx - c * bx;
    gp = gp - c * bp;
  }
}

CotangentPoint retract(const ManifoldModel& model, const HamiltonianField& h0, CotangentPoint z) {
  project_constraints(model, z.base, z.momentum);
  const double hv = h0(z);
  if (!(hv > 0)) throw NumericalError("descent left the positivity region");
  z.momentum = (1.0 / hv) * z.momentum;
  return z;
}

}  // namespace

ClosedCharacteristic find_closed_characteristic(const StarHamiltonian& ham,
                                                const PeriodicFlow& model_flow,
                                                const CosphereGrid& grid,
                                                const ClosedCharacteristicOptions& options) {
  const ManifoldModel& model = grid.model();
  auto rho = [&ham](const CotangentPoint& z) {
    const double h = ham(z);
    if (!(h > 0)) throw InvariantError("Hamiltonian must be positive on the cosphere bundle");
    return 1.0 / h;
  };

  // radial field must be constant along the model flow
  {
    auto rng = make_rng(7, 0xcc);
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    for (int probe = 0; probe < 8; ++probe) {
      CotangentPoint z = grid.node(pick(rng));
      Trajectory orbit = integrate_flow(model_flow.field, z, model_flow.period,
                                        model_flow.period / 64.0, /*stride=*/1);
      const double r0 = rho(orbit.samples.front());
      for (const CotangentPoint& w : orbit.samples) {
        if (std::fabs(rho(w) - r0) > options.flow_invariance_tol * r0)
          throw InvariantError("radial function is not invariant along the model flow");
      }
    }
  }

  // coarse argmin of rho over the grid
  std::size_t best = 0;
  double best_rho = 1e300;
  for (std::size_t i = 0; i < grid.size(); i += options.scan_stride) {
    const double r = rho(grid.node(i));
    if (r < best_rho) {
      best_rho = r;
      best = i;
    }
  }

  // local refinement: projected gradient descent along the cosphere bundle
  CotangentPoint z = retract(model, model_flow.field, grid.node(best));
  double fz = rho(z);
  const int d = model.ambient_dim();
  for (int it = 0; it < options.descent_steps; ++it) {
    Vec gx = Vec::zero(static_cast<std::size_t>(d)), gp = gx;
    CotangentPoint w = z;
    const double h = 1e-6;
    for (int i = 0; i < d; ++i) {
      const auto is = static_cast<std::size_t>(i);
      w.base[is] = z.base[is] + h;
      const double fp = rho(retract(model, model_flow.field, w));
      w.base[is] = z.base[is] - h;
      const double fm = rho(retract(model, model_flow.field, w));
      w.base[is] = z.base[is];
      gx[is] = (fp - fm) / (2 * h);
      w.momentum[is] = z.momentum[is] + h;
      const double fpp = rho(retract(model, model_flow.field, w));
      w.momentum[is] = z.momentum[is] - h;
      const double fpm = rho(retract(model, model_flow.field, w));
      w.momentum[is] = z.momentum[is];
      gp[is] = (fpp - fpm) / (2 * h);
    }
    project_tangent(model, model_flow.field, z, gx, gp);
    const double gn = std::sqrt(norm2(gx) + norm2(gp));
    if (gn < 1e-9 * (1.0 + std::fabs(fz))) break;
    double alpha = 0.1;
    bool moved = false;
    for (int ls = 0; ls < 25; ++ls) {
      CotangentPoint cand = retract(
          model, model_flow.field, CotangentPoint{z.base - alpha * gx, z.momentum - alpha * gp});
      const double fc = rho(cand);
      if (fc < fz - 1e-4 * alpha * gn * gn) {
        z = cand;
        fz = fc;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }

  // model characteristic through the minimizer, scaled by lambda = min rho
  const double lambda = fz;
  Trajectory sigma = integrate_flow(model_flow.field, z, model_flow.period,
                                    model_flow.period / options.orbit_steps, /*stride=*/1);
  if (!closes_up(model, sigma.samples.front(), sigma.back(), 1e-6))
    throw NumericalError("model characteristic failed to close");

  ClosedCharacteristic out;
  out.lambda = lambda;
  out.minimizer = z;
  out.action = lambda * sigma.action;

  Trajectory gamma;
  gamma.dt = lambda * sigma.dt;
  gamma.level = 1.0;
  gamma.times.reserve(sigma.times.size());
  gamma.samples.reserve(sigma.samples.size());
  for (std::size_t i = 0; i < sigma.samples.size(); ++i) {
    gamma.times.push_back(lambda * sigma.times[i]);
    CotangentPoint w = sigma.samples[i];
    w.momentum = lambda * w.momentum;
    gamma.samples.push_back(w);
    gamma.h_drift = std::max(gamma.h_drift, std::fabs(ham(w) - 1.0));
  }
  gamma.action = out.action;

  // verify Hamilton's equations for H along the scaled curve
  HamiltonianField hf = make_field(model, ham);
  double residual = 0;
  const std::size_t stride = std::max<std::size_t>(1, gamma.samples.size() / 64);
  for (std::size_t i = stride; i + stride < gamma.samples.size(); i += stride) {
    const double ds = gamma.times[i + 1] - gamma.times[i - 1];
    Vec dx = (1.0 / ds) * (gamma.samples[i + 1].base - gamma.samples[i - 1].base);
    Vec dp = (1.0 / ds) * (gamma.samples[i + 1].momentum - gamma.samples[i - 1].momentum);
    Vec xdot, pdot;
    hamiltonian_vector_field(hf, gamma.samples[i], xdot, pdot);
    const double scale = std::max({1.0, norm(xdot), norm(pdot)});
    residual = std::max(residual, (norm(dx - xdot) + norm(dp - pdot)) / scale);
  }
  out.hamilton_residual = residual;
  if (residual > options.residual_tol)
    throw NumericalError("closed characteristic failed Hamilton's equations check: residual " +
                         std::to_string(residual));
  out.trajectory = std::move(gamma);
  return out;
}

}  // namespace starvol::dynamics
