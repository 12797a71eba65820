#include "starvol/finsler.hpp"

#include <cmath>

namespace starvol::finsler {

namespace {

// Orthonormal basis of the fiber plane used for angle parametrizations.
// Tori have 2-dimensional fibers only when dim == 2; sphere models always do.
void fiber_plane(const ManifoldModel& model, const Vec& x, Vec& e1, Vec& e2) {
  if (model.sphere_based()) {
    Vec xh = normalized(x);
    std::size_t k = 0;
    for (std::size_t i = 1; i < 3; ++i)
      if (std::fabs(xh[i]) < std::fabs(xh[k])) k = i;
    Vec axis = Vec::zero(3);
    axis[k] = 1.0;
    e1 = normalized(axis - dot(axis, xh) * xh);
    e2 = cross3(xh, e1);
  } else {
    e1 = Vec{1.0, 0.0};
    e2 = Vec{0.0, 1.0};
  }
}

int fiber_dim(const ManifoldModel& model) { return model.sphere_based() ? 2 : model.dim; }

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double width, int& iterations, int budget) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > width && iterations < budget) {
    ++iterations;
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Maximizes dot(target, u)/norm(u) over unit fiber vectors u at base point x.
// This is the support function of the unit ball of `norm`.
LegendreResult maximize_ratio(const ManifoldModel& model,
                              const std::function<double(const Vec&, const Vec&)>& norm_fn,
                              const Vec& x, const Vec& target) {
  LegendreResult res;
  const int budget = 200;

  if (norm(target) == 0) {
    res.value = 0;
    res.converged = true;
    return res;
  }

  if (fiber_dim(model) == 2) {
    Vec e1, e2;
    fiber_plane(model, x, e1, e2);
    auto f = [&](double th) {
      Vec u = std::cos(th) * e1 + std::sin(th) * e2;
      const double n = norm_fn(x, u);
      if (!(n > 0) || !std::isfinite(n))
        throw InvariantError("fiber norm must be positive on the unit sphere");
      return dot(target, u) / n;
    };
    const int coarse = 64;
    double best_th = 0, best = -1e300;
    for (int k = 0; k < coarse; ++k) {
      double th = 2.0 * kPi * k / coarse;
      double v = f(th);
      if (v > best) {
        best = v;
        best_th = th;
      }
      ++res.iterations;
    }
    const double delta = 2.0 * kPi / coarse;
    double th = golden_section_max(f, best_th - delta, best_th + delta, 1e-8, res.iterations,
                                   budget);
    // Newton polish on the angle
    const double h = 1e-5;
    for (int it = 0; it < 8 && res.iterations < budget; ++it, ++res.iterations) {
      const double fp = f(th + h), fm = f(th - h), f0 = f(th);
      const double d1 = (fp - fm) / (2 * h);
      const double d2 = (fp - 2 * f0 + fm) / (h * h);
      if (!(d2 < 0)) break;
      const double step = d1 / d2;
      th -= step;
      if (std::fabs(step) < 1e-12) break;
    }
    res.value = std::max(f(th), best);
    res.converged = res.iterations < budget;
    return res;
  }

  // higher-dimensional torus fibers: multistart projected Newton on S^{n-1}
  const int n = model.dim;
  auto g = [&](const Vec& u) {
    const double nv = norm_fn(x, u);
    if (!(nv > 0) || !std::isfinite(nv))
      throw InvariantError("fiber norm must be positive on the unit sphere");
    return dot(target, u) / nv;
  };
  auto rng = make_rng(0xf1be, static_cast<std::uint64_t>(n));
  std::normal_distribution<double> gauss(0, 1);

  double best = -1e300;
  bool converged = false;
  const int starts = 8;
  for (int s = 0; s < starts; ++s) {
    Vec u = normalized(target);
    if (s > 0) {
      Vec r = Vec::zero(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = gauss(rng);
      u = normalized(u + 0.9 * normalized(r));
    }
    double fu = g(u);
    bool ok = false;
    while (res.iterations < budget) {
      ++res.iterations;
      // ambient FD gradient, projected to the tangent space of the sphere
      Vec grad = Vec::zero(static_cast<std::size_t>(n));
      const double h = 1e-6;
      for (int i = 0; i < n; ++i) {
        Vec up = u, um = u;
        up[static_cast<std::size_t>(i)] += h;
        um[static_cast<std::size_t>(i)] -= h;
        grad[static_cast<std::size_t>(i)] = (g(up) - g(um)) / (2 * h);
      }
      Vec gt = grad - dot(grad, u) * u;
      if (norm(gt) <= 1e-11 * (1.0 + std::fabs(fu))) {
        ok = true;
        break;
      }
      // backtracking ascent along the projected gradient
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 30; ++ls) {
        Vec cand = normalized(u + step * gt);
        const double fc = g(cand);
        if (fc > fu + 1e-4 * step * norm2(gt)) {
          u = cand;
          fu = fc;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) {
        ok = true;
        break;
      }
    }
    best = std::max(best, fu);
    converged = converged || ok;
  }
  res.value = best;
  res.converged = converged && res.iterations < budget;
  return res;
}

}  // namespace

// ---- metric families -----------------------------------------------------------------

FinslerMetric euclidean_metric(const ManifoldModel& model) {
  FinslerMetric m;
  m.model = model;
  m.evaluator = [model](const CotangentPoint& zv) {
    return model.momentum_norm(zv.base, zv.momentum);
  };
  m.reversible = true;
  m.smooth = true;
  m.kind = MetricKind::Euclidean;
  m.description = "euclidean";
  return m;
}

FinslerMetric quadratic_metric(const ManifoldModel& model, double a, double b) {
  if (model.sphere_based() || model.dim != 2)
    throw UnsupportedError("quadratic(a,b) metric is defined on 2-tori");
  if (!(a > 0) || !(b > 0)) throw ConfigError("quadratic metric needs positive semi-axes");
  FinslerMetric m;
  m.model = model;
  m.evaluator = [a, b](const CotangentPoint& zv) {
    const double v0 = zv.momentum[0] / a, v1 = zv.momentum[1] / b;
    return std::sqrt(v0 * v0 + v1 * v1);
  };
  m.reversible = true;
  m.smooth = true;
  m.kind = MetricKind::Quadratic;
  m.quad_a = a;
  m.quad_b = b;
  m.description = "quadratic(a=" + std::to_string(a) + ",b=" + std::to_string(b) + ")";
  return m;
}

FinslerMetric conformal_metric(const ManifoldModel& model, std::function<double(const Vec&)> rho,
                               std::string description) {
  FinslerMetric m;
  m.model = model;
  m.conformal_rho = rho;
  // sphere models: evaluate at the normalized cover point (no sign
  // canonicalization, which would silently fold odd factors)
  m.evaluator = [model, rho](const CotangentPoint& zv) {
    const Vec x = model.sphere_based() ? normalized(zv.base) : model.reduce_base(zv.base);
    const double r = rho(x);
    if (!(r > 0)) throw InvariantError("conformal factor must be positive");
    return r * model.momentum_norm(zv.base, zv.momentum);
  };
  m.reversible = true;
  m.smooth = true;
  m.kind = MetricKind::Conformal;
  m.description = std::move(description);
  return m;
}

FinslerMetric conformal_metric_expr(const ManifoldModel& model, const exprlang::Expr& rho) {
  const std::size_t d = static_cast<std::size_t>(model.ambient_dim());
  auto fn = [rho, d](const Vec& x) {
    double vals[kMaxDim];
    for (std::size_t i = 0; i < d; ++i) vals[i] = x[i];
    return rho.eval({vals, d});
  };
  return conformal_metric(model, fn, "conformal(" + rho.source() + ")");
}

FinslerMetric randers_metric(const ManifoldModel& model, const Vec& b) {
  if (model.sphere_based()) throw UnsupportedError("Randers metrics are defined on flat tori");
  if (!(norm(b) < 1)) throw ConfigError("Randers drift must satisfy |b| < 1");
  FinslerMetric m;
  m.model = model;
  m.randers_b = b;
  m.evaluator = [b](const CotangentPoint& zv) { return norm(zv.momentum) + dot(b, zv.momentum); };
  m.reversible = norm(b) == 0;
  m.smooth = true;
  m.kind = MetricKind::Randers;
  m.description = "randers";
  return m;
}

FinslerMetric custom_metric(const ManifoldModel& model, const exprlang::Expr& lagrangian,
                            bool reversible, bool smooth) {
  StarHamiltonian h = starbody::hamiltonian_from_expr(model, lagrangian, smooth, reversible);
  FinslerMetric m;
  m.model = model;
  m.evaluator = h.evaluator;
  m.reversible = reversible;
  m.smooth = smooth;
  m.kind = MetricKind::Custom;
  m.description = "custom(" + lagrangian.source() + ")";
  return m;
}

void audit_reversibility(const FinslerMetric& metric, std::uint64_t seed, int probes, double tol) {
  auto rng = make_rng(seed, 0x7265);
  std::normal_distribution<double> gauss(0, 1);
  std::uniform_real_distribution<double> unif(0, 1);
  const ManifoldModel& model = metric.model;
  for (int i = 0; i < probes; ++i) {
    Vec x;
    if (model.sphere_based()) {
      x = Vec::zero(3);
      for (int k = 0; k < 3; ++k) x[static_cast<std::size_t>(k)] = gauss(rng);
      x = normalized(x);
    } else {
      x = Vec::zero(static_cast<std::size_t>(model.dim));
      for (int k = 0; k < model.dim; ++k)
        x[static_cast<std::size_t>(k)] = model.periods[static_cast<std::size_t>(k)] * unif(rng);
    }
    Vec e1, e2;
    fiber_plane(model, x, e1, e2);
    const double th = 2 * kPi * unif(rng);
    Vec v = std::cos(th) * e1 + std::sin(th) * e2;
    if (!model.sphere_based() && model.dim > 2) {
      v = Vec::zero(static_cast<std::size_t>(model.dim));
      for (int k = 0; k < model.dim; ++k) v[static_cast<std::size_t>(k)] = gauss(rng);
      v = normalized(v);
    }
    const double fwd = metric(x, v), bwd = metric(x, -v);
    if (!(std::fabs(fwd - bwd) < tol * fwd))
      throw InvariantError("metric failed the reversibility audit");
  }
}

// ---- Legendre duality ------------------------------------------------------------------

LegendreResult legendre_dual(const FinslerMetric& metric, const Vec& x, const Vec& p) {
  return maximize_ratio(
      metric.model, [&metric](const Vec& bx, const Vec& u) { return metric(bx, u); }, x, p);
}

LegendreResult legendre_inverse(const StarHamiltonian& ham, const ManifoldModel& model,
                                const Vec& x, const Vec& v) {
  return maximize_ratio(
      model, [&ham](const Vec& bx, const Vec& u) { return ham(CotangentPoint{bx, u}); }, x, v);
}

OpticalHamiltonian dual_hamiltonian(const FinslerMetric& metric) {
  OpticalHamiltonian oh;
  FinslerMetric copy = metric;
  oh.ham.evaluator = [copy](const CotangentPoint& z) {
    return legendre_dual(copy, z.base, z.momentum).value;
  };
  oh.ham.smooth = metric.smooth;
  oh.ham.reversible = metric.reversible;
  oh.ham.description = "dual(" + metric.description + ")";
  return oh;
}

FinslerMetric metric_from_hamiltonian(const ManifoldModel& model, const StarHamiltonian& ham,
                                      std::string description) {
  FinslerMetric m;
  m.model = model;
  StarHamiltonian copy = ham;
  m.evaluator = [copy, model](const CotangentPoint& zv) {
    return legendre_inverse(copy, model, zv.base, zv.momentum).value;
  };
  m.reversible = ham.reversible;
  m.smooth = ham.smooth;
  m.kind = MetricKind::Custom;
  m.description = std::move(description);
  return m;
}

ConvexityCertificate check_quadratic_convexity(const FinslerMetric& metric, const Vec& x,
                                               int samples) {
  if (fiber_dim(metric.model) != 2)
    throw UnsupportedError("convexity certificate implemented for 2-dimensional fibers");
  if (!metric.smooth) throw NumericalError("convexity check requires a smooth evaluator");
  Vec e1, e2;
  fiber_plane(metric.model, x, e1, e2);

  const int N = samples;
  std::vector<double> cx(static_cast<std::size_t>(N)), cy(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    const double th = 2.0 * kPi * k / N;
    Vec u = std::cos(th) * e1 + std::sin(th) * e2;
    const double L = metric(x, u);
    if (!(L > 0) || !std::isfinite(L))
      throw NumericalError("metric not positive on the unit fiber sphere");
    cx[static_cast<std::size_t>(k)] = std::cos(th) / L;
    cy[static_cast<std::size_t>(k)] = std::sin(th) / L;
  }
  const double h = 2.0 * kPi / N;
  auto at = [N](int i) { return static_cast<std::size_t>(((i % N) + N) % N); };
  double min_curv = 1e300;
  for (int k = 0; k < N; ++k) {
    // 4th-order centered differences on the periodic samples
    auto d1 = [&](const std::vector<double>& f) {
      return (-f[at(k + 2)] + 8 * f[at(k + 1)] - 8 * f[at(k - 1)] + f[at(k - 2)]) / (12 * h);
    };
    auto d2 = [&](const std::vector<double>& f) {
      return (-f[at(k + 2)] + 16 * f[at(k + 1)] - 30 * f[at(k)] + 16 * f[at(k - 1)] -
              f[at(k - 2)]) /
             (12 * h * h);
    };
    const double xp = d1(cx), yp = d1(cy), xpp = d2(cx), ypp = d2(cy);
    const double speed2 = xp * xp + yp * yp;
    if (!(speed2 > 0)) throw NumericalError("degenerate boundary parametrization");
    const double curv = (xp * ypp - yp * xpp) / std::pow(speed2, 1.5);
    if (!std::isfinite(curv)) throw NumericalError("finite-difference blowup in curvature");
    min_curv = std::min(min_curv, curv);
  }
  ConvexityCertificate cert;
  cert.min_curvature = min_curv;
  cert.positive = min_curv > 1e-6;
  return cert;
}

// ---- volumes ---------------------------------------------------------------------------

StarBody dual_body(const FinslerMetric& metric, GridPtr grid) {
  if (!(metric.model == grid->model()))
    throw GridMismatch("metric and grid live on different models");
  OpticalHamiltonian oh = dual_hamiltonian(metric);
  return starbody::body_from_hamiltonian(oh.ham, std::move(grid), /*audit=*/false);
}

double holmes_thompson_volume(const FinslerMetric& metric, GridPtr grid) {
  const int n = grid->model().dim;
  return dualvol::volume(dual_body(metric, std::move(grid))) / geometry::euclidean_ball_volume(n);
}

double busemann_volume(const FinslerMetric& metric, const BaseGrid& base, int fiber_samples) {
  if (metric.model.dim != 2)
    throw UnsupportedError("Busemann volume implemented for 2-dimensional bases");
  if (!metric.reversible) throw UnsupportedError("Busemann volume requires a reversible metric");
  const double eps2 = kPi;
  std::vector<double> terms(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const Vec x = base.point(i);
    Vec e1, e2;
    fiber_plane(metric.model, x, e1, e2);
    double area = 0;
    for (int k = 0; k < fiber_samples; ++k) {
      const double th = 2.0 * kPi * k / fiber_samples;
      Vec u = std::cos(th) * e1 + std::sin(th) * e2;
      const double L = metric(x, u);
      if (!(L > 0)) throw InvariantError("metric must be positive off the zero section");
      area += 0.5 / (L * L);
    }
    area *= 2.0 * kPi / fiber_samples;
    terms[i] = base.weights[i] * eps2 / area;
  }
  return pairwise_sum(terms);
}

double dmv_metrics(const FinslerMetric& l1, const FinslerMetric& l2, int k, GridPtr grid) {
  StarBody a = dual_body(l1, grid);
  StarBody b = dual_body(l2, grid);
  return dualvol::dmv_k(a, b, k);
}

double emv_metric(const FinslerMetric& metric, int k, GridPtr grid) {
  StarBody a = dual_body(metric, grid);
  return dualvol::w_tilde_k(a, k);
}

}  // namespace starvol::finsler
