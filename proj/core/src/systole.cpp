#include "starvol/systole.hpp"

#include <algorithm>
#include <cmath>

namespace starvol::systole {

using finsler::MetricKind;

namespace {

using geometry::ManifoldKind;

Vec class_displacement(const ManifoldModel& model, const LoopClass& cls) {
  Vec d = Vec::zero(static_cast<std::size_t>(model.dim));
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = cls.z.at(i) * model.periods[i];
  return d;
}

double segment_length_torus(const FinslerMetric& metric, const Vec& a, const Vec& b) {
  Vec delta = b - a;
  if (norm(delta) < 1e-14) throw NumericalError("degenerate polygon segment");
  return metric(0.5 * (a + b), delta);
}

// Geodesic-arc segment on the sphere cover: length of the round arc times the
// metric evaluated at the arc midpoint in the arc direction.
double segment_length_sphere(const FinslerMetric& metric, const Vec& a, const Vec& b) {
  const double theta = std::atan2(norm(cross3(a, b)), dot(a, b));
  if (theta < 1e-14) throw NumericalError("degenerate polygon segment");
  Vec mid = a + b;
  if (norm(mid) < 1e-8) throw NumericalError("segment spans nearly antipodal points");
  mid = normalized(mid);
  Vec dir = (b - a) - dot(b - a, mid) * mid;
  if (norm(dir) < 1e-14) throw NumericalError("degenerate polygon segment");
  return metric(mid, theta * normalized(dir));
}

double min_conformal_factor(const FinslerMetric& metric, std::span<const Vec> extra_points) {
  if (!metric.conformal_rho && metric.kind != MetricKind::Euclidean) return 0;
  auto rho = [&](const Vec& x) {
    if (!metric.conformal_rho) return 1.0;
    return metric.conformal_rho(metric.model.sphere_based() ? normalized(x)
                                                            : metric.model.reduce_base(x));
  };
  double lo = 1e300;
  const ManifoldModel& model = metric.model;
  if (model.sphere_based()) {
    geometry::GridResolution res;
    res.sphere_refine = 4;
    res.fiber = 4;
    geometry::BaseGrid base = geometry::build_base_grid(model, res);
    for (std::size_t i = 0; i < base.size(); ++i) lo = std::min(lo, rho(base.point(i)));
  } else {
    const int per_axis = model.dim == 2 ? 256 : 48;
    std::vector<int> idx(static_cast<std::size_t>(model.dim), 0);
    while (true) {
      Vec x = Vec::zero(static_cast<std::size_t>(model.dim));
      for (int i = 0; i < model.dim; ++i) {
        const auto is = static_cast<std::size_t>(i);
        x[is] = model.periods[is] * idx[is] / per_axis;
      }
      lo = std::min(lo, rho(x));
      std::size_t j = 0;
      for (; j < idx.size(); ++j) {
        if (++idx[j] < per_axis) break;
        idx[j] = 0;
      }
      if (j == idx.size()) break;
    }
  }
  for (const Vec& x : extra_points) lo = std::min(lo, rho(x));
  return lo;
}

// Midpoints of the current polygon; the conformal lower bound includes them so
// the bound never exceeds the discrete length it certifies.
std::vector<Vec> polygon_midpoints(const ManifoldModel& model, std::span<const Vec> polygon,
                                   const LoopClass& cls) {
  std::vector<Vec> mids;
  const std::size_t m = polygon.size();
  for (std::size_t i = 0; i < m; ++i) {
    Vec a = polygon[i];
    Vec b;
    if (model.sphere_based()) {
      b = i + 1 < m ? polygon[i + 1] : -polygon[0];
      Vec s = a + b;
      if (norm(s) < 1e-8) continue;
      mids.push_back(normalized(s));
    } else {
      b = i + 1 < m ? polygon[i + 1] : polygon[0] + class_displacement(model, cls);
      mids.push_back(0.5 * (a + b));
    }
  }
  return mids;
}

}  // namespace

double loop_length(const FinslerMetric& metric, std::span<const Vec> polygon,
                   const LoopClass& cls) {
  if (metric.model.sphere_based()) return loop_length_sphere(metric, polygon);
  if (polygon.size() < 8) throw Error("polygon needs at least 8 vertices");
  if (!cls.is_torus_class()) throw Error("torus loops need a nonzero class vector");
  bool nonzero = false;
  for (int zi : cls.z) nonzero = nonzero || zi != 0;
  if (!nonzero) throw Error("torus class vector must be nonzero");

  const Vec shift = class_displacement(metric.model, cls);
  double len = 0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec& a = polygon[i];
    const Vec b = i + 1 < polygon.size() ? polygon[i + 1] : polygon[0] + shift;
    len += segment_length_torus(metric, a, b);
  }
  return len;
}

double loop_length_sphere(const FinslerMetric& metric, std::span<const Vec> polygon) {
  if (polygon.size() < 8) throw Error("polygon needs at least 8 vertices");
  double len = 0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec& a = polygon[i];
    const Vec b = i + 1 < polygon.size() ? polygon[i + 1] : -polygon[0];
    len += segment_length_sphere(metric, a, b);
  }
  return len;
}

// ---- torus minimization -----------------------------------------------------------

namespace {

struct TorusLoop {
  const FinslerMetric& metric;
  Vec shift;
  std::vector<Vec> v;

  double segment(std::size_t i) const {
    const Vec& a = v[i];
    const Vec b = i + 1 < v.size() ? v[i + 1] : v[0] + shift;
    return segment_length_torus(metric, a, b);
  }
  double total() const {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) s += segment(i);
    return s;
  }
};

// Equal-chord resampling in the covering chart; also the upsampler.
std::vector<Vec> resample_torus(std::span<const Vec> v, const Vec& shift, std::size_t out_m) {
  const std::size_t m = v.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec b = i + 1 < m ? v[i + 1] : v[0] + shift;
    cum[i + 1] = cum[i] + norm(b - v[i]);
  }
  const double total = cum[m];
  std::vector<Vec> fresh(out_m);
  fresh[0] = v[0];
  if (total < 1e-12) {
    for (std::size_t i = 0; i < out_m; ++i) fresh[i] = v[i * m / out_m];
    return fresh;
  }
  std::size_t seg = 0;
  for (std::size_t i = 1; i < out_m; ++i) {
    const double target = total * static_cast<double>(i) / static_cast<double>(out_m);
    while (seg + 1 < m && cum[seg + 1] < target) ++seg;
    const Vec& a = v[seg];
    const Vec b = seg + 1 < m ? v[seg + 1] : v[0] + shift;
    const double span = cum[seg + 1] - cum[seg];
    const double t = span > 1e-14 ? (target - cum[seg]) / span : 0.0;
    fresh[i] = a + t * (b - a);
  }
  return fresh;
}

// One gradient-descent run; returns (length, converged).
std::pair<double, bool> descend_torus(TorusLoop& loop, const MinimizeOptions& opt) {
  const std::size_t m = loop.v.size();
  const int n = static_cast<int>(loop.v[0].size());
  std::vector<Vec> grad(m, Vec::zero(static_cast<std::size_t>(n)));
  double len = loop.total();
  double alpha = 0.1;
  bool converged = false;
  double prev = 1e300;
  int stall = 0;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    // local FD gradient: moving vertex i only changes segments i-1 and i
    double gmax = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t prior = (i + m - 1) % m;
      for (int c = 0; c < n; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        const double h = opt.fd_step * std::max(1.0, std::fabs(loop.v[i][cs]));
        const double keep = loop.v[i][cs];
        loop.v[i][cs] = keep + h;
        const double up = loop.segment(prior) + loop.segment(i);
        loop.v[i][cs] = keep - h;
        const double dn = loop.segment(prior) + loop.segment(i);
        loop.v[i][cs] = keep;
        grad[i][cs] = (up - dn) / (2 * h);
        gmax = std::max(gmax, std::fabs(grad[i][cs]));
      }
    }
    if (gmax < opt.grad_tol * len) {
      converged = true;
      break;
    }
    double g2 = 0;
    for (const Vec& g : grad) g2 += norm2(g);

    alpha = std::min(alpha * 2.0, 1.0);
    bool moved = false;
    std::vector<Vec> backup = loop.v;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < m; ++i) loop.v[i] = backup[i] - alpha * grad[i];
      const double cand = loop.total();
      if (cand < len - 1e-4 * alpha * g2) {
        len = cand;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      loop.v = backup;
      converged = gmax < 10 * opt.grad_tol * len;
      break;
    }
    const double gain = prev - len;
    stall = (gain < 3e-10 * len) ? stall + 1 : 0;
    prev = len;
    if (stall >= 3) {
      converged = true;
      break;
    }
    if ((iter + 1) % 8 == 0 && gain > 1e-9 * len)
      loop.v = resample_torus(loop.v, loop.shift, m);
  }
  return {len, converged};
}

}  // namespace

SystoleEstimate systole_torus(const FinslerMetric& metric, const LoopClass& cls, int m,
                              int restarts, std::uint64_t seed, const MinimizeOptions& options) {
  if (metric.model.sphere_based())
    throw UnsupportedError("systole_torus needs a flat torus model");
  const ManifoldModel& model = metric.model;
  const int n = model.dim;
  if (static_cast<int>(cls.z.size()) != n) throw Error("class vector has wrong dimension");
  bool nonzero = false;
  for (int zi : cls.z) nonzero = nonzero || zi != 0;
  if (!nonzero) throw Error("class vector must be nonzero");
  if (m < 8) throw Error("polygon needs at least 8 vertices");

  const Vec shift = class_displacement(model, cls);
  SystoleEstimate best;
  best.length = 1e300;
  best.cls = cls;

  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto rng = make_rng(seed, 0x740 + static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> unif(0, 1);
    std::normal_distribution<double> gauss(0, 1);
    TorusLoop loop{metric, shift, {}};
    std::size_t level_m = std::min<std::size_t>(12, static_cast<std::size_t>(m));
    loop.v.resize(level_m);
    Vec x0 = Vec::zero(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c)
      x0[static_cast<std::size_t>(c)] = model.periods[static_cast<std::size_t>(c)] * unif(rng);
    const double wiggle = r == 0 ? 0.0 : 0.02 * norm(shift);
    for (std::size_t i = 0; i < level_m; ++i) {
      Vec p = x0 + (static_cast<double>(i) / static_cast<double>(level_m)) * shift;
      if (wiggle > 0)
        for (int c = 0; c < n; ++c) p[static_cast<std::size_t>(c)] += wiggle * gauss(rng);
      loop.v[i] = p;
    }
    double len = 0;
    bool conv = false;
    while (true) {
      std::tie(len, conv) = descend_torus(loop, options);
      if (level_m >= static_cast<std::size_t>(m)) break;
      level_m = std::min<std::size_t>(2 * level_m, static_cast<std::size_t>(m));
      loop.v = resample_torus(loop.v, shift, level_m);
    }
    if (len < best.length) {
      best.length = len;
      best.polygon = loop.v;
      best.converged = conv;
    }
  }

  auto mids = polygon_midpoints(model, best.polygon, cls);
  const double min_rho = min_conformal_factor(metric, mids);
  best.lower_bound = min_rho > 0 ? min_rho * norm(shift) : 0.0;
  return best;
}

SystoleEstimate systole_torus_all(const FinslerMetric& metric, int m, int restarts,
                                  std::uint64_t seed, int zmax, const MinimizeOptions& options) {
  const ManifoldModel& model = metric.model;
  const int n = model.dim;

  struct Candidate {
    LoopClass cls;
    double flat_len;
  };
  std::vector<Candidate> classes;
  std::vector<int> z(static_cast<std::size_t>(n), -zmax);
  while (true) {
    bool nonzero = false;
    for (int zi : z) nonzero = nonzero || zi != 0;
    if (nonzero) {
      bool keep = true;
      if (metric.reversible) {
        // skip -z: identical length for reversible metrics
        for (int zi : z) {
          if (zi > 0) break;
          if (zi < 0) {
            keep = false;
            break;
          }
        }
      }
      if (keep) {
        LoopClass cls{z};
        classes.push_back({cls, norm(class_displacement(model, cls))});
      }
    }
    std::size_t j = 0;
    for (; j < z.size(); ++j) {
      if (++z[j] <= zmax) break;
      z[j] = -zmax;
    }
    if (j == z.size()) break;
  }
  std::sort(classes.begin(), classes.end(),
            [](const Candidate& a, const Candidate& b) { return a.flat_len < b.flat_len; });

  const double min_rho = min_conformal_factor(metric, {});
  SystoleEstimate best;
  best.length = 1e300;
  for (const Candidate& cand : classes) {
    if (min_rho > 0 && 0.99 * min_rho * cand.flat_len >= best.length) continue;
    SystoleEstimate est = systole_torus(metric, cand.cls, m, restarts, seed, options);
    if (est.length < best.length) best = est;
  }
  return best;
}

// ---- RP2 minimization ----------------------------------------------------------------

namespace {

void sphere_frame(const Vec& x, Vec& e1, Vec& e2) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::fabs(x[i]) < std::fabs(x[k])) k = i;
  Vec axis = Vec::zero(3);
  axis[k] = 1.0;
  e1 = normalized(axis - dot(axis, x) * x);
  e2 = cross3(x, e1);
}

struct SpherePath {
  const FinslerMetric& metric;
  std::vector<Vec> v;  // v[0] .. v[m-1]; endpoint is -v[0]

  double segment(std::size_t i) const {
    const Vec& a = v[i];
    const Vec b = i + 1 < v.size() ? v[i + 1] : -v[0];
    return segment_length_sphere(metric, a, b);
  }
  double total() const {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) s += segment(i);
    return s;
  }
  // Segments affected by vertex i: (i-1, i) and for i = 0 also the closing one.
  double local(std::size_t i) const {
    double s = segment(i);
    s += segment((i + v.size() - 1) % v.size());
    return s;
  }
};

// Spherical interpolation between unit vectors.
Vec slerp(const Vec& a, const Vec& b, double t) {
  const double ang = std::atan2(norm(cross3(a, b)), dot(a, b));
  if (ang < 1e-12) return a;
  const double s = std::sin(ang);
  return normalized((std::sin((1 - t) * ang) / s) * a + (std::sin(t * ang) / s) * b);
}

// Resamples the path at equal round-metric arc spacing with `out_m` vertices.
// Doubles as the tangential redistribution (out_m = current size) and as the
// coarse-to-fine upsampler.
std::vector<Vec> resample_sphere(std::span<const Vec> v, std::size_t out_m) {
  const std::size_t m = v.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec& a = v[i];
    const Vec b = i + 1 < m ? v[i + 1] : -v[0];
    cum[i + 1] = cum[i] + std::atan2(norm(cross3(a, b)), dot(a, b));
  }
  const double total = cum[m];
  std::vector<Vec> fresh(out_m);
  fresh[0] = v[0];
  if (total < 1e-12) {
    for (std::size_t i = 0; i < out_m; ++i) fresh[i] = v[i * m / out_m];
    return fresh;
  }
  std::size_t seg = 0;
  for (std::size_t i = 1; i < out_m; ++i) {
    const double target = total * static_cast<double>(i) / static_cast<double>(out_m);
    while (seg + 1 < m && cum[seg + 1] < target) ++seg;
    const Vec& a = v[seg];
    const Vec b = seg + 1 < m ? v[seg + 1] : -v[0];
    const double span = cum[seg + 1] - cum[seg];
    const double t = span > 1e-14 ? (target - cum[seg]) / span : 0.0;
    fresh[i] = slerp(a, b, t);
  }
  return fresh;
}

void redistribute(SpherePath& path) { path.v = resample_sphere(path.v, path.v.size()); }

// Per-vertex descent sweeps with backtracking, interleaved with equal-arc
// redistribution.
std::pair<double, bool> descend_sphere(SpherePath& path, const MinimizeOptions& opt) {
  const std::size_t m = path.v.size();
  bool converged = false;
  const double alpha = 0.25;
  double prev = 1e300;
  int stall = 0;

  for (int sweep = 0; sweep < opt.max_iterations; ++sweep) {
    double gmax = 0;
    bool any_move = false;
    for (std::size_t i = 0; i < m; ++i) {
      Vec e1, e2;
      sphere_frame(path.v[i], e1, e2);
      const Vec keep = path.v[i];
      const double h = opt.fd_step;
      double g[2];
      for (int c = 0; c < 2; ++c) {
        const Vec& dir = c == 0 ? e1 : e2;
        path.v[i] = normalized(keep + h * dir);
        const double up = path.local(i);
        path.v[i] = normalized(keep - h * dir);
        const double dn = path.local(i);
        path.v[i] = keep;
        g[c] = (up - dn) / (2 * h);
        gmax = std::max(gmax, std::fabs(g[c]));
      }
      const double g2 = g[0] * g[0] + g[1] * g[1];
      if (g2 == 0) continue;
      const double before = path.local(i);
      double step = alpha;
      for (int ls = 0; ls < 20; ++ls) {
        path.v[i] = normalized(keep - (step * g[0]) * e1 - (step * g[1]) * e2);
        if (path.local(i) < before - 1e-4 * step * g2) {
          any_move = true;
          break;
        }
        step *= 0.5;
        path.v[i] = keep;
      }
    }
    const double len = path.total();
    if (gmax < opt.grad_tol * len) {
      converged = true;
      break;
    }
    // the descent has stopped making measurable progress
    const double gain = prev - len;
    stall = (gain < 3e-10 * len) ? stall + 1 : 0;
    prev = len;
    if (stall >= 3 || !any_move) {
      converged = true;
      break;
    }
    if ((sweep + 1) % 8 == 0 && gain > 1e-9 * len) redistribute(path);
  }
  return {path.total(), converged};
}

}  // namespace

SystoleEstimate systole_rp2(const FinslerMetric& metric, int m, int restarts, std::uint64_t seed,
                            const MinimizeOptions& options) {
  if (metric.model.kind != ManifoldKind::ProjectivePlane2)
    throw UnsupportedError("systole_rp2 needs the projective-plane model");
  if (metric.kind != MetricKind::Conformal && metric.kind != MetricKind::Euclidean)
    throw UnsupportedError("RP2 systole is implemented for metrics conformal to the round one");
  if (m < 8) throw Error("polygon needs at least 8 vertices");

  // the conformal factor must descend to the quotient (checked on the cover,
  // without the sign canonicalization)
  if (metric.conformal_rho) {
    auto rng = make_rng(seed, 0xeeee);
    std::normal_distribution<double> gauss(0, 1);
    for (int i = 0; i < 32; ++i) {
      Vec x = normalized(Vec{gauss(rng), gauss(rng), gauss(rng)});
      const double a = metric.conformal_rho(x);
      const double b = metric.conformal_rho(-x);
      if (!(std::fabs(a - b) <= 1e-9 * (1.0 + std::fabs(a))))
        throw InvariantError("conformal factor is not antipodally symmetric");
    }
  }

  SystoleEstimate best;
  best.length = 1e300;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto rng = make_rng(seed, 0x5f2 + static_cast<std::uint64_t>(r));
    std::normal_distribution<double> gauss(0, 1);
    Vec x = normalized(Vec{gauss(rng), gauss(rng), gauss(rng)});
    Vec e1, e2;
    sphere_frame(x, e1, e2);
    const double phi = 2.0 * kPi * (r + 0.37) / std::max(1, restarts);
    Vec w = std::cos(phi) * e1 + std::sin(phi) * e2;

    // coarse-to-fine: collective modes converge quickly with few vertices,
    // then each doubling only polishes
    SpherePath path{metric, {}};
    std::size_t level_m = std::min<std::size_t>(12, static_cast<std::size_t>(m));
    path.v.resize(level_m);
    for (std::size_t i = 0; i < level_m; ++i) {
      const double t = kPi * static_cast<double>(i) / static_cast<double>(level_m);
      path.v[i] = std::cos(t) * x + std::sin(t) * w;
    }
    double len = 0;
    bool conv = false;
    while (true) {
      std::tie(len, conv) = descend_sphere(path, options);
      if (level_m >= static_cast<std::size_t>(m)) break;
      level_m = std::min<std::size_t>(2 * level_m, static_cast<std::size_t>(m));
      path.v = resample_sphere(path.v, level_m);
    }
    if (len < best.length) {
      best.length = len;
      best.polygon = path.v;
      best.converged = conv;
    }
  }

  auto mids = polygon_midpoints(metric.model, best.polygon, LoopClass{});
  const double min_rho = min_conformal_factor(metric, mids);
  best.lower_bound = min_rho > 0 ? min_rho * kPi : 0.0;
  return best;
}

// ---- isosystolic chain ------------------------------------------------------------------

IsosystolicReport isosystolic_report(const FinslerMetric& metric, GridPtr grid,
                                     const ReportOptions& options) {
  const ManifoldModel& model = grid->model();
  if (!(metric.model == model)) throw GridMismatch("metric and grid models differ");
  if (metric.kind != MetricKind::Conformal && metric.kind != MetricKind::Euclidean)
    throw UnsupportedError("isosystolic report is implemented for conformal metrics");
  const int n = model.dim;

  IsosystolicReport rep;
  if (model.sphere_based()) {
    if (model.kind != ManifoldKind::ProjectivePlane2)
      throw UnsupportedError("sphere-based chain reports are for RP2");
    rep.estimate = systole_rp2(metric, options.m, options.restarts, options.seed);
    rep.sys_l = rep.estimate.length;
    rep.sys_l0 = kPi;  // half great circle on the round RP2
  } else {
    rep.estimate = systole_torus_all(metric, options.m, options.restarts, options.seed,
                                     options.zmax);
    rep.sys_l = rep.estimate.length;
    double flat = 1e300;
    for (int axis = 0; axis < n; ++axis)
      flat = std::min(flat, model.periods[static_cast<std::size_t>(axis)]);
    rep.sys_l0 = flat;  // shortest straight class loop of the flat metric
  }
  rep.sys_ratio = rep.sys_l / rep.sys_l0;

  rep.w_tilde = finsler::emv_metric(metric, n - 1, grid);
  rep.vol_l = finsler::holmes_thompson_volume(metric, grid);
  rep.vol_l0 = finsler::holmes_thompson_volume(finsler::euclidean_metric(model), grid);
  rep.vol_ratio_root = std::pow(rep.vol_l / rep.vol_l0, 1.0 / n);

  rep.chain_lower = dualvol::make_verdict("sys_ratio<=w_tilde", dualvol::VerdictKind::Inequality,
                                          rep.sys_ratio, rep.w_tilde, options.tol, false);
  rep.chain_upper =
      dualvol::make_verdict("w_tilde<=vol_ratio_root", dualvol::VerdictKind::Inequality,
                            rep.w_tilde, rep.vol_ratio_root, options.tol, false);
  rep.chain_holds = rep.chain_lower.holds && rep.chain_upper.holds;
  if (model.kind == ManifoldKind::ProjectivePlane2)
    rep.pu_ratio = (2.0 / kPi) * rep.sys_l * rep.sys_l / rep.vol_l;
  return rep;
}

}  // namespace starvol::systole
