#include "starvol/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace starvol::geometry {

std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::FlatTorus:
      return "flat_torus";
    case ManifoldKind::RoundSphere2:
      return "round_sphere2";
    case ManifoldKind::ProjectivePlane2:
      return "projective_plane2";
  }
  return "?";
}

ManifoldKind manifold_kind_from_string(const std::string& s) {
  if (s == "flat_torus") return ManifoldKind::FlatTorus;
  if (s == "round_sphere2") return ManifoldKind::RoundSphere2;
  if (s == "projective_plane2") return ManifoldKind::ProjectivePlane2;
  throw ConfigError("unknown manifold kind '" + s + "'");
}

// ---- ManifoldModel ---------------------------------------------------------------

ManifoldModel ManifoldModel::flat_torus(int n, std::span<const double> periods) {
  if (n < 2) throw UnsupportedError("flat torus requires dimension >= 2");
  if (static_cast<std::size_t>(n) > kMaxDim)
    throw UnsupportedError("flat torus dimension exceeds supported maximum");
  ManifoldModel m;
  m.kind = ManifoldKind::FlatTorus;
  m.dim = n;
  m.periods = Vec::zero(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double p = periods.empty() ? 1.0 : periods[static_cast<std::size_t>(i)];
    if (!(p > 0)) throw ConfigError("torus periods must be positive");
    m.periods[static_cast<std::size_t>(i)] = p;
  }
  return m;
}

ManifoldModel ManifoldModel::round_sphere2() {
  ManifoldModel m;
  m.kind = ManifoldKind::RoundSphere2;
  m.dim = 2;
  return m;
}

ManifoldModel ManifoldModel::projective_plane2() {
  ManifoldModel m;
  m.kind = ManifoldKind::ProjectivePlane2;
  m.dim = 2;
  return m;
}

double ManifoldModel::base_volume() const {
  switch (kind) {
    case ManifoldKind::FlatTorus: {
      double v = 1;
      for (std::size_t i = 0; i < periods.size(); ++i) v *= periods[i];
      return v;
    }
    case ManifoldKind::RoundSphere2:
      return 4.0 * kPi;
    case ManifoldKind::ProjectivePlane2:
      return 2.0 * kPi;
  }
  return 0;
}

Vec ManifoldModel::reduce_base(const Vec& x) const {
  if (kind == ManifoldKind::FlatTorus) {
    Vec r = x;
    for (std::size_t i = 0; i < r.size(); ++i) {
      double p = periods[i];
      r[i] = std::fmod(r[i], p);
      if (r[i] < 0) r[i] += p;
    }
    return r;
  }
  Vec r = normalized(x);
  if (kind == ManifoldKind::ProjectivePlane2) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (std::fabs(r[i]) > 1e-12) {
        if (r[i] < 0) r = -r;
        break;
      }
    }
  }
  return r;
}

double ManifoldModel::momentum_norm(const Vec& x, const Vec& p) const {
  if (kind == ManifoldKind::FlatTorus) return norm(p);
  // project out any off-tangent component before measuring
  Vec xh = normalized(x);
  Vec q = p - dot(p, xh) * xh;
  return norm(q);
}

bool ManifoldModel::operator==(const ManifoldModel& o) const {
  return kind == o.kind && dim == o.dim && periods == o.periods;
}

// ---- resolutions ------------------------------------------------------------------

GridResolution GridResolution::refined() const {
  GridResolution r = *this;
  for (int& b : r.base) b *= 2;
  r.fiber *= 2;
  if (r.sphere_refine >= 0) r.sphere_refine += 1;
  return r;
}

std::string GridResolution::str() const {
  std::string s = "base[";
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(base[i]);
  }
  s += "]";
  if (sphere_refine >= 0) s += " refine " + std::to_string(sphere_refine);
  s += " fiber " + std::to_string(fiber);
  return s;
}

// ---- ball volumes ------------------------------------------------------------------

double euclidean_ball_volume(int k) {
  if (k < 1) throw ConfigError("ball dimension must be >= 1");
  return std::pow(kPi, 0.5 * k) / std::tgamma(0.5 * k + 1.0);
}

double unit_sphere_area(int m) {
  // |S^m| = (m+1) * eps_{m+1}
  return (m + 1) * euclidean_ball_volume(m + 1);
}

// ---- Gauss-Legendre ----------------------------------------------------------------

namespace {

// Nodes and weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::fabs(dt) < 1e-15) break;
    }
    x[static_cast<std::size_t>(i)] = -t;
    x[static_cast<std::size_t>(n - 1 - i)] = t;
    double wi = 2.0 / ((1.0 - t * t) * dp * dp);
    w[static_cast<std::size_t>(i)] = wi;
    w[static_cast<std::size_t>(n - 1 - i)] = wi;
  }
}

struct FiberNode {
  Vec u;
  double w;
};

// Tensor rule on S^{n-1}: uniform azimuth, Gauss-Legendre polar levels. The
// level whose sine power is 1 integrates exactly in cos(theta); higher powers
// fold sin^k into the weight (spectrally accurate for the analytic factors).
std::vector<FiberNode> tensor_sphere_nodes(int n, int azimuth) {
  std::vector<FiberNode> nodes;
  if (n == 2) {
    nodes.reserve(static_cast<std::size_t>(azimuth));
    for (int k = 0; k < azimuth; ++k) {
      double th = 2.0 * kPi * k / azimuth;
      Vec u = Vec::zero(2);
      u[0] = std::cos(th);
      u[1] = std::sin(th);
      nodes.push_back({u, 2.0 * kPi / azimuth});
    }
    return nodes;
  }

  struct Level {
    std::vector<double> c, s, w;  // cos(theta), sin(theta), weight
  };
  std::vector<Level> levels;
  const int polar = std::max(8, azimuth / 2);
  for (int i = 1; i <= n - 2; ++i) {
    const int power = n - 1 - i;
    Level lv;
    std::vector<double> gx, gw;
    gauss_legendre(polar, gx, gw);
    for (int j = 0; j < polar; ++j) {
      const auto js = static_cast<std::size_t>(j);
      if (power == 1) {
        double t = gx[js];  // t = cos(theta)
        lv.c.push_back(t);
        lv.s.push_back(std::sqrt(std::max(0.0, 1.0 - t * t)));
        lv.w.push_back(gw[js]);
      } else {
        double th = 0.5 * kPi * (gx[js] + 1.0);  // map [-1,1] -> [0,pi]
        lv.c.push_back(std::cos(th));
        lv.s.push_back(std::sin(th));
        lv.w.push_back(gw[js] * (kPi / 2.0) * std::pow(std::sin(th), power));
      }
    }
    levels.push_back(std::move(lv));
  }

  std::vector<double> az_c, az_s;
  for (int k = 0; k < azimuth; ++k) {
    double ph = 2.0 * kPi * k / azimuth;
    az_c.push_back(std::cos(ph));
    az_s.push_back(std::sin(ph));
  }
  const double az_w = 2.0 * kPi / azimuth;

  // u = (cos t1, sin t1 cos t2, ..., prod sin ti * cos phi, prod sin ti * sin phi)
  std::vector<std::size_t> idx(levels.size(), 0);
  while (true) {
    double sin_prod = 1.0, wprod = 1.0;
    Vec u = Vec::zero(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const Level& lv = levels[i];
      u[i] = sin_prod * lv.c[idx[i]];
      sin_prod *= lv.s[idx[i]];
      wprod *= lv.w[idx[i]];
    }
    for (int k = 0; k < azimuth; ++k) {
      Vec v = u;
      v[static_cast<std::size_t>(n - 2)] = sin_prod * az_c[static_cast<std::size_t>(k)];
      v[static_cast<std::size_t>(n - 1)] = sin_prod * az_s[static_cast<std::size_t>(k)];
      nodes.push_back({v, wprod * az_w});
    }
    std::size_t j = 0;
    for (; j < idx.size(); ++j) {
      if (++idx[j] < levels[j].c.size()) break;
      idx[j] = 0;
    }
    if (j == idx.size()) break;
  }
  return nodes;
}

// Monte Carlo fallback for high-dimensional fibers; deterministic per (n, count).
std::vector<FiberNode> monte_carlo_sphere_nodes(int n, int azimuth) {
  const std::size_t count = std::max<std::size_t>(4096, static_cast<std::size_t>(azimuth) *
                                                            static_cast<std::size_t>(azimuth));
  auto rng = make_rng(0x5f3759df, static_cast<std::uint64_t>(n));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<FiberNode> nodes;
  nodes.reserve(count);
  const double w = unit_sphere_area(n - 1) / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec u = Vec::zero(static_cast<std::size_t>(n));
    double r2 = 0;
    do {
      r2 = 0;
      for (int k = 0; k < n; ++k) {
        u[static_cast<std::size_t>(k)] = gauss(rng);
        r2 += u[static_cast<std::size_t>(k)] * u[static_cast<std::size_t>(k)];
      }
    } while (r2 < 1e-14);
    nodes.push_back({(1.0 / std::sqrt(r2)) * u, w});
  }
  return nodes;
}

// ---- icosahedral sphere triangulation ----------------------------------------------

struct Tri {
  Vec a, b, c;
};

std::vector<Tri> icosahedron() {
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  auto v = [&](double x, double y, double z) { return normalized(Vec{x, y, z}); };
  std::vector<Vec> p = {
      v(-1, phi, 0), v(1, phi, 0), v(-1, -phi, 0), v(1, -phi, 0),
      v(0, -1, phi), v(0, 1, phi), v(0, -1, -phi), v(0, 1, -phi),
      v(phi, 0, -1), v(phi, 0, 1), v(-phi, 0, -1), v(-phi, 0, 1),
  };
  const int f[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  std::vector<Tri> tris;
  for (auto& face : f) tris.push_back({p[static_cast<std::size_t>(face[0])],
                                       p[static_cast<std::size_t>(face[1])],
                                       p[static_cast<std::size_t>(face[2])]});
  return tris;
}

std::vector<Tri> refine_triangles(std::vector<Tri> tris, int levels) {
  for (int l = 0; l < levels; ++l) {
    std::vector<Tri> next;
    next.reserve(tris.size() * 4);
    for (const Tri& t : tris) {
      Vec ab = normalized(t.a + t.b);
      Vec bc = normalized(t.b + t.c);
      Vec ca = normalized(t.c + t.a);
      next.push_back({t.a, ab, ca});
      next.push_back({t.b, bc, ab});
      next.push_back({t.c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  return tris;
}

double arc(const Vec& x, const Vec& y) {
  return std::atan2(norm(cross3(x, y)), dot(x, y));
}

// Spherical triangle area by l'Huilier's formula.
double spherical_area(const Tri& t) {
  double a = arc(t.b, t.c), b = arc(t.a, t.c), c = arc(t.a, t.b);
  double s = 0.5 * (a + b + c);
  double prod = std::tan(0.5 * s) * std::tan(0.5 * (s - a)) * std::tan(0.5 * (s - b)) *
                std::tan(0.5 * (s - c));
  return 4.0 * std::atan(std::sqrt(std::max(0.0, prod)));
}

// Deterministic orthonormal tangent frame at a sphere point.
void tangent_frame(const Vec& x, Vec& e1, Vec& e2) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::fabs(x[i]) < std::fabs(x[k])) k = i;
  Vec axis = Vec::zero(3);
  axis[k] = 1.0;
  e1 = normalized(axis - dot(axis, x) * x);
  e2 = cross3(x, e1);
}

void validate_resolution(const ManifoldModel& model, const GridResolution& res) {
  if (model.kind == ManifoldKind::FlatTorus) {
    if (static_cast<int>(res.base.size()) != model.dim)
      throw ConfigError("torus resolution needs one base count per axis");
    for (int b : res.base)
      if (b < 4) throw ConfigError("resolution counts must be >= 4 per dimension");
  } else {
    if (res.sphere_refine < 0)
      throw ConfigError("sphere models need a nonnegative icosahedral refinement level");
  }
  if (res.fiber < 4) throw ConfigError("resolution counts must be >= 4 per dimension");
}

}  // namespace

// ---- CosphereGrid -------------------------------------------------------------------

CosphereGrid::CosphereGrid(ManifoldModel model, GridResolution resolution,
                           std::vector<double> base_pts, std::vector<double> momenta,
                           std::vector<double> weights)
    : model_(std::move(model)),
      resolution_(std::move(resolution)),
      base_pts_(std::move(base_pts)),
      momenta_(std::move(momenta)),
      weights_(std::move(weights)) {
  for (double w : weights_)
    if (!(w > 0)) throw InvariantError("grid weights must be positive");
  total_weight_ = pairwise_sum(weights_);
}

CotangentPoint CosphereGrid::node(std::size_t i) const {
  const std::size_t d = static_cast<std::size_t>(model_.ambient_dim());
  CotangentPoint z;
  z.base = Vec::from({base_pts_.data() + i * d, d});
  z.momentum = Vec::from({momenta_.data() + i * d, d});
  return z;
}

CosphereGrid build_grid(const ManifoldModel& model, const GridResolution& res) {
  validate_resolution(model, res);
  std::vector<double> base_pts, momenta, weights;
  const int n = model.dim;

  if (model.kind == ManifoldKind::FlatTorus) {
    auto fiber = (n <= 4) ? tensor_sphere_nodes(n, res.fiber)
                          : monte_carlo_sphere_nodes(n, res.fiber);
    double cell = 1.0;
    std::size_t base_count = 1;
    for (int i = 0; i < n; ++i) {
      const auto is = static_cast<std::size_t>(i);
      cell *= model.periods[is] / res.base[is];
      base_count *= static_cast<std::size_t>(res.base[is]);
    }
    const std::size_t total = base_count * fiber.size();
    base_pts.reserve(total * static_cast<std::size_t>(n));
    momenta.reserve(total * static_cast<std::size_t>(n));
    weights.reserve(total);

    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      Vec x = Vec::zero(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const auto is = static_cast<std::size_t>(i);
        x[is] = model.periods[is] * idx[is] / res.base[is];
      }
      for (const FiberNode& f : fiber) {
        for (int i = 0; i < n; ++i) base_pts.push_back(x[static_cast<std::size_t>(i)]);
        for (int i = 0; i < n; ++i) momenta.push_back(f.u[static_cast<std::size_t>(i)]);
        weights.push_back(cell * f.w / n);
      }
      std::size_t j = 0;
      for (; j < idx.size(); ++j) {
        if (++idx[j] < res.base[j]) break;
        idx[j] = 0;
      }
      if (j == idx.size()) break;
    }
  } else {
    auto tris = refine_triangles(icosahedron(), res.sphere_refine);
    const double half = model.kind == ManifoldKind::ProjectivePlane2 ? 0.5 : 1.0;
    const double fw = 2.0 * kPi / res.fiber;
    for (const Tri& t : tris) {
      Vec c = normalized(t.a + t.b + t.c);
      double area = spherical_area(t);
      Vec e1, e2;
      tangent_frame(c, e1, e2);
      for (int k = 0; k < res.fiber; ++k) {
        double th = 2.0 * kPi * k / res.fiber;
        Vec p = std::cos(th) * e1 + std::sin(th) * e2;
        for (std::size_t i = 0; i < 3; ++i) base_pts.push_back(c[i]);
        for (std::size_t i = 0; i < 3; ++i) momenta.push_back(p[i]);
        weights.push_back(half * area * fw / n);
      }
    }
  }
  return CosphereGrid(model, res, std::move(base_pts), std::move(momenta), std::move(weights));
}

GridPtr build_grid_ptr(const ManifoldModel& model, const GridResolution& resolution) {
  return std::make_shared<const CosphereGrid>(build_grid(model, resolution));
}

Vec BaseGrid::point(std::size_t i) const {
  const std::size_t d = static_cast<std::size_t>(model.ambient_dim());
  return Vec::from({pts.data() + i * d, d});
}

BaseGrid build_base_grid(const ManifoldModel& model, const GridResolution& res) {
  validate_resolution(model, res);
  BaseGrid g;
  g.model = model;
  const int n = model.dim;
  if (model.kind == ManifoldKind::FlatTorus) {
    double cell = 1.0;
    for (int i = 0; i < n; ++i)
      cell *= model.periods[static_cast<std::size_t>(i)] / res.base[static_cast<std::size_t>(i)];
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      for (int i = 0; i < n; ++i) {
        const auto is = static_cast<std::size_t>(i);
        g.pts.push_back(model.periods[is] * idx[is] / res.base[is]);
      }
      g.weights.push_back(cell);
      std::size_t j = 0;
      for (; j < idx.size(); ++j) {
        if (++idx[j] < res.base[j]) break;
        idx[j] = 0;
      }
      if (j == idx.size()) break;
    }
  } else {
    auto tris = refine_triangles(icosahedron(), res.sphere_refine);
    const double half = model.kind == ManifoldKind::ProjectivePlane2 ? 0.5 : 1.0;
    for (const Tri& t : tris) {
      Vec c = normalized(t.a + t.b + t.c);
      for (std::size_t i = 0; i < 3; ++i) g.pts.push_back(c[i]);
      g.weights.push_back(half * spherical_area(t));
    }
  }
  return g;
}

// ---- base diffeomorphisms and cotangent lifts ----------------------------------------

BaseDiffeo BaseDiffeo::identity(int n) {
  BaseDiffeo d;
  d.forward = [](const Vec& x) { return x; };
  d.inverse = [](const Vec& x) { return x; };
  d.jacobian = [n](const Vec&, double* J) {
    for (int i = 0; i < n * n; ++i) J[i] = 0;
    for (int i = 0; i < n; ++i) J[i * n + i] = 1;
  };
  return d;
}

BaseDiffeo BaseDiffeo::torus_translation(const Vec& c) {
  BaseDiffeo d;
  const int n = static_cast<int>(c.size());
  d.forward = [c](const Vec& x) { return x + c; };
  d.inverse = [c](const Vec& x) { return x - c; };
  d.jacobian = BaseDiffeo::identity(n).jacobian;
  return d;
}

BaseDiffeo BaseDiffeo::torus_shear(double amp, double period2) {
  BaseDiffeo d;
  const double k = 2.0 * kPi / period2;
  d.forward = [amp, k](const Vec& x) {
    Vec y = x;
    y[0] += amp * std::sin(k * x[1]);
    return y;
  };
  d.inverse = [amp, k](const Vec& y) {
    Vec x = y;
    x[0] -= amp * std::sin(k * y[1]);
    return x;
  };
  d.jacobian = [amp, k](const Vec& x, double* J) {
    const int n = static_cast<int>(x.size());
    for (int i = 0; i < n * n; ++i) J[i] = 0;
    for (int i = 0; i < n; ++i) J[i * n + i] = 1;
    J[0 * n + 1] = amp * k * std::cos(k * x[1]);
  };
  return d;
}

namespace {

void fd_jacobian(const BaseDiffeo& phi, const Vec& x, double* J) {
  const int n = static_cast<int>(x.size());
  for (int j = 0; j < n; ++j) {
    const auto js = static_cast<std::size_t>(j);
    const double h = 1e-6 * std::max(1.0, std::fabs(x[js]));
    Vec xp = x, xm = x;
    xp[js] += h;
    xm[js] -= h;
    Vec fp = phi.forward(xp), fm = phi.forward(xm);
    for (int i = 0; i < n; ++i)
      J[i * n + j] = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) /
                     (2.0 * h);
  }
}

// Solves J^T y = p by Gaussian elimination with partial pivoting; throws on a
// near-singular Jacobian.
Vec solve_transposed(const double* J, const Vec& p, int n) {
  double a[kMaxDim * kMaxDim];
  double b[kMaxDim];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[i * n + j] = J[j * n + i];  // transpose
    b[i] = p[static_cast<std::size_t>(i)];
  }
  double det = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(a[col * n + j], a[piv * n + j]);
      std::swap(b[col], b[piv]);
      det = -det;
    }
    const double d = a[col * n + col];
    det *= d;
    if (std::fabs(d) < 1e-14) break;
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / d;
      for (int j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
      b[r] -= f * b[col];
    }
  }
  if (std::fabs(det) < 1e-10) throw NumericalError("singular Jacobian in cotangent lift");
  Vec y = Vec::zero(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a[i * n + j] * y[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = s / a[i * n + i];
  }
  return y;
}

}  // namespace

CotangentPoint cotangent_lift(const ManifoldModel& model, const BaseDiffeo& phi,
                              const CotangentPoint& z) {
  if (model.kind != ManifoldKind::FlatTorus)
    throw UnsupportedError("cotangent lifts are implemented for torus charts");
  const int n = model.dim;
  double J[kMaxDim * kMaxDim];
  if (phi.jacobian)
    phi.jacobian(z.base, J);
  else
    fd_jacobian(phi, z.base, J);
  CotangentPoint out;
  out.base = phi.forward(z.base);
  out.momentum = solve_transposed(J, z.momentum, n);  // p . Dphi(x)^{-1}
  return out;
}

CotangentPoint cotangent_lift_inverse(const ManifoldModel& model, const BaseDiffeo& phi,
                                      const CotangentPoint& z) {
  if (model.kind != ManifoldKind::FlatTorus)
    throw UnsupportedError("cotangent lifts are implemented for torus charts");
  const int n = model.dim;
  CotangentPoint out;
  out.base = phi.inverse(z.base);
  double J[kMaxDim * kMaxDim];
  if (phi.jacobian)
    phi.jacobian(out.base, J);
  else
    fd_jacobian(phi, out.base, J);
  // lift of phi^{-1} multiplies momentum by Dphi at the preimage: p . Dphi(x')
  Vec p = Vec::zero(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += z.momentum[static_cast<std::size_t>(i)] * J[i * n + j];
    p[static_cast<std::size_t>(j)] = s;
  }
  out.momentum = p;
  return out;
}

// ---- serialization --------------------------------------------------------------------

nlohmann::json grid_to_json(const CosphereGrid& grid) {
  nlohmann::json j;
  const ManifoldModel& m = grid.model();
  j["model"]["kind"] = to_string(m.kind);
  j["model"]["dim"] = m.dim;
  if (m.kind == ManifoldKind::FlatTorus) {
    j["model"]["periods"] = std::vector<double>(m.periods.span().begin(), m.periods.span().end());
  }
  j["resolution"]["base"] = grid.resolution().base;
  j["resolution"]["fiber"] = grid.resolution().fiber;
  if (grid.resolution().sphere_refine >= 0)
    j["resolution"]["sphere_refine"] = grid.resolution().sphere_refine;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CotangentPoint z = grid.node(i);
    nlohmann::json base(std::vector<double>(z.base.span().begin(), z.base.span().end()));
    nlohmann::json mom(std::vector<double>(z.momentum.span().begin(), z.momentum.span().end()));
    nodes.push_back(nlohmann::json::array({base, mom, grid.weight(i)}));
  }
  j["nodes"] = std::move(nodes);
  j["checksum"] = grid.total_weight();
  return j;
}

CosphereGrid grid_from_json(const nlohmann::json& j) {
  ManifoldModel model;
  const auto kind = manifold_kind_from_string(j.at("model").at("kind").get<std::string>());
  if (kind == ManifoldKind::FlatTorus) {
    auto periods = j.at("model").value("periods", std::vector<double>{});
    model = ManifoldModel::flat_torus(j.at("model").at("dim").get<int>(), periods);
  } else if (kind == ManifoldKind::RoundSphere2) {
    model = ManifoldModel::round_sphere2();
  } else {
    model = ManifoldModel::projective_plane2();
  }
  GridResolution res;
  res.base = j.at("resolution").value("base", std::vector<int>{});
  res.fiber = j.at("resolution").at("fiber").get<int>();
  res.sphere_refine = j.at("resolution").value("sphere_refine", -1);
  std::vector<double> base_pts, momenta, weights;
  for (const auto& node : j.at("nodes")) {
    for (const auto& v : node.at(0)) base_pts.push_back(v.get<double>());
    for (const auto& v : node.at(1)) momenta.push_back(v.get<double>());
    weights.push_back(node.at(2).get<double>());
  }
  CosphereGrid grid(model, res, std::move(base_pts), std::move(momenta), std::move(weights));
  const double checksum = j.at("checksum").get<double>();
  if (std::fabs(grid.total_weight() - checksum) > 1e-9 * std::fabs(checksum))
    throw ConfigError("grid checksum mismatch");
  return grid;
}

}  // namespace starvol::geometry
