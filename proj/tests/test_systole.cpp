#include <doctest.h>

#include <cmath>

#include "starvol/systole.hpp"

using namespace starvol;
using namespace starvol::systole;
using finsler::FinslerMetric;

namespace {

geometry::ManifoldModel t2() { return geometry::ManifoldModel::flat_torus(2); }
geometry::ManifoldModel rp2() { return geometry::ManifoldModel::projective_plane2(); }

std::vector<Vec> straight_loop(int m, const Vec& x0, const Vec& shift) {
  std::vector<Vec> v;
  for (int i = 0; i < m; ++i) v.push_back(x0 + (static_cast<double>(i) / m) * shift);
  return v;
}

FinslerMetric conformal_y(double amp) {
  return finsler::conformal_metric(
      t2(), [amp](const Vec& x) { return 1.0 + amp * std::sin(2 * kPi * x[1]); }, "conformal_y");
}

}  // namespace

TEST_SUITE("systole") {

TEST_CASE("loop lengths of straight torus loops") {
  FinslerMetric euc = finsler::euclidean_metric(t2());
  LoopClass c10{{1, 0}};
  auto loop = straight_loop(16, Vec{0.2, 0.3}, Vec{1, 0});
  CHECK(loop_length(euc, loop, c10) == doctest::Approx(1.0).epsilon(1e-12));

  LoopClass c11{{1, 1}};
  auto diag = straight_loop(16, Vec{0.1, 0.9}, Vec{1, 1});
  CHECK(loop_length(euc, diag, c11) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  FinslerMetric randers = finsler::randers_metric(t2(), Vec{0.3, 0.0});
  CHECK(loop_length(randers, loop, c10) == doctest::Approx(1.3).epsilon(1e-12));
  LoopClass c10r{{-1, 0}};
  auto back = straight_loop(16, Vec{0.2, 0.3}, Vec{-1, 0});
  CHECK(loop_length(randers, back, c10r) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("degenerate segments are rejected") {
  FinslerMetric euc = finsler::euclidean_metric(t2());
  auto loop = straight_loop(16, Vec{0, 0}, Vec{1, 0});
  loop[3] = loop[4];
  CHECK_THROWS_AS(loop_length(euc, loop, LoopClass{{1, 0}}), NumericalError);
}

TEST_CASE("flat torus systole per class") {
  FinslerMetric euc = finsler::euclidean_metric(t2());
  SystoleEstimate est = systole_torus(euc, LoopClass{{1, 0}}, 32, 2, 5);
  CHECK(est.length == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(est.converged);
  CHECK(est.length + 1e-9 >= est.lower_bound);
}

TEST_CASE("conformal torus systole finds the low line") {
  FinslerMetric conf = conformal_y(0.3);  // min rho = 0.7 along y = 3/4
  SystoleEstimate est = systole_torus(conf, LoopClass{{1, 0}}, 64, 4, 5);
  CHECK(est.length == doctest::Approx(0.7).epsilon(1e-4));
  CHECK(est.length + 1e-9 >= est.lower_bound);

  SystoleEstimate doubled = systole_torus(conf, LoopClass{{2, 0}}, 128, 4, 5);
  CHECK(doubled.length == doctest::Approx(2.0 * est.length).epsilon(1e-4));
}

TEST_CASE("class enumeration picks the smallest class") {
  FinslerMetric conf = conformal_y(0.3);
  SystoleEstimate est = systole_torus_all(conf, 64, 4, 5, 2);
  CHECK(est.length == doctest::Approx(0.7).epsilon(1e-4));
}

TEST_CASE("scaling equivariance and orientation symmetry") {
  FinslerMetric conf = conformal_y(0.25);
  SystoleEstimate one = systole_torus(conf, LoopClass{{1, 0}}, 48, 3, 5);
  FinslerMetric scaled = finsler::conformal_metric(
      t2(), [](const Vec& x) { return 3.0 * (1.0 + 0.25 * std::sin(2 * kPi * x[1])); }, "3x");
  SystoleEstimate three = systole_torus(scaled, LoopClass{{1, 0}}, 48, 3, 5);
  CHECK(three.length == doctest::Approx(3.0 * one.length).epsilon(1e-6));

  SystoleEstimate rev = systole_torus(conf, LoopClass{{-1, 0}}, 48, 3, 5);
  CHECK(rev.length == doctest::Approx(one.length).epsilon(1e-6));
}

TEST_CASE("more vertices never lengthen the estimate") {
  FinslerMetric conf = conformal_y(0.3);
  SystoleEstimate coarse = systole_torus(conf, LoopClass{{1, 0}}, 32, 3, 5);
  SystoleEstimate fine = systole_torus(conf, LoopClass{{1, 0}}, 64, 3, 5);
  CHECK(fine.length <= coarse.length + 1e-5);
}

TEST_CASE("round RP2 systole is pi") {
  FinslerMetric round = finsler::euclidean_metric(rp2());
  SystoleEstimate est = systole_rp2(round, 64, 4, 5);
  CHECK(est.length == doctest::Approx(kPi).epsilon(1e-4));
  CHECK(est.length + 1e-9 >= est.lower_bound);

  FinslerMetric lam = finsler::conformal_metric(rp2(), [](const Vec&) { return 1.4; }, "1.4");
  SystoleEstimate scaled = systole_rp2(lam, 64, 4, 5);
  CHECK(scaled.length == doctest::Approx(1.4 * kPi).epsilon(1e-4));
}

TEST_CASE("RP2 conformal estimate is bracketed") {
  // rho = 1 + 0.2 (x1^2 - 1/3): minimum 1 - 0.2/3 on the circle x1 = 0
  auto rho = [](const Vec& x) { return 1.0 + 0.2 * (x[0] * x[0] - 1.0 / 3.0); };
  FinslerMetric conf = finsler::conformal_metric(rp2(), rho, "bump");
  SystoleEstimate est = systole_rp2(conf, 96, 6, 5);
  const double min_rho = 1.0 - 0.2 / 3.0;
  CHECK(est.length + 1e-6 >= min_rho * kPi);
  // upper bound: the half great circle inside {x1 = 0} has constant rho = min_rho
  CHECK(est.length <= min_rho * kPi + 1e-4);
}

TEST_CASE("antipodally asymmetric factors are rejected on RP2") {
  FinslerMetric bad = finsler::conformal_metric(
      rp2(), [](const Vec& x) { return 1.0 + 0.3 * x[2]; }, "odd");
  CHECK_THROWS_AS(systole_rp2(bad, 32, 2, 5), InvariantError);
}

TEST_CASE("isosystolic report on the flat model") {
  geometry::GridResolution res;
  res.base = {16, 16};
  res.fiber = 32;
  auto g = geometry::build_grid_ptr(t2(), res);
  ReportOptions opt;
  opt.m = 48;
  opt.restarts = 3;
  opt.seed = 5;

  IsosystolicReport rep = systole::isosystolic_report(finsler::euclidean_metric(t2()), g, opt);
  CHECK(rep.sys_ratio == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(rep.w_tilde == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.vol_ratio_root == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.chain_holds);

  FinslerMetric twice = finsler::conformal_metric(t2(), [](const Vec&) { return 2.0; }, "2");
  IsosystolicReport rep2 = systole::isosystolic_report(twice, g, opt);
  CHECK(rep2.sys_ratio == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(rep2.w_tilde == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(rep2.vol_ratio_root == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(rep2.chain_holds);
}

TEST_CASE("isosystolic report on RP2 carries the Pu ratio") {
  geometry::GridResolution res;
  res.sphere_refine = 2;
  res.fiber = 16;
  auto g = geometry::build_grid_ptr(rp2(), res);
  ReportOptions opt;
  opt.m = 48;
  opt.restarts = 4;
  opt.seed = 5;
  IsosystolicReport rep =
      systole::isosystolic_report(finsler::euclidean_metric(rp2()), g, opt);
  REQUIRE(rep.pu_ratio.has_value());
  CHECK(*rep.pu_ratio == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(rep.chain_holds);
}

TEST_CASE("non-conformal metrics are rejected by the chain report") {
  geometry::GridResolution res;
  res.base = {16, 16};
  res.fiber = 32;
  auto g = geometry::build_grid_ptr(t2(), res);
  CHECK_THROWS_AS(
      systole::isosystolic_report(finsler::randers_metric(t2(), Vec{0.3, 0.0}), g, {}),
      UnsupportedError);
}

}  // TEST_SUITE
