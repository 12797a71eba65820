#include <doctest.h>

#include <cmath>

#include "starvol/dualvol.hpp"
#include "starvol/runner.hpp"

using namespace starvol;
using namespace starvol::dualvol;
using starbody::StarBody;
using starbody::StarHamiltonian;

namespace {

geometry::ManifoldModel t2() { return geometry::ManifoldModel::flat_torus(2); }

geometry::GridPtr grid(int base = 16, int fiber = 32) {
  geometry::GridResolution res;
  res.base = {base, base};
  res.fiber = fiber;
  return geometry::build_grid_ptr(t2(), res);
}

StarBody random_body(geometry::GridPtr g, std::uint64_t i) {
  return starbody::body_from_hamiltonian(cli::random_body_hamiltonian(t2(), 42, i), g,
                                         /*audit=*/false);
}

}  // namespace

TEST_SUITE("dualvol") {

TEST_CASE("volumes of model bodies") {
  auto g = grid();
  StarBody u = starbody::model_body(g);
  CHECK(volume(u) == doctest::Approx(kPi).epsilon(1e-13));
  CHECK(volume(starbody::dilate(u, 2.0)) == doctest::Approx(4.0 * kPi).epsilon(1e-13));
}

TEST_CASE("fiber-harmonic radial field has the closed-form volume") {
  auto g = grid();
  // rho(theta) = 1 + 0.5 sin(theta): V = (1/2) integral of rho^2 = 1.125 pi
  StarHamiltonian h;
  h.evaluator = [](const geometry::CotangentPoint& z) {
    const double r = norm(z.momentum);
    return r / (1.0 + 0.5 * z.momentum[1] / r);
  };
  StarBody b = starbody::body_from_hamiltonian(h, g, /*audit=*/false);
  CHECK(volume(b) == doctest::Approx(1.125 * kPi).epsilon(1e-12));
}

TEST_CASE("dual mixed volume basics") {
  auto g = grid();
  StarBody a = random_body(g, 0), b = random_body(g, 1);
  const StarBody aa[2] = {a, a};
  CHECK(dual_mixed_volume({aa, 2}) == doctest::Approx(volume(a)).epsilon(1e-13));

  const StarBody scaled[2] = {starbody::dilate(a, 2.0), starbody::dilate(b, 3.0)};
  const StarBody plain[2] = {a, b};
  CHECK(dual_mixed_volume({scaled, 2}) ==
        doctest::Approx(6.0 * dual_mixed_volume({plain, 2})).epsilon(1e-12));

  const StarBody three[3] = {a, b, a};
  CHECK_THROWS_AS(dual_mixed_volume({three, 3}), Error);
}

TEST_CASE("monotonicity under radial inclusion") {
  auto g = grid();
  auto rng = make_rng(9, 0);
  std::uniform_real_distribution<double> eps(0.05, 0.6);
  for (int t = 0; t < 10; ++t) {
    StarBody a = random_body(g, 10 + 2 * static_cast<std::uint64_t>(t));
    StarBody c = random_body(g, 11 + 2 * static_cast<std::uint64_t>(t));
    StarBody bigger = starbody::radial_sum(a, starbody::dilate(starbody::model_body(g), eps(rng)));
    CHECK(dmv_k(a, c, 1) <= dmv_k(bigger, c, 1) + 1e-13);
  }
}

TEST_CASE("w_tilde_k") {
  auto g = grid();
  StarBody u = starbody::model_body(g);
  CHECK(w_tilde_k(u, 1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(w_tilde_k(starbody::dilate(u, 2.0), 1) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK_THROWS_AS(w_tilde_k(u, 2), Error);  // out of range for n = 2

  // fiber-constant conformal body: W~_1 is the base mean of rho
  StarHamiltonian h;
  h.evaluator = [](const geometry::CotangentPoint& z) {
    return norm(z.momentum) / (1.0 + 0.3 * std::sin(2 * kPi * z.base[1]));
  };
  StarBody b = starbody::body_from_hamiltonian(h, g, /*audit=*/false);
  CHECK(w_tilde_k(b, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("polynomial expansion") {
  auto g = grid();
  StarBody u = starbody::model_body(g);
  auto v = check_polynomial_expansion(u, u, 1.0, 1.0, 1e-12);
  CHECK(v.holds);
  CHECK(v.lhs == doctest::Approx(4.0 * kPi).epsilon(1e-12));
  CHECK(v.equality_case_detected);

  StarBody a = random_body(g, 21), b = random_body(g, 22);
  v = check_polynomial_expansion(a, b, 0.7, 1.3, 1e-12);
  CHECK(v.holds);

  // mu = 0 reduces to lambda^n V(A)
  v = check_polynomial_expansion(a, b, 0.7, 0.0, 1e-12);
  CHECK(v.holds);
  CHECK(v.lhs == doctest::Approx(0.49 * volume(a)).epsilon(1e-12));
}

TEST_CASE("main inequality: equality iff dilations") {
  auto g = grid();
  StarBody a = random_body(g, 30);
  const StarBody dil[2] = {a, starbody::dilate(a, 1.7)};
  auto v = check_main_inequality({dil, 2}, 1e-10);
  CHECK(v.holds);
  CHECK(v.equality_case_detected);
  CHECK(std::fabs(v.slack) <= 1e-10 * std::max(v.lhs, v.rhs));

  double min_slack = 1e300;
  for (int t = 0; t < 20; ++t) {
    const StarBody pair[2] = {random_body(g, 100 + 2 * static_cast<std::uint64_t>(t)),
                              random_body(g, 101 + 2 * static_cast<std::uint64_t>(t))};
    auto w = check_main_inequality({pair, 2}, 1e-10);
    CHECK(w.holds);
    CHECK_FALSE(w.equality_case_detected);
    min_slack = std::min(min_slack, w.slack / std::max(w.lhs, w.rhs));
  }
  CHECK(min_slack > 0);
}

TEST_CASE("main inequality at n = 2 matches the discrete Cauchy-Schwarz route") {
  auto g = grid();
  StarBody a = random_body(g, 40), b = random_body(g, 41);
  const StarBody pair[2] = {a, b};
  auto v = check_main_inequality({pair, 2}, 1e-10);
  // independent route: direct node sums
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double w = g->weight(i);
    sab += w * a.rho(i) * b.rho(i);
    saa += w * a.rho(i) * a.rho(i);
    sbb += w * b.rho(i) * b.rho(i);
  }
  CHECK(v.lhs == doctest::Approx(sab * sab).epsilon(1e-12));
  CHECK(v.rhs == doctest::Approx(saa * sbb).epsilon(1e-12));
  CHECK(sab * sab <= saa * sbb);
}

TEST_CASE("dual Minkowski and dual Brunn-Minkowski") {
  auto g = grid();
  StarBody a = random_body(g, 50), b = random_body(g, 51);

  auto both = check_dual_minkowski(a, a);
  CHECK(both[0].holds);
  CHECK(both[0].equality_case_detected);
  CHECK(both[1].holds);

  auto bm_eq = check_dual_bm(a, starbody::dilate(a, 2.3));
  CHECK(bm_eq.holds);
  CHECK(bm_eq.equality_case_detected);
  CHECK(std::fabs(bm_eq.slack) <= 1e-10 * std::max(bm_eq.lhs, bm_eq.rhs));

  auto mink = check_dual_minkowski(a, b);
  CHECK(mink[0].holds);
  CHECK(mink[1].holds);
  CHECK(mink[0].slack > 0);

  // blending B toward a dilation of A shrinks the BM slack to zero
  double prev = 1e300;
  for (double tblend : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    std::vector<double> rho(g->size());
    for (std::size_t i = 0; i < g->size(); ++i)
      rho[i] = (1.0 - tblend) * b.rho(i) + tblend * 1.5 * a.rho(i);
    StarBody blend(g, rho);
    auto v = check_dual_bm(a, blend);
    CHECK(v.holds);
    CHECK(v.slack <= prev + 1e-12);
    prev = v.slack;
  }
  CHECK(prev <= 1e-10);
}

TEST_CASE("positivity and non-triviality of the invariant") {
  auto g = grid();
  StarBody a = random_body(g, 60), b = random_body(g, 61);
  CHECK(volume(a) > 0);
  const StarBody pair[2] = {a, b};
  CHECK(dual_mixed_volume({pair, 2}) > 0);

  // unit-volume non-proportional bodies give V~ < 1 = V~(B,...,B)
  StarBody au = starbody::dilate(a, std::pow(volume(a), -0.5));
  StarBody bu = starbody::dilate(b, std::pow(volume(b), -0.5));
  CHECK(volume(au) == doctest::Approx(1.0).epsilon(1e-12));
  const StarBody unit_pair[2] = {au, bu};
  const double mixed = dual_mixed_volume({unit_pair, 2});
  CHECK(mixed < 1.0);
  const StarBody bb[2] = {bu, bu};
  CHECK(dual_mixed_volume({bb, 2}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("refinement report and error decay") {
  auto g = grid(8, 16);
  StarBody a = random_body(g, 70), b = random_body(g, 71);
  const StarBody pair[2] = {a, b};
  const std::string names[2] = {"A", "B"};
  DmvReport rep = dmv_report({pair, 2}, {names, 2});
  CHECK(rep.value > 0);
  CHECK(rep.estimated_error >= 0);

  auto g2 = grid(16, 32);
  const StarBody pair2[2] = {a.regrid(g2), b.regrid(g2)};
  DmvReport rep2 = dmv_report({pair2, 2}, {names, 2});
  CHECK(rep2.estimated_error <= rep.estimated_error + 1e-15);
}

TEST_CASE("invariance under lifts") {
  auto g = grid();
  StarHamiltonian hams[2] = {cli::random_body_hamiltonian(t2(), 42, 80),
                             cli::random_body_hamiltonian(t2(), 42, 81)};

  auto idv = check_invariance({hams, 2}, geometry::BaseDiffeo::identity(2), g, 1e-14);
  CHECK(idv.holds);

  auto trv = check_invariance({hams, 2}, geometry::BaseDiffeo::torus_translation(Vec{0.3, 0.45}),
                              g, 1e-12);
  CHECK(trv.holds);

  auto shv = check_invariance({hams, 2}, geometry::BaseDiffeo::torus_shear(0.1), g);
  CHECK(shv.holds);
}

TEST_CASE("reductions are bit-identical for any worker count") {
  auto g = grid();
  StarBody a = random_body(g, 90), b = random_body(g, 91);
  const StarBody pair[2] = {a, b};
  const double serial = dual_mixed_volume({pair, 2});
  set_worker_threads(4);
  const double parallel = dual_mixed_volume({pair, 2});
  const StarBody c = starbody::body_from_hamiltonian(
      cli::random_body_hamiltonian(t2(), 42, 92), g, /*audit=*/false);
  set_worker_threads(1);
  const StarBody c_serial = starbody::body_from_hamiltonian(
      cli::random_body_hamiltonian(t2(), 42, 92), g, /*audit=*/false);
  CHECK(serial == parallel);
  CHECK(radial_distance(c, c_serial) == 0.0);
}

TEST_CASE("verdict semantics") {
  auto strict = make_verdict("x", VerdictKind::Inequality, 1.0, 2.0, 1e-10, false);
  CHECK(strict.holds);
  CHECK(strict.slack == doctest::Approx(1.0));
  auto violated = make_verdict("x", VerdictKind::Inequality, 2.0, 1.0, 1e-10, false);
  CHECK_FALSE(violated.holds);
  auto ident = make_verdict("x", VerdictKind::Identity, 1.0, 1.0 + 1e-12, 1e-10, false);
  CHECK(ident.holds);
  auto ident_bad = make_verdict("x", VerdictKind::Identity, 1.0, 1.1, 1e-10, false);
  CHECK_FALSE(ident_bad.holds);
}

}  // TEST_SUITE
