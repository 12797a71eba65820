#include <benchmark/benchmark.h>

#include <cmath>

#include "starvol/dualvol.hpp"
#include "starvol/dynamics.hpp"
#include "starvol/exprlang.hpp"
#include "starvol/finsler.hpp"
#include "starvol/runner.hpp"
#include "starvol/systole.hpp"

using namespace starvol;

namespace {

geometry::ManifoldModel t2() { return geometry::ManifoldModel::flat_torus(2); }

geometry::GridPtr torus_grid(int base, int fiber) {
  geometry::GridResolution res;
  res.base = {base, base};
  res.fiber = fiber;
  return geometry::build_grid_ptr(t2(), res);
}

void BM_BuildGridT2(benchmark::State& state) {
  geometry::GridResolution res;
  res.base = {static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  res.fiber = 64;
  for (auto _ : state) {
    auto g = geometry::build_grid(t2(), res);
    benchmark::DoNotOptimize(g.total_weight());
  }
}
BENCHMARK(BM_BuildGridT2)->Arg(16)->Arg(32);

void BM_Volume(benchmark::State& state) {
  auto g = torus_grid(static_cast<int>(state.range(0)), 64);
  auto body = starbody::body_from_hamiltonian(cli::random_body_hamiltonian(t2(), 1, 0), g,
                                              /*audit=*/false);
  for (auto _ : state) benchmark::DoNotOptimize(dualvol::volume(body));
}
BENCHMARK(BM_Volume)->Arg(16)->Arg(32);

void BM_DualMixedVolume(benchmark::State& state) {
  auto g = torus_grid(32, 64);
  const starbody::StarBody bodies[2] = {
      starbody::body_from_hamiltonian(cli::random_body_hamiltonian(t2(), 1, 0), g, false),
      starbody::body_from_hamiltonian(cli::random_body_hamiltonian(t2(), 1, 1), g, false)};
  for (auto _ : state) benchmark::DoNotOptimize(dualvol::dual_mixed_volume({bodies, 2}));
}
BENCHMARK(BM_DualMixedVolume);

void BM_LegendreDualRanders(benchmark::State& state) {
  auto randers = finsler::randers_metric(t2(), Vec{0.3, 0.0});
  const Vec x{0.2, 0.7}, p{0.8, -0.6};
  for (auto _ : state) benchmark::DoNotOptimize(finsler::legendre_dual(randers, x, p).value);
}
BENCHMARK(BM_LegendreDualRanders);

void BM_ExprEval(benchmark::State& state) {
  auto vars = starbody::phase_vars(t2());
  auto e = exprlang::parse("(1+0.3*sin(2*pi*x2))*sqrt(p1^2+p2^2)", vars);
  const double vals[4] = {0.3, 0.7, 0.6, 0.8};
  for (auto _ : state) benchmark::DoNotOptimize(e.eval({vals, 4}));
}
BENCHMARK(BM_ExprEval);

void BM_FlowStepsRoundSphere(benchmark::State& state) {
  auto h = dynamics::round_sphere_hamiltonian(geometry::ManifoldModel::round_sphere2());
  geometry::CotangentPoint z0{Vec{1, 0, 0}, Vec{0, 1, 0}};
  for (auto _ : state) {
    auto t = dynamics::integrate_flow(h, z0, 0.5, 1e-3, 1 << 20);
    benchmark::DoNotOptimize(t.action);
  }
}
BENCHMARK(BM_FlowStepsRoundSphere);

void BM_LoopLengthConformal(benchmark::State& state) {
  auto conf = finsler::conformal_metric(
      t2(), [](const Vec& x) { return 1.0 + 0.3 * std::sin(2 * kPi * x[1]); }, "conf");
  std::vector<Vec> loop;
  const int m = 128;
  for (int i = 0; i < m; ++i) loop.push_back(Vec{static_cast<double>(i) / m, 0.4});
  systole::LoopClass cls{{1, 0}};
  for (auto _ : state) benchmark::DoNotOptimize(systole::loop_length(conf, loop, cls));
}
BENCHMARK(BM_LoopLengthConformal);

}  // namespace

BENCHMARK_MAIN();
