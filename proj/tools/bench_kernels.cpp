// Serial vs OpenMP timings for the hot kernels. Arg 0 is serial, 1 parallel.
#include <benchmark/benchmark.h>

#include "mmpoint/clustering.hpp"
#include "mmpoint/detection.hpp"
#include "mmpoint/echo.hpp"
#include "mmpoint/imaging.hpp"
#include "mmpoint/scene.hpp"
#include "support.hpp"

using namespace mmpoint;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

std::vector<Scatterer> bench_scene() {
  std::vector<Scatterer> scene;
  for (int i = 0; i < 4; ++i) {
    const auto car = make_distributed_target({-6.0 + 4.0 * i, 15.0 + 12.0 * i, 0.0}, {1.8, 4.5, 1.5}, 16, Label::car,
                                             10.0, {0.0, -3.0 * i, 0.0});
    scene.insert(scene.end(), car.begin(), car.end());
  }
  return scene;
}

const EchoCube& bench_cube() {
  static const EchoCube cube =
      synthesize_echo(bench_scene(), mmtest::radar_for(12), mmtest::shipped_layout(), {1e-6, 1, 0});
  return cube;
}

FeatureMatrix blob_points(std::size_t n) {
  mmtest::Gen g(5);
  return g.features(n, 2, 0.0, 30.0);
}

void BM_Echo(benchmark::State& state) {
  const auto scene = bench_scene();
  const auto params = mmtest::radar_for(12);
  const auto layout = mmtest::shipped_layout();
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_echo(scene, params, layout, {1e-6, 1, 0}, exec_of(state)));
}

void BM_Rdm(benchmark::State& state) {
  const auto& cube = bench_cube();
  for (auto _ : state) benchmark::DoNotOptimize(compute_rdm(cube, Window::hann, exec_of(state)));
}

void BM_Cfar(benchmark::State& state) {
  const auto rdm = compute_rdm(bench_cube());
  const auto power = rdm.power_sum();
  const CfarConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(cfar_detect(power, rdm.n_range, rdm.n_doppler, cfg, exec_of(state)));
}

void BM_Dbscan(benchmark::State& state) {
  const auto pts = blob_points(2000);
  for (auto _ : state) benchmark::DoNotOptimize(dbscan(pts, 0.8, 5, exec_of(state)));
}

void BM_Fps(benchmark::State& state) {
  const auto pts = blob_points(4000);
  for (auto _ : state) benchmark::DoNotOptimize(fps(pts, 512, 0, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_Echo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rdm)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Cfar)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dbscan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fps)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
