#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hypmil/data.hpp"
#include "hypmil/lorentz.hpp"
#include "hypmil/training.hpp"

namespace {

using namespace hypmil;

std::vector<lorentz::HyperbolicPoint> random_points(std::size_t n, const lorentz::GeometryConfig& geo) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> nd(0.0, 0.5);
  std::vector<lorentz::HyperbolicPoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    lorentz::TangentVector x;
    for (std::size_t d = 0; d < geo.dim; ++d) x.components.push_back(nd(rng));
    out.push_back(lorentz::exp_map_origin(x, geo));
  }
  return out;
}

void BM_ExpMapOrigin(benchmark::State& state) {
  lorentz::GeometryConfig geo;
  geo.dim = static_cast<std::size_t>(state.range(0));
  lorentz::TangentVector x{std::vector<double>(geo.dim, 0.1)};
  for (auto _ : state) benchmark::DoNotOptimize(lorentz::exp_map_origin(x, geo));
}
BENCHMARK(BM_ExpMapOrigin)->Arg(16)->Arg(64);

void BM_Geodesic(benchmark::State& state) {
  lorentz::GeometryConfig geo;
  const auto p = random_points(256, geo);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lorentz::geodesic(p[i % 256], p[(i + 1) % 256], geo));
    ++i;
  }
}
BENCHMARK(BM_Geodesic);

void BM_AngleDistance(benchmark::State& state) {
  lorentz::GeometryConfig geo;
  const auto p = random_points(256, geo);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lorentz::angle_distance(p[i % 256], p[(i + 1) % 256], geo));
    ++i;
  }
}
BENCHMARK(BM_AngleDistance);

void BM_SlideStep(benchmark::State& state) {
  const auto bundle = data::generate(data::SyntheticSpec{});
  TrainConfig cfg;
  const auto params = training::initial_params(bundle, cfg);
  const bool with_grad = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(training::slide_step(bundle.bags.front(), params, cfg, with_grad));
}
BENCHMARK(BM_SlideStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
