// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>
#include <omp.h>

#include "partnr/experiment.hpp"
#include "partnr/features.hpp"
#include "partnr/model.hpp"
#include "partnr/simulator.hpp"

using namespace partnr;

namespace {

Image scene_image(int size) {
  SimConfig sim{size, size};
  return render(reset(1, ColorMode::kSeen, Scenario::kFailureB, sim).first);
}

void BM_FeatureMapSerial(benchmark::State& state) {
  const Image img = scene_image(int(state.range(0)));
  const auto seg = segment(img);
  FeatureMap out;
  for (auto _ : state) {
    kernels::serial::feature_map(img, seg, out);
    benchmark::DoNotOptimize(out.data().data());
  }
}

void BM_FeatureMapParallel(benchmark::State& state) {
  const Image img = scene_image(int(state.range(0)));
  const auto seg = segment(img);
  FeatureMap out;
  for (auto _ : state) {
    kernels::feature_map(img, seg, out);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.counters["threads"] = omp_get_max_threads();
}

template <bool Parallel>
void BM_Score(benchmark::State& state) {
  const Image img = scene_image(int(state.range(0)));
  const auto f = compute_features(img);
  WeightVector w;
  for (int k = 0; k < kFeatureDim; ++k) w[k] = 0.1 * (k + 1);
  std::vector<double> out(f.pixels());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::score(f, w, out);
    } else {
      kernels::serial::score(f, w, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
  static const Dataset d = generate_demos(32, ColorMode::kSeen, ScenarioMix{}, 0.0, 1);
  const ValueModel m;
  const auto& ex = d.examples();
  const std::span<const ExampleRef> batch(ex.data(), std::min<std::size_t>(ex.size(), state.range(0)));
  for (auto _ : state) {
    auto g = Parallel ? batch_gradient(m, d, batch) : kernels::serial::batch_gradient(m, d, batch);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(batch.size()));
}

}  // namespace

BENCHMARK(BM_FeatureMapSerial)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_FeatureMapParallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Score<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Score<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_BatchGradient<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_BatchGradient<true>)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
