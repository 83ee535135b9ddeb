#include <benchmark/benchmark.h>

#include <random>

#include "facing/aoa.hpp"
#include "facing/direction.hpp"
#include "facing/dsp.hpp"
#include "facing/evalkit.hpp"
#include "facing/simulate.hpp"

using namespace facing;

namespace {

Signal noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Signal s{std::vector<double>(n), kDefaultSampleRate};
    for (auto& v : s.samples) v = g(rng);
    return s;
}

sim::Recording recording(std::size_t devices, std::uint64_t seed, eval::GeneratedScene& out) {
    eval::SceneSpec spec;
    spec.devices = devices;
    spec.source = SourceKind::speech_like;
    out = eval::random_scene(spec, seed);
    return sim::record(out.scene, {.snr_tilde_db = 30.0});
}

}  // namespace

static void BM_Convolve(benchmark::State& state) {
    const auto a = noise(static_cast<std::size_t>(state.range(0)), 1);
    const auto b = noise(1600, 2);
    for (auto _ : state) benchmark::DoNotOptimize(dsp::convolve(a.samples, b.samples));
}
BENCHMARK(BM_Convolve)->Arg(4000)->Arg(16000)->Unit(benchmark::kMicrosecond);

static void BM_Deconvolve(benchmark::State& state) {
    const auto v = noise(16000, 3);
    const auto x = noise(16000, 4);
    for (auto _ : state) benchmark::DoNotOptimize(dsp::deconvolve(x, v, 1600));
}
BENCHMARK(BM_Deconvolve)->Unit(benchmark::kMicrosecond);

static void BM_GccPhat(benchmark::State& state) {
    const auto a = noise(16000, 5), b = noise(16000, 6);
    for (auto _ : state) benchmark::DoNotOptimize(aoa::gcc_phat(a, b, 8));
}
BENCHMARK(BM_GccPhat)->Unit(benchmark::kMicrosecond);

static void BM_EstimateAoa(benchmark::State& state) {
    eval::GeneratedScene g;
    const auto rec = recording(2, 7, g);
    for (auto _ : state) benchmark::DoNotOptimize(aoa::estimate_aoa(rec.observations[0], g.scene.devices[0]));
}
BENCHMARK(BM_EstimateAoa)->Unit(benchmark::kMillisecond);

static void BM_Infer(benchmark::State& state) {
    eval::GeneratedScene g;
    const auto rec = recording(static_cast<std::size_t>(state.range(0)), 8, g);
    for (auto _ : state) benchmark::DoNotOptimize(direction::infer(rec.observations, g.scene.devices, default_pattern()));
}
BENCHMARK(BM_Infer)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
