#include <benchmark/benchmark.h>

#include "dtb/connectome.hpp"
#include "dtb/fdeb.hpp"
#include "dtb/parallel.hpp"
#include "dtb/synthgen.hpp"
#include "fixtures.hpp"

namespace {

const dtb::Fixture& human() {
    static const dtb::Fixture fixture = dtb::gen_fixture(dtb::human_preset(42));
    return fixture;
}

dtb::EdgeSet heaviest(std::size_t n) {
    return dtb::top_fraction(human().dti, static_cast<double>(n) / static_cast<double>(human().dti.size()));
}

void BM_BundleHuman(benchmark::State& state) {
    const auto edges = heaviest(static_cast<std::size_t>(state.range(0)));
    const dtb::BundleOptions options{dtb::resolve_thread_count(0), true};
    for (auto _ : state) benchmark::DoNotOptimize(dtb::bundle(edges, human().atlas, {}, options));
    state.counters["edges"] = static_cast<double>(edges.size());
}
BENCHMARK(BM_BundleHuman)->Arg(1000)->Arg(5000)->Unit(benchmark::kSecond)->Iterations(1);

// Full top-10% selection of the human fixture. Runs for a long time on few cores.
void BM_BundleHumanTopTenth(benchmark::State& state) {
    const auto edges = dtb::top_fraction(human().dti, 0.1);
    const dtb::BundleOptions options{dtb::resolve_thread_count(0), true};
    for (auto _ : state) benchmark::DoNotOptimize(dtb::bundle(edges, human().atlas, {}, options));
    state.counters["edges"] = static_cast<double>(edges.size());
}
BENCHMARK(BM_BundleHumanTopTenth)->Unit(benchmark::kSecond)->Iterations(1);

void BM_CompatibilityCache(benchmark::State& state) {
    const auto edges = heaviest(static_cast<std::size_t>(state.range(0)));
    std::vector<dtb::Segment> segments;
    for (const auto& e : edges.edges) segments.push_back({human().atlas.voxel(e.src).position_mm, human().atlas.voxel(e.dst).position_mm});
    for (auto _ : state)
        benchmark::DoNotOptimize(dtb::CompatibilityCache::build(segments, static_cast<double>(state.range(2)) / 100.0, state.range(1) != 0));
}
BENCHMARK(BM_CompatibilityCache)->Args({2000, 0, 5})->Args({2000, 1, 5})->Args({2000, 0, 50})->Args({2000, 1, 50})->Unit(benchmark::kMillisecond);

void BM_ParallelGrid(benchmark::State& state) {
    const auto grid = dtb::testing::parallel_grid();
    for (auto _ : state) benchmark::DoNotOptimize(dtb::bundle(grid));
}
BENCHMARK(BM_ParallelGrid)->Unit(benchmark::kMillisecond);

}  // namespace
