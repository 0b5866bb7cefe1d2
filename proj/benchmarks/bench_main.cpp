#include "fmmds/fmm.hpp"
#include "fmmds/lists.hpp"
#include "fmmds/scan.hpp"
#include "fmmds/workload.hpp"

#include <benchmark/benchmark.h>

using namespace fmmds;

static void BM_ExclusiveScan(benchmark::State& state)
{
    std::vector<Count> in(std::size_t(state.range(0)), 3);
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(exclusive_scan(in));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExclusiveScan)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);

static void BM_PseudoSort(benchmark::State& state)
{
    auto pts = generate_points(std::size_t(state.range(0)), Distribution::uniform, 1, 0);
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(pseudo_sort<Point3>(pts, 6));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PseudoSort)->RangeMultiplier(2)->Range(1 << 16, 1 << 20)->Unit(benchmark::kMillisecond);

static void BM_BuildAll(benchmark::State& state)
{
    auto         n = std::size_t(state.range(0));
    auto         w = generate(n, n, Distribution::uniform, 2);
    BuildOptions o;
    o.l_max = int(state.range(1));
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(build_all(w.sources, w.receivers, o));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildAll)->ArgsProduct({{1 << 16, 1 << 18, 1 << 20}, {4, 6}})->Unit(benchmark::kMillisecond);

static void BM_M2L(benchmark::State& state)
{
    const int            p = int(state.range(0));
    FmmOperators         ops(p);
    std::vector<Complex> m(ops.block(), Complex(0.5, 0.25)), l(ops.block());
    for (auto _ : state)
    {
        ops.m2l(m.data(), 4, 3, -2, 1, l.data());
        benchmark::DoNotOptimize(l.data());
    }
}
BENCHMARK(BM_M2L)->DenseRange(4, 16, 4);

static void BM_Evaluate(benchmark::State& state)
{
    auto         w = generate(1 << 14, 1 << 14, Distribution::uniform, 3);
    BuildOptions o;
    o.l_max = 4;
    auto s  = build_all(w.sources, w.receivers, o);
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(evaluate(s, {int(state.range(0)), true, true, 0}));
    }
}
BENCHMARK(BM_Evaluate)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
