// Serial references against the OpenMP kernels.

#include "ruelle/kernels.hpp"
#include "ruelle/measure.hpp"

#include <benchmark/benchmark.h>

using namespace ruelle;

namespace {

struct Fixture {
    SmoothSystem sys = make_system("gauss");
    RegularityProfile profile = RegularityProfile::for_interval(sys.domain, 1.0, RadiusPolicy::pure_norm);
    std::vector<Point> xs = make_measure("gauss").sample(200000, 1);
    AdaptivePartition partition = [this] {
        BuildOptions bo;
        bo.sample_budget = 50000;
        bo.exec = Exec{available_workers()};
        const int l1 = *minimal_l1(1, sys.distortion.alpha, sys.distortion.C, sys.distortion.a, 1);
        return build_partition(sys, make_measure("gauss"), profile, LevelParams::from(sys.distortion, 1, 2, l1, 4, 1.0, 6),
                               bo);
    }();
};

Fixture& fx() {
    static Fixture f;
    return f;
}

void BM_levels_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(batch_levels_serial(fx().sys, fx().profile, fx().xs, 3));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(fx().xs.size()));
}

void BM_levels_parallel(benchmark::State& st) {
    const Exec e{static_cast<int>(st.range(0))};
    for (auto _ : st) benchmark::DoNotOptimize(batch_levels(fx().sys, fx().profile, fx().xs, 3, e));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(fx().xs.size()));
}

void BM_locate_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(batch_locate_serial(fx().partition, fx().sys, fx().profile, fx().xs));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(fx().xs.size()));
}

void BM_locate_parallel(benchmark::State& st) {
    const Exec e{static_cast<int>(st.range(0))};
    for (auto _ : st) benchmark::DoNotOptimize(batch_locate(fx().partition, fx().sys, fx().profile, fx().xs, e));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(fx().xs.size()));
}

void BM_exterior_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(log_exterior_sum_serial(fx().sys, fx().xs));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(fx().xs.size()));
}

void BM_exterior_parallel(benchmark::State& st) {
    const Exec e{static_cast<int>(st.range(0))};
    for (auto _ : st) benchmark::DoNotOptimize(log_exterior_sum(fx().sys, fx().xs, e));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(fx().xs.size()));
}

} // namespace

BENCHMARK(BM_levels_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_levels_parallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_locate_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_locate_parallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_exterior_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_exterior_parallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
