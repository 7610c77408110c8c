// Serial reference vs OpenMP ensemble for the main kernels.
// Threads follow OMP_NUM_THREADS; results are identical either way.
#include <benchmark/benchmark.h>

#include "sg/control.hpp"
#include "sg/semiclassical.hpp"

using namespace sg;

namespace {

const Model& model() {
    static Model m = [] {
        SGParams p;
        p.lambda = 0.1;
        return make_model(64, 16, 1, {64, 0.01, 0}, p, 4);
    }();
    return m;
}

void BM_functional(benchmark::State& st) {
    const bool par = st.range(0);
    auto u = DriftPolicy::first_order_sine(model());
    for (auto _ : st) {
        auto r = evaluate_functional(model(), u, PerturbationSpec{}, 32, 1, par);
        benchmark::DoNotOptimize(r.F.value);
    }
    st.SetItemsProcessed(st.iterations() * 32);
    st.SetLabel(par ? "parallel" : "serial");
}
BENCHMARK(BM_functional)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_gradient(benchmark::State& st) {
    const bool par = st.range(0);
    auto u = DriftPolicy::first_order_sine(model());
    for (auto _ : st) {
        auto r = objective_gradient(model(), u, PerturbationSpec{}, 16, 1, par);
        benchmark::DoNotOptimize(r.F);
    }
    st.SetItemsProcessed(st.iterations() * 16);
    st.SetLabel(par ? "parallel" : "serial");
}
BENCHMARK(BM_gradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_hbar_sweep(benchmark::State& st) {
    const bool par = st.range(0);
    auto g = build_grid(32, 8, 1);
    auto rho = make_cutoff(g, 2);
    SGParams p;
    for (auto _ : st) {
        auto r = hbar_sweep(g, PerturbationSpec{}, p, rho, {0.4, 0.2, 0.1}, 2000, 1, par);
        benchmark::DoNotOptimize(r.infimum);
    }
    st.SetLabel(par ? "parallel" : "serial");
}
BENCHMARK(BM_hbar_sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
