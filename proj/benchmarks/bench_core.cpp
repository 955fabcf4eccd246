#include <benchmark/benchmark.h>

#include <vector>

#include "bsdelab/bsde.hpp"
#include "bsdelab/fixtures.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/malliavin.hpp"
#include "bsdelab/regression.hpp"
#include "bsdelab/sensitivity.hpp"

using namespace bsdelab;

namespace {

const FixtureRegistry& registry() {
    static const FixtureRegistry instance;
    return instance;
}

}  // namespace

static void BM_SimulateSde(benchmark::State& state) {
    const auto config = make_config(registry().make("gbm-linear"), 50,
                                    static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        PathSet paths = simulate_base(config);
        benchmark::DoNotOptimize(paths.states.flat().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 50);
}
BENCHMARK(BM_SimulateSde)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);

static void BM_Regression(benchmark::State& state) {
    const auto config = make_config(registry().make("tanh-quadratic"), 10, 10'000, 1);
    const PathSet paths = simulate_base(config);
    const RegressionBasis basis(1, static_cast<std::size_t>(state.range(0)));
    const auto states = paths.states_at(10);
    std::vector<double> targets(paths.paths());
    for (std::size_t p = 0; p < targets.size(); ++p) targets[p] = states[p] * states[p];
    for (auto _ : state) {
        const auto fitted = condexp_regress(targets, states, basis);
        benchmark::DoNotOptimize(fitted.data());
    }
}
BENCHMARK(BM_Regression)->Arg(3)->Arg(6)->Unit(benchmark::kMicrosecond);

static void BM_SolveLsmc(benchmark::State& state) {
    const auto config = make_config(registry().make("tanh-quadratic"), 50,
                                    static_cast<std::size_t>(state.range(0)), 1);
    const PathSet paths = simulate_base(config);
    for (auto _ : state) {
        const BsdeSolution sol = solve_config(config, paths);
        benchmark::DoNotOptimize(sol.y0());
    }
}
BENCHMARK(BM_SolveLsmc)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);

static void BM_MalliavinSlices(benchmark::State& state) {
    const auto config = make_config(registry().make("cole-hopf-bm"), 20, 2'000, 1);
    const PathSet paths = simulate_base(config);
    const BsdeSolution base = solve_config(config, paths);
    const RegressionBasis basis(1, 3);
    const std::vector<std::size_t> thetas{0, 5, 10, 15};
    for (auto _ : state) {
        const auto d = malliavin_from_bsde(base, config.model, config.generator, config.terminal,
                                           paths, basis, thetas);
        benchmark::DoNotOptimize(d.slices.data());
    }
}
BENCHMARK(BM_MalliavinSlices)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
