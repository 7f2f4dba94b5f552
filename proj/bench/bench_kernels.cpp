#include <benchmark/benchmark.h>

#include "dxr/generate.hpp"
#include "dxr/inference.hpp"
#include "dxr/kernels.hpp"

using namespace dxr;

namespace {

struct Case {
    Model model;
    kernels::NoisyOrEvidence ev;
};

Case make_case(std::size_t diseases, std::size_t positives) {
    GeneratorSpec gs;
    gs.n_diseases = diseases;
    gs.n_manifestations = std::max<std::size_t>(positives + 4, 16);
    gs.n_treatments = 4;
    gs.seed = 11;
    Model model(generate_kb(gs));
    Evidence e;
    for (std::size_t i = 0; i < positives; ++i) e.present.push_back(i);
    for (std::size_t i = positives; i < positives + 4; ++i) e.absent.push_back(i);
    auto ev = kernels::make_evidence(model, e);
    return {std::move(model), std::move(ev)};
}

void BM_QuickscoreSerial(benchmark::State& st) {
    const auto c = make_case(40, static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::quickscore_marginals(c.ev));
}
void BM_QuickscoreParallel(benchmark::State& st) {
    const auto c = make_case(40, static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::parallel::quickscore_marginals(c.ev));
}
void BM_EnumerateSerial(benchmark::State& st) {
    const auto c = make_case(static_cast<std::size_t>(st.range(0)), 6);
    for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::enumerate_marginals(c.ev));
}
void BM_EnumerateParallel(benchmark::State& st) {
    const auto c = make_case(static_cast<std::size_t>(st.range(0)), 6);
    for (auto _ : st) benchmark::DoNotOptimize(kernels::parallel::enumerate_marginals(c.ev));
}
void BM_LikelihoodWeightingSerial(benchmark::State& st) {
    const auto c = make_case(20, 6);
    for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::likelihood_weighting(c.ev, st.range(0), 3));
}
void BM_LikelihoodWeightingParallel(benchmark::State& st) {
    const auto c = make_case(20, 6);
    for (auto _ : st) benchmark::DoNotOptimize(kernels::parallel::likelihood_weighting(c.ev, st.range(0), 3));
}

}  // namespace

BENCHMARK(BM_QuickscoreSerial)->DenseRange(8, 16, 4);
BENCHMARK(BM_QuickscoreParallel)->DenseRange(8, 16, 4);
BENCHMARK(BM_EnumerateSerial)->DenseRange(12, 20, 4);
BENCHMARK(BM_EnumerateParallel)->DenseRange(12, 20, 4);
BENCHMARK(BM_LikelihoodWeightingSerial)->Arg(1 << 16)->Arg(1 << 18);
BENCHMARK(BM_LikelihoodWeightingParallel)->Arg(1 << 16)->Arg(1 << 18);

BENCHMARK_MAIN();
