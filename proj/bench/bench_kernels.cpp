// Serial reference vs OpenMP kernels, plus one training step at desk scale.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "fecl/harness.hpp"
#include "fecl/kernels.hpp"
#include "fecl/random.hpp"

using namespace fecl;

namespace {

Tensor filled(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(rows, cols);
    for (auto& x : t.values()) x = standard_normal(rng);
    return t;
}

template <void (*Gemm)(const Tensor&, const Tensor&, Tensor&, bool)>
void bm_gemm_nn(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = filled(n, n, 1), b = filled(n, n, 2);
    Tensor c(n, n);
    for (auto _ : state) {
        Gemm(a, b, c, false);
        benchmark::DoNotOptimize(c.values().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <Tensor (*Cosine)(const Tensor&)>
void bm_pairwise_cosine(benchmark::State& state) {
    const auto x = filled(static_cast<std::size_t>(state.range(0)), 128, 3);
    for (auto _ : state) benchmark::DoNotOptimize(Cosine(x));
}

template <double (*Potential)(const Tensor&, double)>
void bm_gaussian_potential(benchmark::State& state) {
    const auto x = filled(static_cast<std::size_t>(state.range(0)), 32, 4);
    for (auto _ : state) benchmark::DoNotOptimize(Potential(x, 2.0));
}

void bm_train_step(benchmark::State& state) {
    auto config = synthetic_run_config(0);
    config.synthetic.train_per_target = 40;
    auto bundle = prepare_bundle(config, 0);
    mask_bundle(bundle, config.topics, Variant::Full, config.random_mask_fraction, 0);
    FeclModel model(config.model, build_vocabulary(bundle));
    Trainer trainer(model, config.train);
    const std::span<const Instance> batch(bundle.train.data(), static_cast<std::size_t>(config.train.batch_size));
    for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch).total);
}

}  // namespace

BENCHMARK(bm_gemm_nn<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm_nn<kernels::parallel::gemm_nn>)->Name("gemm_nn/parallel")->Arg(64)->Arg(256);
BENCHMARK(bm_pairwise_cosine<kernels::serial::pairwise_cosine>)->Name("pairwise_cosine/serial")->Arg(256);
BENCHMARK(bm_pairwise_cosine<kernels::parallel::pairwise_cosine>)->Name("pairwise_cosine/parallel")->Arg(256);
BENCHMARK(bm_gaussian_potential<kernels::serial::mean_gaussian_potential>)->Name("gaussian_potential/serial")->Arg(512);
BENCHMARK(bm_gaussian_potential<kernels::parallel::mean_gaussian_potential>)->Name("gaussian_potential/parallel")->Arg(512);
BENCHMARK(bm_train_step)->Name("train_step/synthetic")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
