// Per-step cost of each gradient combiner on the synthetic multitask MLP's
// hidden-activation gradients, swept over the task count. The headline
// comparison is masking vs projection vs min-norm at 40 tasks.

#include <benchmark/benchmark.h>

#include "multigrad/baselines.hpp"
#include "multigrad/graddrop.hpp"
#include "multigrad/problems.hpp"

using namespace multigrad;

namespace {

TaskGradients make_gradients(std::size_t n_tasks) {
    auto p = mlp_multitask_problem(11, 32, n_tasks);
    RngStream rng(3, 0);
    Tensor w = p->init_weights(rng);
    return p->combine_grads(w);
}

} // namespace

static void BM_graddrop(benchmark::State& state) {
    TaskGradients tg = make_gradients(std::size_t(state.range(0)));
    std::uint64_t trial = 0;
    for (auto _ : state) {
        CombinerConfig cfg;
        cfg.rng = RngStream(++trial, 1);
        benchmark::DoNotOptimize(graddrop(tg, cfg).first.data());
    }
}
BENCHMARK(BM_graddrop)->Arg(2)->Arg(10)->Arg(40);

static void BM_random_graddrop(benchmark::State& state) {
    TaskGradients tg = make_gradients(std::size_t(state.range(0)));
    std::uint64_t trial = 0;
    for (auto _ : state) {
        CombinerConfig cfg;
        cfg.k = 0.0;
        cfg.rng = RngStream(++trial, 1);
        benchmark::DoNotOptimize(graddrop(tg, cfg).first.data());
    }
}
BENCHMARK(BM_random_graddrop)->Arg(2)->Arg(10)->Arg(40);

static void BM_naive_sum(benchmark::State& state) {
    TaskGradients tg = make_gradients(std::size_t(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(naive_sum(tg).data());
}
BENCHMARK(BM_naive_sum)->Arg(2)->Arg(10)->Arg(40);

static void BM_clipped_sum(benchmark::State& state) {
    TaskGradients tg = make_gradients(std::size_t(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(clip_global_norm(naive_sum(tg), 1.0).data());
}
BENCHMARK(BM_clipped_sum)->Arg(2)->Arg(10)->Arg(40);

static void BM_pcgrad_static(benchmark::State& state) {
    TaskGradients tg = make_gradients(std::size_t(state.range(0)));
    RngStream rng(1, 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(pcgrad(tg, rng, false).data());
}
BENCHMARK(BM_pcgrad_static)->Arg(2)->Arg(10)->Arg(40);

static void BM_pcgrad_iterative(benchmark::State& state) {
    TaskGradients tg = make_gradients(std::size_t(state.range(0)));
    RngStream rng(1, 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(pcgrad(tg, rng, true).data());
}
BENCHMARK(BM_pcgrad_iterative)->Arg(2)->Arg(10)->Arg(40);

static void BM_mgda(benchmark::State& state) {
    TaskGradients tg = make_gradients(std::size_t(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(mgda_minnorm(tg).direction.data());
}
BENCHMARK(BM_mgda)->Arg(2)->Arg(10)->Arg(40);

static void BM_purity_and_masks(benchmark::State& state) {
    TaskGradients tg = make_gradients(std::size_t(state.range(0)));
    std::vector<Tensor> marg;
    for (const Tensor& g : tg.grads) marg.push_back(sum_over_batch(g));
    std::uint64_t trial = 0;
    for (auto _ : state) {
        Tensor fp = activation(purity(marg), 1.0);
        RngStream rng(++trial, 1);
        benchmark::DoNotOptimize(sample_masks(marg, fp, rng).masks.data());
    }
}
BENCHMARK(BM_purity_and_masks)->Arg(2)->Arg(10)->Arg(40);

BENCHMARK_MAIN();
