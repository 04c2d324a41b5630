// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Micro benchmarks for the hot paths: matmul, the routed sublayer, a full
// teacher-forced forward pass and one optimisation step.

#include <benchmark/benchmark.h>

#include "trmoe/data.hpp"
#include "trmoe/model.hpp"
#include "trmoe/moe.hpp"
#include "trmoe/objectives.hpp"
#include "trmoe/ops.hpp"
#include "trmoe/rationale.hpp"
#include "trmoe/synth.hpp"
#include "trmoe/trainer.hpp"

namespace trmoe {
namespace {

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Tensor a = randn({n, n}, 1.0, rng, false);
    const Tensor b = randn({n, n}, 1.0, rng, false);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    Tensor a = randn({n, n}, 1.0, rng, true);
    const Tensor b = randn({n, n}, 1.0, rng, false);
    for (auto _ : state) {
        a.zero_grad();
        backward(sum_all(matmul(a, b)));
    }
}
BENCHMARK(BM_MatmulBackward)->Arg(64);

// Routed sublayer on a 32-token sequence at the desk width, N experts, k=2.
void BM_MoeSublayer(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const auto table = TaskEmbeddingTable::init(32, 0.02, rng);
    const Router router = Router::init(32, 32, n, 0.02, rng);
    const ExpertBank bank = init_experts(FeedForward::init(64, 128, 0.02, rng), n, 0.01, rng);
    const Tensor h = randn({32, 64}, 1.0, rng, false);
    NoGradGuard guard;
    for (auto _ : state) {
        const GateDistribution g = route_topk(router, table, TaskId::Pol, 2);
        benchmark::DoNotOptimize(moe_ffn_forward(bank, g, h, Mode::Eval, nullptr, 0.0).data().data());
    }
}
BENCHMARK(BM_MoeSublayer)->DenseRange(4, 7);

struct DeskFixture {
    std::vector<TaskExample> examples;
    ModelConfig config;

    DeskFixture() {
        auto instances = synth_corpus(120, 7);
        RationaleProvider().annotate(instances);
        const Vocabulary vocab = Vocabulary::build(vocabulary_texts(instances));
        examples = build_examples(instances, vocab);
        config.vocab_size = vocab.size();
    }
};

const DeskFixture& desk() {
    static const DeskFixture fixture;
    return fixture;
}

void BM_ForwardDesk(benchmark::State& state) {
    Rng rng(4);
    const Model model = Model::build(desk().config, rng);
    const TaskExample& ex = desk().examples.front();
    NoGradGuard guard;
    for (auto _ : state)
        benchmark::DoNotOptimize(model.forward_teacher_forced(ex.prompt, ex.target, ex.task, Mode::Eval).data().data());
}
BENCHMARK(BM_ForwardDesk)->Unit(benchmark::kMillisecond);

void BM_TrainStepDesk(benchmark::State& state) {
    Rng rng(5);
    Model model = Model::build(desk().config, rng);
    TrainConfig cfg;
    cfg.max_steps = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train(model, desk().examples, cfg).steps);
        ++cfg.seed;
    }
}
BENCHMARK(BM_TrainStepDesk)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace trmoe

BENCHMARK_MAIN();
