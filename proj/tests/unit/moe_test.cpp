// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_util.hpp"
#include "trmoe/errors.hpp"
#include "trmoe/gradcheck.hpp"
#include "trmoe/moe.hpp"

namespace trmoe {
namespace {

using testing::values;

TEST(Route, ZeroFinalLayerGivesUniformGate) {
    Rng rng(1);
    const auto table = TaskEmbeddingTable::init(8, 0.02, rng);
    Router r = Router::init(8, 6, 5, 0.02, rng);
    for (double& v : r.w2.mutable_data()) v = 0.0;
    for (TaskId t : kAllTasks)
        for (double p : values(route(r, table, t))) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(Route, PureAndValidForRandomRouter) {
    Rng rng(2);
    const auto table = TaskEmbeddingTable::init(8, 0.5, rng);
    const Router r = Router::init(8, 6, 5, 0.5, rng);
    const auto a = values(route(r, table, TaskId::Imp));
    EXPECT_EQ(a, values(route(r, table, TaskId::Imp)));
    double s = 0;
    for (double p : a) {
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
        s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_NE(a, values(route(r, table, TaskId::Rea)));
}

TEST(SparsifyTopK, RenormalisesRetainedMass) {
    const auto g = sparsify_topk(Tensor::vector({0.5, 0.3, 0.1, 0.06, 0.04}), 2);
    EXPECT_EQ(g.selected, (std::vector<std::size_t>{0, 1}));
    EXPECT_NEAR(g.sparse.at(0), 0.625, 1e-15);
    EXPECT_NEAR(g.sparse.at(1), 0.375, 1e-15);
}

TEST(SparsifyTopK, FullKReturnsDenseExactly) {
    const Tensor d = Tensor::vector({0.1, 0.2, 0.3, 0.4});
    for (std::size_t k : {4u, 7u}) {
        const auto g = sparsify_topk(d, k);
        EXPECT_EQ(values(g.sparse), values(d));
        EXPECT_EQ(g.selected, (std::vector<std::size_t>{0, 1, 2, 3}));
    }
    EXPECT_THROW(sparsify_topk(d, 0), ConfigError);
}

TEST(SparsifyTopK, TiesGoToLowestIndex) {
    const auto g = sparsify_topk(Tensor::vector({0.4, 0.4, 0.2}), 1);
    EXPECT_EQ(g.selected, (std::vector<std::size_t>{0}));
    EXPECT_EQ(g.sparse.item(), 1.0);
    const auto h = sparsify_topk(Tensor::vector({0.1, 0.3, 0.3, 0.3}), 2);
    EXPECT_EQ(h.selected, (std::vector<std::size_t>{1, 2}));
}

TEST(SparsifyTopK, SelectedIndicesIncreasingAndProportional) {
    const auto g = sparsify_topk(Tensor::vector({0.05, 0.3, 0.1, 0.35, 0.2}), 3);
    EXPECT_EQ(g.selected, (std::vector<std::size_t>{1, 3, 4}));
    const double mass = 0.3 + 0.35 + 0.2;
    EXPECT_NEAR(g.sparse.at(0), 0.3 / mass, 1e-15);
    EXPECT_NEAR(g.sparse.at(1), 0.35 / mass, 1e-15);
    EXPECT_NEAR(g.sparse.at(2), 0.2 / mass, 1e-15);
}

ExpertBank random_bank(std::size_t n, std::size_t d, std::size_t ff, Rng& rng) {
    ExpertBank bank;
    bank.ln_gain = Tensor::full({d}, 1.0, true);
    for (std::size_t e = 0; e < n; ++e) bank.experts.push_back(FeedForward::init(d, ff, 0.3, rng));
    bank.calls.assign(n, 0);
    return bank;
}

TEST(MoeForward, ZeroExpertsGiveResidualIdentity) {
    Rng rng(3);
    ExpertBank bank = random_bank(3, 6, 8, rng);
    for (auto& e : bank.experts)
        for (Tensor* t : {&e.w1, &e.b1, &e.w2, &e.b2})
            for (double& v : t->mutable_data()) v = 0.0;
    const Tensor h = randn({4, 6}, 1.0, rng, false);
    const auto g = sparsify_topk(Tensor::vector({0.2, 0.5, 0.3}), 2);
    EXPECT_EQ(values(moe_ffn_forward(bank, g, h, Mode::Eval, nullptr, 0.1)), values(h));
}

TEST(MoeForward, SingleExpertEqualsDenseSublayer) {
    Rng rng(4);
    const ExpertBank bank = random_bank(1, 6, 8, rng);
    const Tensor h = randn({4, 6}, 1.0, rng, false);
    const auto g = sparsify_topk(Tensor::vector({1.0}), 1);
    const Tensor dense = add(h, bank.experts[0](layer_norm(h, bank.ln_gain)));
    EXPECT_EQ(values(moe_ffn_forward(bank, g, h, Mode::Eval, nullptr, 0.1)), values(dense));
}

TEST(MoeForward, IdenticalExpertsEqualSingleExpert) {
    Rng rng(5);
    const FeedForward f = FeedForward::init(6, 8, 0.3, rng);
    const ExpertBank two = init_experts(f, 2, 0.0, rng);
    const ExpertBank one = init_experts(f, 1, 0.0, rng);
    const Tensor h = randn({3, 6}, 1.0, rng, false);
    const auto y2 = values(moe_ffn_forward(two, sparsify_topk(Tensor::vector({0.5, 0.5}), 2), h, Mode::Eval, nullptr, 0));
    const auto y1 = values(moe_ffn_forward(one, sparsify_topk(Tensor::vector({1.0}), 1), h, Mode::Eval, nullptr, 0));
    for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y2[i], y1[i], 1e-15);
}

TEST(MoeForward, OnlySelectedExpertsRun) {
    Rng rng(6);
    const ExpertBank bank = random_bank(5, 4, 6, rng);
    const Tensor h = randn({2, 4}, 1.0, rng, false);
    const auto g = sparsify_topk(Tensor::vector({0.1, 0.4, 0.05, 0.3, 0.15}), 2);
    moe_ffn_forward(bank, g, h, Mode::Eval, nullptr, 0.0);
    moe_ffn_forward(bank, g, h, Mode::Eval, nullptr, 0.0);
    EXPECT_EQ(bank.calls, (std::vector<std::size_t>{0, 2, 0, 2, 0}));
    bank.reset_counters();
    EXPECT_EQ(bank.calls, std::vector<std::size_t>(5, 0));
}

TEST(MoeForward, ShapeMismatchRejected) {
    Rng rng(7);
    const ExpertBank bank = random_bank(2, 4, 6, rng);
    const auto g = sparsify_topk(Tensor::vector({0.5, 0.5}), 1);
    EXPECT_THROW(moe_ffn_forward(bank, g, Tensor::zeros({2, 5}), Mode::Eval, nullptr, 0.0), ShapeError);
    const auto wrong = sparsify_topk(Tensor::vector({0.2, 0.3, 0.5}), 1);
    EXPECT_THROW(moe_ffn_forward(bank, wrong, Tensor::zeros({2, 4}), Mode::Eval, nullptr, 0.0), ShapeError);
}

TEST(InitExperts, ZeroNoiseClonesExactly) {
    Rng rng(8);
    const FeedForward f = FeedForward::init(4, 6, 0.3, rng);
    const ExpertBank bank = init_experts(f, 4, 0.0, rng);
    for (const auto& e : bank.experts) {
        EXPECT_EQ(values(e.w1), values(f.w1));
        EXPECT_EQ(values(e.w2), values(f.w2));
        EXPECT_EQ(values(e.b1), values(f.b1));
        EXPECT_EQ(values(e.b2), values(f.b2));
    }
    // Clones are independent storage.
    EXPECT_NE(bank.experts[0].w1.node(), bank.experts[1].w1.node());
    EXPECT_THROW(init_experts(f, 2, -1.0, rng), ConfigError);
}

TEST(InitExperts, NoiseSeparatesExperts) {
    Rng rng(9);
    const FeedForward f = FeedForward::init(4, 6, 0.3, rng);
    const ExpertBank bank = init_experts(f, 3, 0.02, rng);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b) {
            double dist = 0;
            const auto wa = values(bank.experts[a].w1), wb = values(bank.experts[b].w1);
            for (std::size_t i = 0; i < wa.size(); ++i) dist += (wa[i] - wb[i]) * (wa[i] - wb[i]);
            EXPECT_GT(dist, 0.0);
        }
}

TEST(MoeRouting, RouteTopkMatchesRenormalisedDense) {
    Rng rng(12);
    auto table = TaskEmbeddingTable::init(6, 0.8, rng);
    for (std::size_t n : {1u, 3u, 5u})
        for (std::size_t k = 1; k <= n; ++k) {
            Router router = Router::init(6, 5, n, 0.8, rng);
            for (TaskId t : kAllTasks) {
                const auto ref = sparsify_topk(route(router, table, t), k);
                const auto got = route_topk(router, table, t, k);
                EXPECT_EQ(got.selected, ref.selected);
                const auto a = values(got.sparse), b = values(ref.sparse);
                ASSERT_EQ(a.size(), b.size());
                for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
            }
        }
}

TEST(MoeRouting, RouteTopkIgnoresUnselectedLogits) {
    Rng rng(13);
    auto table = TaskEmbeddingTable::init(6, 0.8, rng);
    Router router = Router::init(6, 5, 4, 0.8, rng);
    const auto before = route_topk(router, table, TaskId::Pol, 2);
    std::size_t dropped = 0;
    while (std::find(before.selected.begin(), before.selected.end(), dropped) != before.selected.end()) ++dropped;
    router.b2.mutable_data()[dropped] -= 0.5;
    const auto after = route_topk(router, table, TaskId::Pol, 2);
    ASSERT_EQ(after.selected, before.selected);
    EXPECT_EQ(values(after.sparse), values(before.sparse));
}

TEST(MoeGradient, RouterAndEmbeddingThroughTopK) {
    Rng rng(10);
    auto table = TaskEmbeddingTable::init(6, 0.8, rng);
    Router router = Router::init(6, 5, 4, 0.8, rng);
    const ExpertBank bank = random_bank(4, 5, 7, rng);
    const Tensor h = randn({3, 5}, 1.0, rng, false);
    const Tensor probe = randn({3, 5}, 1.0, rng, false);
    // Confirm the top-2 set is locally stable at this point.
    const auto p = values(route(router, table, TaskId::Rea));
    auto sorted = p;
    std::sort(sorted.rbegin(), sorted.rend());
    ASSERT_GT(sorted[1] - sorted[2], 1e-3);

    std::vector<NamedTensor> params{{"task", table.weights}, {"ln", router.ln_gain}, {"w1", router.w1},
                                    {"b1", router.b1},       {"w2", router.w2},      {"b2", router.b2}};
    auto f = [&] {
        const auto g = route_topk(router, table, TaskId::Rea, 2);
        return sum_all(mul(moe_ffn_forward(bank, g, h, Mode::Eval, nullptr, 0.0), probe));
    };
    const auto report = check_gradients(f, params);
    EXPECT_TRUE(report.passed()) << report.max_rel_error;
    EXPECT_LT(report.max_rel_error, 1e-4);
}

}  // namespace
}  // namespace trmoe
