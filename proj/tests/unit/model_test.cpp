// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"
#include "trmoe/errors.hpp"
#include "trmoe/gradcheck.hpp"
#include "trmoe/model.hpp"

namespace trmoe {
namespace {

using testing::random_tokens;
using testing::tiny_config;
using testing::values;

TEST(ModelBuild, RoutedBlocksInBothStacks) {
    ModelConfig c = tiny_config();
    Rng rng(1);
    const Model m = Model::build(c, rng);
    EXPECT_EQ(m.routed_layer_names(), (std::vector<std::string>{"enc.2", "dec.2"}));
    ASSERT_EQ(m.encoder_blocks().size(), 2u);
    EXPECT_TRUE(m.encoder_blocks()[0].ffn.has_value());
    EXPECT_TRUE(m.encoder_blocks()[1].moe.has_value());
    EXPECT_FALSE(m.encoder_blocks()[1].ffn.has_value());
    EXPECT_TRUE(m.decoder_blocks()[0].cross_attn.has_value());
    EXPECT_FALSE(m.encoder_blocks()[0].cross_attn.has_value());
    EXPECT_EQ(m.decoder_blocks()[1].moe->bank.size(), 3u);
    ASSERT_NE(m.find_parameter("out.w"), nullptr);
    EXPECT_EQ(m.find_parameter("out.w")->shape(), (Shape{16, 32}));
    EXPECT_NE(m.find_parameter("task_embedding"), nullptr);
    EXPECT_NE(m.find_parameter("dec.2.moe.expert2.w1"), nullptr);
    EXPECT_EQ(m.find_parameter("enc.2.ffn.w1"), nullptr);
    EXPECT_EQ(m.find_parameter("missing"), nullptr);
}

TEST(ModelBuild, ParameterNamesUnique) {
    Rng rng(2);
    const Model m = Model::build(tiny_config(), rng);
    std::vector<std::string> names;
    std::size_t total = 0;
    for (const auto& p : m.parameters()) {
        names.push_back(p.name);
        total += p.tensor.size();
        EXPECT_TRUE(p.tensor.requires_grad()) << p.name;
    }
    std::sort(names.begin(), names.end());
    EXPECT_EQ(std::adjacent_find(names.begin(), names.end()), names.end());
    EXPECT_EQ(total, m.parameter_count());
}

TEST(ModelBuild, DenseModelHasNoRouting) {
    ModelConfig c = tiny_config();
    c.routed_layers.clear();
    Rng rng(3);
    const Model m = Model::build(c, rng);
    EXPECT_TRUE(m.routed_blocks().empty());
    EXPECT_TRUE(m.compute_gates(TaskId::Pol).empty());
    EXPECT_EQ(m.find_parameter("task_embedding"), nullptr);
    const std::vector<int> prompt{3, 4, 5}, target{6, 1};
    EXPECT_EQ(m.forward_teacher_forced(prompt, target, TaskId::Imp, Mode::Eval).shape(), (Shape{2, 32}));
}

TEST(ModelBuild, InvalidConfigNamesField) {
    Rng rng(4);
    auto expect_field = [&](ModelConfig c, const std::string& field) {
        try {
            (void)Model::build(c, rng);
            ADD_FAILURE() << "expected ConfigError for " << field;
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.field(), field);
        }
    };
    ModelConfig c = tiny_config();
    c.n_heads = 3;
    expect_field(c, "n_heads");
    c = tiny_config();
    c.top_k = 4;
    expect_field(c, "top_k");
    c = tiny_config();
    c.routed_layers = {3};
    expect_field(c, "routed_layers");
    c = tiny_config();
    c.routed_layers = {1, 1};
    expect_field(c, "routed_layers");
    c = tiny_config();
    c.vocab_size = 3;
    expect_field(c, "vocab_size");
    c = tiny_config();
    c.dropout_rate = 1.0;
    expect_field(c, "dropout_rate");
}

TEST(ModelBuild, SameSeedSameWeights) {
    Rng a(5), b(5), c(6);
    const Model ma = Model::build(tiny_config(), a);
    const Model mb = Model::build(tiny_config(), b);
    const Model mc = Model::build(tiny_config(), c);
    for (std::size_t i = 0; i < ma.parameters().size(); ++i)
        EXPECT_EQ(values(ma.parameters()[i].tensor), values(mb.parameters()[i].tensor));
    EXPECT_NE(values(*ma.find_parameter("out.w")), values(*mc.find_parameter("out.w")));
}

TEST(ModelBuild, ExpertsStartAsNoisyClones) {
    ModelConfig c = tiny_config();
    c.expert_noise_std = 0.0;
    Rng rng(7);
    const Model exact = Model::build(c, rng);
    const auto& bank = exact.encoder_blocks()[1].moe->bank;
    EXPECT_EQ(values(bank.experts[0].w1), values(bank.experts[2].w1));
    c.expert_noise_std = 0.01;
    const Model noisy = Model::build(c, rng);
    const auto& nb = noisy.encoder_blocks()[1].moe->bank;
    EXPECT_NE(values(nb.experts[0].w1), values(nb.experts[2].w1));
}

TEST(ModelClone, DeepCopy) {
    Rng rng(8);
    Model m = Model::build(tiny_config(), rng);
    Model copy = m.clone();
    const auto before = values(*copy.find_parameter("out.b"));
    for (double& v : m.parameters().back().tensor.mutable_data()) v += 1.0;
    EXPECT_EQ(values(*copy.find_parameter("out.b")), before);
    EXPECT_EQ(copy.routed_layer_names(), m.routed_layer_names());
}

TEST(ModelForward, DecoderIsCausal) {
    Rng rng(9);
    const Model m = Model::build(tiny_config(), rng);
    const auto prompt = random_tokens(6, 32, rng);
    std::vector<int> target{5, 6, 7, 8, 1};
    const auto a = values(m.forward_teacher_forced(prompt, target, TaskId::Pol, Mode::Eval));
    target[2] = 20;
    const auto b = values(m.forward_teacher_forced(prompt, target, TaskId::Pol, Mode::Eval));
    // Row s sees target[<s]; changing target[2] only alters rows 3 and 4.
    for (std::size_t i = 0; i < 3 * 32; ++i) EXPECT_EQ(a[i], b[i]) << i;
    bool changed = false;
    for (std::size_t i = 3 * 32; i < a.size(); ++i) changed |= a[i] != b[i];
    EXPECT_TRUE(changed);
}

TEST(ModelForward, EncoderAttendsBothDirections) {
    Rng rng(10);
    const Model m = Model::build(tiny_config(), rng);
    std::vector<int> prompt{4, 5, 6, 7};
    const auto a = values(m.encode(prompt, TaskId::Imp, Mode::Eval, nullptr));
    prompt[3] = 9;
    const auto b = values(m.encode(prompt, TaskId::Imp, Mode::Eval, nullptr));
    bool first_row_changed = false;
    for (std::size_t i = 0; i < 16; ++i) first_row_changed |= a[i] != b[i];
    EXPECT_TRUE(first_row_changed);
}

TEST(ModelForward, TaskChangesOutputThroughRouting) {
    ModelConfig c = tiny_config();
    c.init_std = 0.3;
    Rng rng(11);
    const Model m = Model::build(c, rng);
    const std::vector<int> prompt{4, 5, 6}, target{7, 1};
    EXPECT_NE(values(m.forward_teacher_forced(prompt, target, TaskId::Pol, Mode::Eval)),
              values(m.forward_teacher_forced(prompt, target, TaskId::Rea, Mode::Eval)));
}

TEST(ModelForward, EvalDeterministicTrainDropoutVaries) {
    ModelConfig c = tiny_config();
    c.dropout_rate = 0.3;
    Rng rng(12);
    const Model m = Model::build(c, rng);
    const std::vector<int> prompt{4, 5, 6}, target{7, 8, 1};
    EXPECT_EQ(values(m.forward_teacher_forced(prompt, target, TaskId::Pol, Mode::Eval)),
              values(m.forward_teacher_forced(prompt, target, TaskId::Pol, Mode::Eval)));
    Rng d1(1), d2(1), d3(2);
    const auto t1 = values(m.forward_teacher_forced(prompt, target, TaskId::Pol, Mode::Train, &d1));
    EXPECT_EQ(t1, values(m.forward_teacher_forced(prompt, target, TaskId::Pol, Mode::Train, &d2)));
    EXPECT_NE(t1, values(m.forward_teacher_forced(prompt, target, TaskId::Pol, Mode::Train, &d3)));
}

TEST(ModelForward, RejectsBadTokens) {
    Rng rng(13);
    const Model m = Model::build(tiny_config(), rng);
    const std::vector<int> ok{4, 5}, empty{}, oov{4, 32}, negative{-1};
    const std::vector<int> longer(33, 4);
    EXPECT_THROW(m.forward_teacher_forced(empty, ok, TaskId::Pol, Mode::Eval), DataError);
    EXPECT_THROW(m.forward_teacher_forced(ok, empty, TaskId::Pol, Mode::Eval), DataError);
    EXPECT_THROW(m.forward_teacher_forced(oov, ok, TaskId::Pol, Mode::Eval), DataError);
    EXPECT_THROW(m.forward_teacher_forced(ok, negative, TaskId::Pol, Mode::Eval), DataError);
    EXPECT_THROW(m.forward_teacher_forced(longer, ok, TaskId::Pol, Mode::Eval), DataError);
    EXPECT_THROW(m.greedy_decode(empty, TaskId::Pol, 4), DataError);
}

TEST(ModelGates, DenseGatesAreDistributions) {
    ModelConfig c = tiny_config();
    c.init_std = 0.5;
    Rng rng(14);
    const Model m = Model::build(c, rng);
    const auto gates = m.dense_gates();
    ASSERT_EQ(gates.size(), 2u);
    for (const auto& layer : gates)
        for (const Tensor& g : layer) {
            double s = 0;
            for (double p : values(g)) s += p;
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    const auto sparse = m.compute_gates(TaskId::Imp);
    ASSERT_EQ(sparse.size(), 2u);
    EXPECT_EQ(sparse[0].selected.size(), 2u);
    EXPECT_EQ(values(sparse[0].dense), values(gates[0][1]));
}

TEST(ModelDecode, StopsAtEosOrBudget) {
    Rng rng(15);
    Model m = Model::build(tiny_config(), rng);
    const std::vector<int> prompt{4, 5, 6};
    EXPECT_LE(m.greedy_decode(prompt, TaskId::Pol, 3).size(), 3u);
    for (auto& p : m.parameters())
        if (p.name == "out.b") p.tensor.mutable_data()[kEosId] = 100.0;
    EXPECT_EQ(m.greedy_decode(prompt, TaskId::Pol, 5), (std::vector<int>{kEosId}));
    for (auto& p : m.parameters())
        if (p.name == "out.b") {
            p.tensor.mutable_data()[kEosId] = 0.0;
            p.tensor.mutable_data()[7] = 100.0;
        }
    EXPECT_EQ(m.greedy_decode(prompt, TaskId::Pol, 4), (std::vector<int>{7, 7, 7, 7}));
}

TEST(ModelDecode, MatchesTeacherForcedArgmax) {
    ModelConfig c = tiny_config();
    c.init_std = 0.4;
    Rng rng(16);
    const Model m = Model::build(c, rng);
    const std::vector<int> prompt{4, 9, 12, 3};
    const auto out = m.greedy_decode(prompt, TaskId::Rea, 5);
    ASSERT_FALSE(out.empty());
    std::vector<int> target = out;
    const auto logits = m.forward_teacher_forced(prompt, target, TaskId::Rea, Mode::Eval);
    for (std::size_t s = 0; s < out.size(); ++s) {
        int best = 0;
        for (std::size_t v = 1; v < 32; ++v)
            if (logits.at(s, v) > logits.at(s, static_cast<std::size_t>(best))) best = static_cast<int>(v);
        EXPECT_EQ(best, out[s]) << s;
    }
}

TEST(ModelGradient, FullModelMatchesFiniteDifferences) {
    ModelConfig c = tiny_config();
    c.init_std = 0.5;
    Rng rng(17);
    Model m = Model::build(c, rng);
    for (const auto& layer : m.dense_gates())
        for (const Tensor& g : layer) {
            auto p = values(g);
            std::sort(p.rbegin(), p.rend());
            ASSERT_GT(p[1] - p[2], 1e-3);
        }
    const std::vector<int> prompt{4, 5, 6, 7}, target{8, 9, 1};
    auto f = [&] {
        return cross_entropy_sum(m.forward_teacher_forced(prompt, target, TaskId::Imp, Mode::Eval), target);
    };
    GradCheckOptions opt;
    opt.max_entries_per_tensor = 6;
    const auto report = check_gradients(f, m.parameters(), opt);
    EXPECT_TRUE(report.passed()) << report.max_rel_error;
}

}  // namespace
}  // namespace trmoe
