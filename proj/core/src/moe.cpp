// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/moe.hpp"

#include <algorithm>
#include <numeric>

#include "trmoe/errors.hpp"

namespace trmoe {

TaskEmbeddingTable TaskEmbeddingTable::init(std::size_t d_task, double std, Rng& rng) {
    return {randn({kNumTasks, d_task}, std, rng)};
}

Router Router::init(std::size_t d_task, std::size_t hidden, std::size_t n_experts, double std,
                    Rng& rng) {
    Router r;
    r.ln_gain = Tensor::full({d_task}, 1.0, true);
    r.w1 = randn({d_task, hidden}, std, rng);
    r.b1 = Tensor::zeros({hidden}, true);
    r.w2 = randn({hidden, n_experts}, std, rng);
    r.b2 = Tensor::zeros({n_experts}, true);
    return r;
}

FeedForward FeedForward::init(std::size_t d_model, std::size_t d_ff, double std, Rng& rng) {
    FeedForward f;
    f.w1 = randn({d_model, d_ff}, std, rng);
    f.b1 = Tensor::zeros({d_ff}, true);
    f.w2 = randn({d_ff, d_model}, std, rng);
    f.b2 = Tensor::zeros({d_model}, true);
    return f;
}

FeedForward FeedForward::clone() const {
    auto copy = [](const Tensor& t) {
        Tensor c = t.detach();
        c.set_requires_grad(t.requires_grad());
        return c;
    };
    return {copy(w1), copy(b1), copy(w2), copy(b2)};
}

Tensor FeedForward::operator()(const Tensor& x) const {
    return add(matmul(relu(add(matmul(x, w1), b1)), w2), b2);
}

std::size_t FeedForward::parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
}

void ExpertBank::reset_counters() const { std::fill(calls.begin(), calls.end(), 0); }

Tensor route_logits(const Router& router, const TaskEmbeddingTable& table, TaskId task, double ln_eps) {
    const int row = static_cast<int>(task_index(task));
    const Tensor tau = embedding(table.weights, std::span<const int>(&row, 1));
    const Tensor hidden = tanh(add(matmul(layer_norm(tau, router.ln_gain, ln_eps), router.w1), router.b1));
    return reshape(add(matmul(hidden, router.w2), router.b2), {router.n_experts()});
}

namespace {

Tensor softmax_vector(const Tensor& v) { return reshape(softmax(reshape(v, {1, v.size()}), 1), {v.size()}); }

}  // namespace

Tensor route(const Router& router, const TaskEmbeddingTable& table, TaskId task, double ln_eps) {
    return softmax_vector(route_logits(router, table, task, ln_eps));
}

GateDistribution route_topk(const Router& router, const TaskEmbeddingTable& table, TaskId task,
                            std::size_t k, double ln_eps) {
    const Tensor logits = route_logits(router, table, task, ln_eps);
    GateDistribution gate = sparsify_topk(softmax_vector(logits), k);
    if (gate.selected.size() < gate.dense.size()) gate.sparse = softmax_vector(take(logits, gate.selected));
    return gate;
}

GateDistribution sparsify_topk(const Tensor& dense, std::size_t k) {
    if (dense.rank() != 1) throw ShapeError("sparsify_topk: dense gate must be rank 1, got " + shape_str(dense.shape()));
    if (k == 0) throw ConfigError("top_k", "must be at least 1");
    const std::size_t n = dense.size();
    GateDistribution gate;
    gate.dense = dense;
    if (k >= n) {
        gate.selected.resize(n);
        std::iota(gate.selected.begin(), gate.selected.end(), 0);
        gate.sparse = dense;
        return gate;
    }
    const auto p = dense.data();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    gate.selected.assign(order.begin(), order.begin() + static_cast<long>(k));
    std::sort(gate.selected.begin(), gate.selected.end());
    const Tensor kept = take(dense, gate.selected);
    gate.sparse = scale(kept, reciprocal(sum_all(kept), 0.0));
    return gate;
}

Tensor moe_ffn_forward(const ExpertBank& bank, const GateDistribution& gate, const Tensor& h,
                       Mode mode, Rng* rng, double dropout_rate, double ln_eps) {
    if (h.shape().back() != bank.ln_gain.size())
        throw ShapeError("moe_ffn_forward: hidden state " + shape_str(h.shape()) +
                         " does not match expert width " + std::to_string(bank.ln_gain.size()));
    if (gate.dense.size() != bank.size())
        throw ShapeError("moe_ffn_forward: gate over " + std::to_string(gate.dense.size()) +
                         " experts for a bank of " + std::to_string(bank.size()));
    if (bank.calls.size() != bank.size()) bank.calls.assign(bank.size(), 0);
    const Tensor x = layer_norm(h, bank.ln_gain, ln_eps);
    Tensor mixture;
    for (std::size_t i = 0; i < gate.selected.size(); ++i) {
        const std::size_t j = gate.selected[i];
        ++bank.calls[j];
        const Tensor weight = take(gate.sparse, std::span<const std::size_t>(&i, 1));
        Tensor term = scale(bank.experts[j](x), weight);
        mixture = mixture.defined() ? add(mixture, term) : term;
    }
    return add(h, dropout(mixture, dropout_rate, mode, rng));
}

ExpertBank init_experts(const FeedForward& dense, std::size_t n_experts, double noise_std, Rng& rng) {
    if (noise_std < 0.0) throw ConfigError("expert_noise_std", "must be non-negative");
    if (n_experts == 0) throw ConfigError("n_experts", "must be at least 1");
    ExpertBank bank;
    bank.ln_gain = Tensor::full({dense.w1.dim(0)}, 1.0, true);
    std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
    for (std::size_t e = 0; e < n_experts; ++e) {
        FeedForward expert = dense.clone();
        if (noise_std > 0.0)
            for (Tensor* t : {&expert.w1, &expert.b1, &expert.w2, &expert.b2})
                for (double& v : t->mutable_data()) v += noise(rng);
        for (Tensor* t : {&expert.w1, &expert.b1, &expert.w2, &expert.b2}) t->set_requires_grad(true);
        bank.experts.push_back(std::move(expert));
    }
    bank.calls.assign(n_experts, 0);
    return bank;
}

}  // namespace trmoe
