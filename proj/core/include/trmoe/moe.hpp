// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Task-level mixture-of-experts: a router maps a task embedding to a dense
// gate over N experts, the gate is truncated to its top-k entries and
// renormalised, and the selected experts' outputs are mixed into the
// residual stream. The gate depends only on the task, never on tokens.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "trmoe/ops.hpp"
#include "trmoe/task.hpp"
#include "trmoe/tensor.hpp"

namespace trmoe {

/// One row per task, shape [3, d_task].
struct TaskEmbeddingTable {
    Tensor weights;

    static TaskEmbeddingTable init(std::size_t d_task, double std, Rng& rng);
};

/// logits = W2 · tanh(W1 · LN(τ) + b1) + b2
struct Router {
    Tensor ln_gain;  // [d_task]
    Tensor w1;       // [d_task, hidden]
    Tensor b1;       // [hidden]
    Tensor w2;       // [hidden, n_experts]
    Tensor b2;       // [n_experts]

    static Router init(std::size_t d_task, std::size_t hidden, std::size_t n_experts, double std,
                       Rng& rng);
    std::size_t n_experts() const { return b2.size(); }
};

struct GateDistribution {
    Tensor dense;                       // [N], softmax output
    std::vector<std::size_t> selected;  // strictly increasing, |selected| = min(k, N)
    Tensor sparse;                      // [|selected|], renormalised, aligned with `selected`
};

/// relu feed-forward network d_model -> d_ff -> d_model.
struct FeedForward {
    Tensor w1;  // [d_model, d_ff]
    Tensor b1;  // [d_ff]
    Tensor w2;  // [d_ff, d_model]
    Tensor b2;  // [d_model]

    static FeedForward init(std::size_t d_model, std::size_t d_ff, double std, Rng& rng);
    FeedForward clone() const;
    Tensor operator()(const Tensor& x) const;
    std::size_t parameter_count() const;
};

struct ExpertBank {
    Tensor ln_gain;  // pre-expert layer norm, [d_model]
    std::vector<FeedForward> experts;
    // Number of times each expert was evaluated.
    mutable std::vector<std::size_t> calls;

    std::size_t size() const { return experts.size(); }
    void reset_counters() const;
};

/// Router logits MLP(LN(τ_task)) of shape [N].
Tensor route_logits(const Router& router, const TaskEmbeddingTable& table, TaskId task,
                    double ln_eps = 1e-6);

/// Dense gate π = softmax(MLP(LN(τ_task))) of shape [N].
Tensor route(const Router& router, const TaskEmbeddingTable& table, TaskId task,
             double ln_eps = 1e-6);

/// Keeps the k largest entries of `dense` (ties toward the lower index) and
/// renormalises them. k > N clamps to N, in which case `sparse` is `dense`.
/// The selection is a constant; gradients flow through the retained entries
/// and their normaliser.
GateDistribution sparsify_topk(const Tensor& dense, std::size_t k);

/// Same selection and values as sparsify_topk(route(...), k), but the sparse
/// gate is a softmax over the selected logits. It is then bitwise independent
/// of the unselected logits, whose gradient is exactly zero.
GateDistribution route_topk(const Router& router, const TaskEmbeddingTable& table, TaskId task,
                            std::size_t k, double ln_eps = 1e-6);

/// h + Drop(Σ_{j ∈ selected} π̃_j · E_j(LN(h))). Only selected experts run.
Tensor moe_ffn_forward(const ExpertBank& bank, const GateDistribution& gate, const Tensor& h,
                       Mode mode, Rng* rng, double dropout_rate, double ln_eps = 1e-6);

/// Upcycling: every expert is a copy of `dense` plus independent N(0,
/// noise_std²) noise on each weight and bias.
ExpertBank init_experts(const FeedForward& dense, std::size_t n_experts, double noise_std,
                        Rng& rng);

}  // namespace trmoe
