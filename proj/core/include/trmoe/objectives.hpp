// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Training losses: token-mean generation NLL across tasks, the routing
// separation term (mean pairwise cosine between tasks' dense gates), and
// their weighted sum.

#pragma once

#include <array>
#include <span>
#include <vector>

#include "trmoe/model.hpp"
#include "trmoe/task.hpp"
#include "trmoe/tensor.hpp"

namespace trmoe {

struct TaskExample;

struct GenerationLoss {
    Tensor loss;  // Σ NLL / normalizer
    double nll_sum = 0.0;
    std::size_t tokens = 0;
    std::array<double, kNumTasks> per_task_nll{};
    std::array<std::size_t, kNumTasks> per_task_tokens{};

    /// Mean NLL per token for a task, or 0 when the task had no tokens.
    double per_task_mean(TaskId t) const;
};

/// Negative log-likelihood of the batch targets under teacher forcing,
/// divided by `normalizer` (0 means: the batch's own target-token count).
/// Gates are computed once per task present in the batch. Throws DataError
/// on an empty batch.
GenerationLoss generation_loss(const Model& model, std::span<const TaskExample> batch, Mode mode,
                               Rng* rng, double normalizer = 0.0);

/// (1/|M|) Σ_ℓ (1/3) Σ_{t<t'} cos(π_{ℓ,t}, π_{ℓ,t'}) over dense gates.
/// Unordered pairs give the same value as the ordered-pair average. Throws
/// DataError if any layer lacks a gate for some task, or if there are no
/// layers.
Tensor separation_loss(std::span<const LayerGates> gates);

struct LossBreakdown {
    double loss_gen = 0.0;
    double loss_sep = 0.0;
    double loss_total = 0.0;
    double lambda_sep = 0.0;
    std::array<double, kNumTasks> per_task_gen{};
    Tensor total;
};

/// loss_gen + lambda_sep · loss_sep. Throws ConfigError for a negative
/// weight. With lambda_sep == 0 the total equals loss_gen bit for bit.
LossBreakdown total_loss(const Tensor& loss_gen, const Tensor& loss_sep, double lambda_sep);

}  // namespace trmoe
