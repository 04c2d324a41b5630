// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Routing diagnostics over a plain-number snapshot of the gates: entropy,
// top-1 dominance and the task-by-task gate similarity matrix.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "trmoe/model.hpp"
#include "trmoe/task.hpp"

namespace trmoe {

struct RoutingSnapshot {
    struct Layer {
        std::string name;
        std::array<std::vector<double>, kNumTasks> dense;
        std::array<std::vector<std::size_t>, kNumTasks> selected;
        std::array<std::vector<double>, kNumTasks> sparse;
    };
    std::vector<Layer> layers;

    /// Eval-mode gates of every routed block.
    static RoutingSnapshot capture(const Model& model);
    /// Snapshot from dense gates only; the sparse part is derived with top-k.
    static RoutingSnapshot from_dense(const std::vector<std::array<std::vector<double>, kNumTasks>>& dense,
                                      std::size_t top_k);
    std::size_t n_experts() const { return layers.empty() ? 0 : layers.front().dense[0].size(); }
};

/// H(t) = mean over layers of -Σ p ln p on dense gates, with 0 ln 0 = 0.
std::array<double, kNumTasks> routing_entropy(const RoutingSnapshot& snap);

struct Dominance {
    std::size_t expert = 0;
    double probability = 0.0;
};

/// Per layer and task; ties go to the lowest expert index.
std::vector<std::array<Dominance, kNumTasks>> top1_dominance(const RoutingSnapshot& snap);

using SimilarityMatrix = std::array<std::array<double, kNumTasks>, kNumTasks>;

/// Entry (t, t') is the layer mean of cos(π_t, π_t').
SimilarityMatrix gate_similarity_matrix(const RoutingSnapshot& snap);
/// Mean of the off-diagonal entries.
double off_diagonal_mean(const SimilarityMatrix& m);

}  // namespace trmoe
