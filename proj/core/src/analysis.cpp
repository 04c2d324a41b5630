// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/analysis.hpp"

#include <cmath>

#include "trmoe/errors.hpp"

namespace trmoe {

RoutingSnapshot RoutingSnapshot::capture(const Model& model) {
    NoGradGuard no_grad;
    RoutingSnapshot snap;
    const auto names = model.routed_layer_names();
    for (const auto& n : names) snap.layers.push_back({n, {}, {}, {}});
    for (TaskId t : kAllTasks) {
        const auto gates = model.compute_gates(t);
        for (std::size_t l = 0; l < gates.size(); ++l) {
            const auto i = task_index(t);
            const auto d = gates[l].dense.data();
            const auto s = gates[l].sparse.data();
            snap.layers[l].dense[i].assign(d.begin(), d.end());
            snap.layers[l].selected[i] = gates[l].selected;
            snap.layers[l].sparse[i].assign(s.begin(), s.end());
        }
    }
    return snap;
}

RoutingSnapshot RoutingSnapshot::from_dense(const std::vector<std::array<std::vector<double>, kNumTasks>>& dense,
                                            std::size_t top_k) {
    NoGradGuard no_grad;
    RoutingSnapshot snap;
    for (std::size_t l = 0; l < dense.size(); ++l) {
        RoutingSnapshot::Layer layer;
        layer.name = "layer" + std::to_string(l);
        for (std::size_t t = 0; t < kNumTasks; ++t) {
            layer.dense[t] = dense[l][t];
            const GateDistribution g = sparsify_topk(Tensor::vector(dense[l][t], false), top_k);
            layer.selected[t] = g.selected;
            const auto s = g.sparse.data();
            layer.sparse[t].assign(s.begin(), s.end());
        }
        snap.layers.push_back(std::move(layer));
    }
    return snap;
}

std::array<double, kNumTasks> routing_entropy(const RoutingSnapshot& snap) {
    std::array<double, kNumTasks> h{};
    if (snap.layers.empty()) return h;
    for (const auto& layer : snap.layers)
        for (std::size_t t = 0; t < kNumTasks; ++t)
            for (double p : layer.dense[t])
                if (p > 0.0) h[t] -= p * std::log(p);
    for (auto& v : h) v /= static_cast<double>(snap.layers.size());
    return h;
}

std::vector<std::array<Dominance, kNumTasks>> top1_dominance(const RoutingSnapshot& snap) {
    std::vector<std::array<Dominance, kNumTasks>> out;
    for (const auto& layer : snap.layers) {
        std::array<Dominance, kNumTasks> row{};
        for (std::size_t t = 0; t < kNumTasks; ++t) {
            const auto& p = layer.dense[t];
            for (std::size_t j = 0; j < p.size(); ++j)
                if (j == 0 || p[j] > row[t].probability) row[t] = {j, p[j]};
        }
        out.push_back(row);
    }
    return out;
}

SimilarityMatrix gate_similarity_matrix(const RoutingSnapshot& snap) {
    NoGradGuard no_grad;
    SimilarityMatrix m{};
    if (snap.layers.empty()) return m;
    // Reuses the differentiable primitive so this matches the training
    // objective term for term.
    for (const auto& layer : snap.layers) {
        std::array<Tensor, kNumTasks> g;
        for (std::size_t t = 0; t < kNumTasks; ++t) g[t] = Tensor::vector(layer.dense[t], false);
        for (std::size_t a = 0; a < kNumTasks; ++a)
            for (std::size_t b = 0; b < kNumTasks; ++b)
                m[a][b] += a == b ? 1.0 : cosine_similarity(g[std::min(a, b)], g[std::max(a, b)]).item();
    }
    for (auto& row : m)
        for (auto& v : row) v /= static_cast<double>(snap.layers.size());
    return m;
}

double off_diagonal_mean(const SimilarityMatrix& m) {
    double s = 0.0;
    for (std::size_t a = 0; a < kNumTasks; ++a)
        for (std::size_t b = 0; b < kNumTasks; ++b)
            if (a != b) s += m[a][b];
    return s / static_cast<double>(kNumTasks * (kNumTasks - 1));
}

}  // namespace trmoe
