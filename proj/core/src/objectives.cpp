// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/objectives.hpp"

#include <optional>

#include "trmoe/data.hpp"
#include "trmoe/errors.hpp"

namespace trmoe {

double GenerationLoss::per_task_mean(TaskId t) const {
    const auto i = task_index(t);
    return per_task_tokens[i] ? per_task_nll[i] / static_cast<double>(per_task_tokens[i]) : 0.0;
}

GenerationLoss generation_loss(const Model& model, std::span<const TaskExample> batch, Mode mode, Rng* rng,
                               double normalizer) {
    if (batch.empty()) throw DataError("generation_loss: empty batch");
    GenerationLoss out;
    std::array<std::optional<std::vector<GateDistribution>>, kNumTasks> gates;
    const bool routed = !model.config().routed_layers.empty();
    Tensor nll;
    for (const TaskExample& ex : batch) {
        const auto ti = task_index(ex.task);
        if (routed && !gates[ti]) gates[ti] = model.compute_gates(ex.task);
        const Tensor logits = model.forward_teacher_forced(ex.prompt, ex.target, ex.task, mode, rng,
                                                           routed ? &*gates[ti] : nullptr);
        const Tensor ce = cross_entropy_sum(logits, ex.target);
        out.per_task_nll[ti] += ce.item();
        out.per_task_tokens[ti] += ex.target.size();
        out.nll_sum += ce.item();
        out.tokens += ex.target.size();
        nll = nll.defined() ? add(nll, ce) : ce;
    }
    const double denom = normalizer > 0.0 ? normalizer : static_cast<double>(out.tokens);
    out.loss = scale(nll, 1.0 / denom);
    return out;
}

Tensor separation_loss(std::span<const LayerGates> gates) {
    if (gates.empty()) throw DataError("separation_loss: no routed layers");
    Tensor acc;
    for (std::size_t l = 0; l < gates.size(); ++l) {
        for (TaskId t : kAllTasks)
            if (!gates[l][task_index(t)].defined())
                throw DataError("separation_loss: layer " + std::to_string(l) + " has no gate for task " +
                                std::string(task_name(t)));
        for (std::size_t a = 0; a < kNumTasks; ++a)
            for (std::size_t b = a + 1; b < kNumTasks; ++b) {
                const Tensor c = cosine_similarity(gates[l][a], gates[l][b]);
                acc = acc.defined() ? add(acc, c) : c;
            }
    }
    return scale(acc, 1.0 / (3.0 * static_cast<double>(gates.size())));
}

LossBreakdown total_loss(const Tensor& loss_gen, const Tensor& loss_sep, double lambda_sep) {
    if (lambda_sep < 0.0) throw ConfigError("lambda_sep", "must be non-negative");
    LossBreakdown out;
    out.lambda_sep = lambda_sep;
    out.loss_gen = loss_gen.item();
    out.loss_sep = loss_sep.item();
    out.total = add(loss_gen, scale(loss_sep, lambda_sep));
    out.loss_total = out.total.item();
    return out;
}

}  // namespace trmoe
