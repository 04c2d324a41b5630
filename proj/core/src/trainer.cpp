// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/trainer.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "trmoe/errors.hpp"
#include "trmoe/objectives.hpp"

namespace trmoe {

Adam::Adam(std::vector<NamedTensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i].tensor;
        if (!p.requires_grad() || !p.has_grad()) continue;
        const auto g = p.grad();
        auto w = p.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
        }
    }
}

std::string StepRecord::to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["loss_gen"] = loss_gen;
    // JSON has no NaN; a dense model has no separation term.
    j["loss_sep"] = std::isfinite(loss_sep) ? nlohmann::ordered_json(loss_sep) : nlohmann::ordered_json(nullptr);
    j["loss_total"] = loss_total;
    j["lr"] = lr;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (TaskId t : kAllTasks)
        if (task_seen[task_index(t)]) per[std::string(task_name(t))] = per_task[task_index(t)];
    j["per_task"] = per;
    return j.dump();
}

std::array<std::vector<TaskExample>, kNumTasks> examples_by_task(std::span<const TaskExample> examples,
                                                                  Ablation ablation) {
    std::array<std::vector<TaskExample>, kNumTasks> pools;
    for (const auto& ex : examples) {
        if (ablation == Ablation::NoMtl && ex.task != TaskId::Pol) continue;
        pools[task_index(ex.task)].push_back(ex);
    }
    return pools;
}

std::string dump_gates(const Model& model) {
    NoGradGuard no_grad;
    std::ostringstream os;
    os.precision(6);
    const auto names = model.routed_layer_names();
    const auto gates = model.dense_gates();
    for (std::size_t l = 0; l < gates.size(); ++l)
        for (TaskId t : kAllTasks) {
            os << names[l] << ' ' << task_name(t) << ':';
            for (double p : gates[l][task_index(t)].data()) os << ' ' << p;
            os << '\n';
        }
    return os.str();
}

namespace {

// Endless per-task stream: a seeded permutation, reshuffled at every pass.
class TaskQueue {
public:
    explicit TaskQueue(std::size_t n) : order_(n) {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        cursor_ = n;
    }
    std::size_t next(Rng& rng) {
        if (cursor_ == order_.size()) {
            for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng() % i]);
            cursor_ = 0;
        }
        return order_[cursor_++];
    }

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_;
};

}  // namespace

TrainResult train(Model& model, std::span<const TaskExample> examples, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
    cfg.validate();
    const bool routed = !model.config().routed_layers.empty();
    if (cfg.ablation == Ablation::NoMoe && routed)
        throw ConfigError("ablation", "no_moe requires a model without routed layers");
    const auto pools = examples_by_task(examples, cfg.ablation);
    std::vector<TaskId> active;
    std::vector<TaskQueue> queues;
    for (TaskId t : kAllTasks) {
        queues.emplace_back(pools[task_index(t)].size());
        if (!pools[task_index(t)].empty()) active.push_back(t);
    }
    if (active.empty()) throw DataError("train: no training examples");

    Rng sampler(cfg.seed);
    Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    Adam opt(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    TrainResult result;
    std::size_t slot = 0;

    for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
        // Draw the whole step first: the generation loss is normalised by the
        // step's target-token count so accumulation matches a single batch.
        std::vector<std::vector<TaskExample>> micro(cfg.accum_steps);
        double tokens = 0.0;
        for (auto& mb : micro)
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                const TaskId t = active[slot++ % active.size()];
                const auto& pool = pools[task_index(t)];
                mb.push_back(pool[queues[task_index(t)].next(sampler)]);
                tokens += static_cast<double>(mb.back().target.size());
                ++result.examples_consumed[task_index(t)];
            }

        model.zero_grad();
        StepRecord rec;
        rec.step = step;
        rec.lr = cfg.lr;
        double nll = 0.0;
        std::array<double, kNumTasks> task_nll{};
        std::array<std::size_t, kNumTasks> task_tokens{};
        for (const auto& mb : micro) {
            const GenerationLoss g = generation_loss(model, mb, Mode::Train, &dropout_rng, tokens);
            backward(g.loss);
            nll += g.nll_sum;
            for (std::size_t i = 0; i < kNumTasks; ++i) {
                task_nll[i] += g.per_task_nll[i];
                task_tokens[i] += g.per_task_tokens[i];
            }
        }
        rec.loss_gen = nll / tokens;
        for (std::size_t i = 0; i < kNumTasks; ++i) {
            rec.task_seen[i] = task_tokens[i] > 0;
            rec.per_task[i] = task_tokens[i] ? task_nll[i] / static_cast<double>(task_tokens[i]) : 0.0;
        }

        rec.loss_sep = std::nan("");
        rec.loss_total = rec.loss_gen;
        if (routed) {
            if (cfg.use_separation) {
                const auto gates = model.dense_gates();
                const Tensor sep = separation_loss(gates);
                backward(scale(sep, cfg.lambda_sep));
                rec.loss_sep = sep.item();
                rec.loss_total = rec.loss_gen + cfg.lambda_sep * rec.loss_sep;
            } else {
                NoGradGuard no_grad;
                rec.loss_sep = separation_loss(model.dense_gates()).item();
            }
        }
        if (!std::isfinite(rec.loss_total)) throw TrainingDiverged(step, dump_gates(model));

        opt.step();
        result.log.push_back(rec);
        result.steps = step;
        if (hooks.on_step) hooks.on_step(rec);
        if (cfg.eval_every && hooks.on_eval && step % cfg.eval_every == 0) hooks.on_eval(step);
    }
    model.zero_grad();
    std::ostringstream state;
    state << sampler;
    result.rng_state = state.str();
    return result;
}

}  // namespace trmoe
