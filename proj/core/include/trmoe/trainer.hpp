// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Adam optimisation of generation NLL plus the weighted routing separation
// term, with round-robin task microbatching and gradient accumulation.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trmoe/data.hpp"
#include "trmoe/model.hpp"
#include "trmoe/task.hpp"
#include "trmoe/tensor.hpp"

namespace trmoe {

enum class Ablation { None, NoMtl, NoMoe };

std::string_view ablation_name(Ablation a) noexcept;
/// Accepts "none", "no_mtl"/"no-mtl", "no_moe"/"no-moe".
std::optional<Ablation> parse_ablation(std::string_view s);

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 4;
    std::size_t accum_steps = 1;
    std::size_t max_steps = 2000;
    double lambda_sep = 0.4;
    std::uint64_t seed = 7;
    std::size_t eval_every = 0;  // 0 disables periodic evaluation
    std::string checkpoint_path;
    Ablation ablation = Ablation::None;
    // false drops the separation term from the graph entirely
    // (generation-only training).
    bool use_separation = true;

    /// Throws ConfigError naming the first offending field.
    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(std::string_view text);
};

/// Applies an ablation to a model config: no_moe clears routed_layers.
ModelConfig apply_ablation(ModelConfig cfg, Ablation a);

class Adam {
public:
    Adam(std::vector<NamedTensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    /// One update from the accumulated gradients. Parameters without a
    /// gradient buffer are left untouched.
    void step();
    std::size_t steps() const noexcept { return t_; }
    double lr() const noexcept { return lr_; }

private:
    std::vector<NamedTensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

struct StepRecord {
    std::size_t step = 0;  // 1-based
    double loss_gen = 0.0;
    double loss_sep = 0.0;  // NaN when the model has no routed layers
    double loss_total = 0.0;
    double lr = 0.0;
    std::array<double, kNumTasks> per_task{};  // mean NLL per token
    std::array<bool, kNumTasks> task_seen{};

    /// {"step", "loss_gen", "loss_sep", "loss_total", "lr", "per_task": {...}}
    std::string to_json() const;
};

struct TrainResult {
    std::vector<StepRecord> log;
    std::array<std::size_t, kNumTasks> examples_consumed{};
    std::size_t steps = 0;
    std::string rng_state;  // example sampler state after the last step
};

struct TrainHooks {
    std::function<void(const StepRecord&)> on_step;
    // Called every eval_every steps with the step number.
    std::function<void(std::size_t)> on_eval;
};

/// Groups examples by task, filtered by the ablation (no_mtl keeps POL only).
std::array<std::vector<TaskExample>, kNumTasks> examples_by_task(std::span<const TaskExample> examples,
                                                                  Ablation ablation);

/// Trains in place. Throws ConfigError when the model contradicts the
/// ablation, DataError when no example survives the filter and
/// TrainingDiverged on a non-finite loss.
TrainResult train(Model& model, std::span<const TaskExample> examples, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

/// Human-readable dump of every routed block's dense gates.
std::string dump_gates(const Model& model);

}  // namespace trmoe
