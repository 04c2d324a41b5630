// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Multi-seed experiment runner for the separation-weight and expert-count
// sweeps and for the ablation table.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trmoe/data.hpp"
#include "trmoe/metrics.hpp"
#include "trmoe/model.hpp"
#include "trmoe/trainer.hpp"

namespace trmoe {

struct ExperimentData {
    std::vector<AnnotatedInstance> train;
    std::vector<AnnotatedInstance> eval;
    Vocabulary vocab;
};

struct RunOutcome {
    std::uint64_t seed = 0;
    EvalReport report;
    double gate_cosine = 0.0;  // final separation-loss value; NaN for dense models
    std::size_t steps = 0;
    std::array<std::size_t, kNumTasks> examples_consumed{};
};

/// Builds a model from `model_cfg` (vocab_size taken from the data, ablation
/// applied), trains it with `train_cfg` and evaluates on the eval split. The
/// model and training seeds are both set to `seed`.
RunOutcome run_experiment(ModelConfig model_cfg, TrainConfig train_cfg, const ExperimentData& data,
                          std::uint64_t seed);

enum class SweepKind { Lambda, Experts };
std::optional<SweepKind> parse_sweep_kind(std::string_view s);

struct SweepRow {
    std::string label;  // grid value or ablation name
    double grid_value = 0.0;
    std::size_t seed_count = 0;
    double all_acc_mean = 0.0;
    double all_f1_mean = 0.0;
    double isa_acc_mean = 0.0;  // NaN when no run had implicit instances
    double imp_acc_mean = 0.0;
    double gate_cosine_mean = 0.0;
    bool is_best = false;
    std::vector<RunOutcome> runs;
};

/// One row per grid value; `is_best` marks the highest all_f1_mean (first
/// wins ties). Runs execute on up to `workers` threads; results do not
/// depend on the worker count.
std::vector<SweepRow> run_sweep(SweepKind kind, std::span<const double> grid, const ModelConfig& base_model,
                                const TrainConfig& base_train, std::span<const std::uint64_t> seeds,
                                const ExperimentData& data, std::size_t workers = 1);

/// Rows none, no_mtl, no_moe.
std::vector<SweepRow> run_ablation(const ModelConfig& base_model, const TrainConfig& base_train,
                                   std::span<const std::uint64_t> seeds, const ExperimentData& data,
                                   std::size_t workers = 1);

/// grid_value,seed_count,all_acc_mean,all_f1_mean,isa_acc_mean,gate_cosine_mean,is_best
std::string sweep_csv(const std::vector<SweepRow>& rows);
/// ablation,seed_count,all_acc_mean,all_f1_mean,isa_acc_mean,imp_acc_mean,gate_cosine_mean
std::string ablation_csv(const std::vector<SweepRow>& rows);

}  // namespace trmoe
