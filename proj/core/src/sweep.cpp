// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <thread>

#include "trmoe/errors.hpp"
#include "trmoe/objectives.hpp"

namespace trmoe {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Runs jobs[i] for every i on up to `workers` threads and rethrows the first
// failure in index order.
void run_parallel(std::vector<std::function<void()>>& jobs, std::size_t workers) {
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                jobs[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, jobs.size()));
    if (n == 1) {
        loop();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n; ++w) pool.emplace_back(loop);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct Job {
    ModelConfig model;
    TrainConfig train;
    std::size_t row = 0;
    std::uint64_t seed = 0;
};

std::vector<SweepRow> run_jobs(std::vector<SweepRow> rows, const std::vector<Job>& jobs, const ExperimentData& data,
                               std::size_t workers) {
    std::vector<RunOutcome> outcomes(jobs.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < jobs.size(); ++i)
        tasks.push_back([&, i] { outcomes[i] = run_experiment(jobs[i].model, jobs[i].train, data, jobs[i].seed); });
    run_parallel(tasks, workers);
    for (std::size_t i = 0; i < jobs.size(); ++i) rows[jobs[i].row].runs.push_back(outcomes[i]);

    for (auto& row : rows) {
        row.seed_count = row.runs.size();
        double isa = 0.0;
        std::size_t isa_n = 0;
        for (const auto& r : row.runs) {
            row.all_acc_mean += r.report.all_accuracy;
            row.all_f1_mean += r.report.all_macro_f1;
            row.imp_acc_mean += r.report.imp_accuracy;
            row.gate_cosine_mean += r.gate_cosine;
            if (r.report.isa_accuracy) isa += *r.report.isa_accuracy, ++isa_n;
        }
        const double n = static_cast<double>(row.seed_count);
        row.all_acc_mean /= n;
        row.all_f1_mean /= n;
        row.imp_acc_mean /= n;
        row.gate_cosine_mean /= n;
        row.isa_acc_mean = isa_n ? isa / static_cast<double>(isa_n) : std::nan("");
    }
    return rows;
}

}  // namespace

RunOutcome run_experiment(ModelConfig model_cfg, TrainConfig train_cfg, const ExperimentData& data,
                          std::uint64_t seed) {
    model_cfg = apply_ablation(model_cfg, train_cfg.ablation);
    model_cfg.vocab_size = data.vocab.size();
    model_cfg.seed = seed;
    train_cfg.seed = seed;
    Rng rng(seed);
    Model model = Model::build(model_cfg, rng);
    const auto examples = build_examples(data.train, data.vocab);
    const TrainResult tr = train(model, examples, train_cfg);
    RunOutcome out;
    out.seed = seed;
    out.steps = tr.steps;
    out.examples_consumed = tr.examples_consumed;
    out.report = evaluate(model, data.eval, data.vocab);
    if (model_cfg.routed_layers.empty()) {
        out.gate_cosine = std::nan("");
    } else {
        NoGradGuard no_grad;
        out.gate_cosine = separation_loss(model.dense_gates()).item();
    }
    return out;
}

std::optional<SweepKind> parse_sweep_kind(std::string_view s) {
    if (s == "lambda") return SweepKind::Lambda;
    if (s == "experts") return SweepKind::Experts;
    return std::nullopt;
}

std::vector<SweepRow> run_sweep(SweepKind kind, std::span<const double> grid, const ModelConfig& base_model,
                                const TrainConfig& base_train, std::span<const std::uint64_t> seeds,
                                const ExperimentData& data, std::size_t workers) {
    if (grid.empty()) throw ConfigError("grid", "must not be empty");
    if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
    std::vector<SweepRow> rows(grid.size());
    std::vector<Job> jobs;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        rows[g].grid_value = grid[g];
        rows[g].label = num(grid[g]);
        ModelConfig m = base_model;
        TrainConfig t = base_train;
        if (kind == SweepKind::Lambda) {
            t.lambda_sep = grid[g];
        } else {
            if (grid[g] < 1.0 || grid[g] != std::floor(grid[g]))
                throw ConfigError("grid", "expert counts must be positive integers");
            m.n_experts = static_cast<std::size_t>(grid[g]);
        }
        m.validate();
        t.validate();
        for (auto s : seeds) jobs.push_back({m, t, g, s});
    }
    rows = run_jobs(std::move(rows), jobs, data, workers);
    std::size_t best = 0;
    for (std::size_t g = 1; g < rows.size(); ++g)
        if (rows[g].all_f1_mean > rows[best].all_f1_mean) best = g;
    rows[best].is_best = true;
    return rows;
}

std::vector<SweepRow> run_ablation(const ModelConfig& base_model, const TrainConfig& base_train,
                                   std::span<const std::uint64_t> seeds, const ExperimentData& data,
                                   std::size_t workers) {
    if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
    const Ablation kinds[] = {Ablation::None, Ablation::NoMtl, Ablation::NoMoe};
    std::vector<SweepRow> rows(std::size(kinds));
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].label = std::string(ablation_name(kinds[i]));
        TrainConfig t = base_train;
        t.ablation = kinds[i];
        for (auto s : seeds) jobs.push_back({base_model, t, i, s});
    }
    return run_jobs(std::move(rows), jobs, data, workers);
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "grid_value,seed_count,all_acc_mean,all_f1_mean,isa_acc_mean,gate_cosine_mean,is_best\n";
    for (const auto& r : rows)
        out += num(r.grid_value) + "," + std::to_string(r.seed_count) + "," + num(r.all_acc_mean) + "," +
               num(r.all_f1_mean) + "," + num(r.isa_acc_mean) + "," + num(r.gate_cosine_mean) + "," +
               (r.is_best ? "1" : "0") + "\n";
    return out;
}

std::string ablation_csv(const std::vector<SweepRow>& rows) {
    std::string out = "ablation,seed_count,all_acc_mean,all_f1_mean,isa_acc_mean,imp_acc_mean,gate_cosine_mean\n";
    for (const auto& r : rows)
        out += r.label + "," + std::to_string(r.seed_count) + "," + num(r.all_acc_mean) + "," + num(r.all_f1_mean) +
               "," + num(r.isa_acc_mean) + "," + num(r.imp_acc_mean) + "," + num(r.gate_cosine_mean) + "\n";
    return out;
}

}  // namespace trmoe
