// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// CSV tables and self-contained SVG 1.1 charts. All emitters are pure
// functions of their input, so equal input gives byte-identical output.

#pragma once

#include <string>
#include <vector>

#include "trmoe/analysis.hpp"
#include "trmoe/trainer.hpp"

namespace trmoe {

/// layer,task,expert,dense,sparse,is_top1 with one row per (layer, task, expert).
std::string dominance_csv(const RoutingSnapshot& snap);
/// task,entropy with one row per task (header only for an empty snapshot).
std::string entropy_csv(const RoutingSnapshot& snap);
/// task,pol,imp,rea
std::string similarity_csv(const RoutingSnapshot& snap);
/// step,loss_gen,loss_sep,loss_total,lr
std::string metrics_csv(const std::vector<StepRecord>& log);

/// Per routed layer, a rows=tasks by columns=experts heatmap of dense gates
/// with the top-1 cell outlined.
std::string heatmap_svg(const RoutingSnapshot& snap);

struct Series {
    std::string name;
    std::vector<double> y;  // aligned with the chart's x values; NaN is skipped
};

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                           const std::vector<Series>& series);

/// Per-task entropy bars.
std::string entropy_svg(const RoutingSnapshot& snap);

/// Writes `content` to `path`; throws Error naming the path on failure.
void write_text_file(const std::string& path, const std::string& content);

/// Writes entropy.csv, dominance.csv, similarity.csv, heatmap.svg and
/// entropy.svg into `dir` (created if missing).
void emit_analysis(const RoutingSnapshot& snap, const std::string& dir);

}  // namespace trmoe
