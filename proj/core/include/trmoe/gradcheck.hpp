// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "trmoe/tensor.hpp"

namespace trmoe {

struct GradCheckOptions {
    double eps = 1e-5;
    double tol = 1e-4;
    // 0 checks every entry; otherwise an evenly strided subset per tensor.
    std::size_t max_entries_per_tensor = 0;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t flagged = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    std::size_t flagged = 0;

    bool passed() const noexcept { return flagged == 0; }
};

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares analytic gradients of the scalar `f` with central differences.
/// `f` must be a pure function of the parameter values. Parameters with
/// requires_grad == false are skipped. Existing gradients are zeroed.
GradCheckReport check_gradients(const std::function<Tensor()>& f, std::span<NamedTensor> params,
                                const GradCheckOptions& options = {});

}  // namespace trmoe
