// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace trmoe {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::function<Tensor()>& f, std::span<NamedTensor> params,
                                const GradCheckOptions& options) {
    for (auto& p : params)
        if (p.tensor.requires_grad()) p.tensor.zero_grad();
    backward(f());

    GradCheckReport report;
    for (auto& p : params) {
        if (!p.tensor.requires_grad()) continue;
        GradCheckEntry entry{p.name};
        const std::size_t n = p.tensor.size();
        const std::vector<double> analytic = p.tensor.has_grad()
                                                 ? std::vector<double>(p.tensor.grad().begin(), p.tensor.grad().end())
                                                 : std::vector<double>(n, 0.0);
        std::size_t stride = 1;
        if (options.max_entries_per_tensor > 0 && n > options.max_entries_per_tensor)
            stride = (n + options.max_entries_per_tensor - 1) / options.max_entries_per_tensor;
        auto values = p.tensor.mutable_data();
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = values[i];
            double plus = 0.0, minus = 0.0;
            {
                NoGradGuard guard;
                values[i] = saved + options.eps;
                plus = f().item();
                values[i] = saved - options.eps;
                minus = f().item();
            }
            values[i] = saved;
            const double numeric = (plus - minus) / (2.0 * options.eps);
            const double err = relative_error(analytic[i], numeric);
            entry.max_rel_error = std::max(entry.max_rel_error, err);
            ++entry.checked;
            if (err > options.tol) ++entry.flagged;
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.flagged += entry.flagged;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace trmoe
