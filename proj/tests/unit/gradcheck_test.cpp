// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "trmoe/gradcheck.hpp"
#include "trmoe/ops.hpp"

namespace trmoe {
namespace {

TEST(GradCheck, RelativeErrorDefinition) {
    EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(relative_error(-1.0, 1.0), 2.0);
    // Below the floor the difference is divided by 1e-8.
    EXPECT_DOUBLE_EQ(relative_error(1e-10, 0.0), 1e-2);
    EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
}

TEST(GradCheck, LinearFunctionIsExact) {
    Rng rng(2);
    const Tensor w = randn({6}, 1.0, rng, false);
    std::vector<NamedTensor> params{{"x", randn({6}, 1.0, rng)}};
    const auto report = check_gradients([&] { return sum_all(mul(w, params[0].tensor)); }, params);
    ASSERT_EQ(report.entries.size(), 1u);
    EXPECT_LT(report.max_rel_error, 1e-9);
    EXPECT_EQ(report.entries[0].checked, 6u);
    EXPECT_TRUE(report.passed());
}

TEST(GradCheck, FrozenParametersAreExcluded) {
    Rng rng(4);
    std::vector<NamedTensor> params{{"live", randn({3}, 1.0, rng)}, {"frozen", randn({3}, 1.0, rng, false)}};
    const auto report = check_gradients(
        [&] { return sum_all(mul(trmoe::tanh(params[0].tensor), params[1].tensor)); }, params);
    ASSERT_EQ(report.entries.size(), 1u);
    EXPECT_EQ(report.entries[0].name, "live");
}

TEST(GradCheck, FlagsEntriesAboveTolerance) {
    Rng rng(6);
    std::vector<NamedTensor> params{{"x", randn({4}, 1.0, rng)}};
    // A huge step makes the central difference of exp visibly wrong.
    const auto report = check_gradients([&] { return sum_all(trmoe::exp(params[0].tensor)); }, params, {0.5, 1e-4});
    EXPECT_FALSE(report.passed());
    EXPECT_EQ(report.flagged, 4u);
}

TEST(GradCheck, StridedSubsetLimitsWork) {
    Rng rng(8);
    std::vector<NamedTensor> params{{"x", randn({100}, 1.0, rng)}};
    GradCheckOptions opts;
    opts.max_entries_per_tensor = 10;
    const auto report = check_gradients([&] { return sum_all(trmoe::tanh(params[0].tensor)); }, params, opts);
    EXPECT_EQ(report.entries[0].checked, 10u);
    EXPECT_TRUE(report.passed());
}

TEST(GradCheck, RestoresParameterValues) {
    Rng rng(10);
    std::vector<NamedTensor> params{{"x", randn({5}, 1.0, rng)}};
    const auto before = testing::values(params[0].tensor);
    check_gradients([&] { return sum_all(trmoe::tanh(params[0].tensor)); }, params);
    EXPECT_EQ(testing::values(params[0].tensor), before);
}

}  // namespace
}  // namespace trmoe
