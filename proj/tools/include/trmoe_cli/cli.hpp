// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 invalid input or configuration.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trmoe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;

/// `args` excludes the program name, e.g. {"train", "--data", "d.jsonl"}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trmoe::cli
