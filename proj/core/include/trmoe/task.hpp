// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace trmoe {

/// The three text-to-text tasks. Integer codes are stable and index the
/// task-embedding table.
enum class TaskId : int { Pol = 0, Imp = 1, Rea = 2 };

inline constexpr std::size_t kNumTasks = 3;
inline constexpr std::array<TaskId, kNumTasks> kAllTasks{TaskId::Pol, TaskId::Imp, TaskId::Rea};

constexpr std::size_t task_index(TaskId t) noexcept { return static_cast<std::size_t>(t); }

constexpr std::string_view task_name(TaskId t) noexcept {
    switch (t) {
        case TaskId::Pol: return "pol";
        case TaskId::Imp: return "imp";
        case TaskId::Rea: return "rea";
    }
    return "?";
}

inline std::optional<TaskId> parse_task(std::string_view s) {
    for (auto t : kAllTasks)
        if (task_name(t) == s) return t;
    return std::nullopt;
}

}  // namespace trmoe
