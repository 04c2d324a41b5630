// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// The single config file accepted by every training subcommand:
// {"model": {...}, "train": {...}, "data": {...}}. Each section is optional
// and missing keys keep their defaults.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "trmoe/model.hpp"
#include "trmoe/trainer.hpp"

namespace trmoe::cli {

struct DataConfig {
    std::string path;
    double holdout_fraction = 0.1;
    std::uint64_t split_seed = 7;
};

struct CliConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;

    /// Throws ConfigError for malformed JSON, unknown keys or bad values.
    static CliConfig from_json(std::string_view text);
    static CliConfig load(const std::string& path);
    std::string to_json() const;  // pretty-printed, used for the echo file
};

}  // namespace trmoe::cli
