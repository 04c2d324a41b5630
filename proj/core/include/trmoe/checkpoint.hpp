// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint: "TRMO", u32 version, u32 tensor count, then per tensor
// u16 name length, name bytes, u8 rank, u64 dims and little-endian f32
// values, followed by a JSON trailer that runs to the end of the file.

#pragma once

#include <cstdint>
#include <string>

#include "trmoe/data.hpp"
#include "trmoe/model.hpp"
#include "trmoe/trainer.hpp"

namespace trmoe {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    TrainConfig train;
    std::size_t step = 0;
    std::string rng_state;  // textual mt19937_64 state
    Vocabulary vocab;
};

struct LoadedCheckpoint {
    Model model;
    CheckpointMeta meta;
};

std::string encode_checkpoint(const Model& model, const CheckpointMeta& meta);
/// Throws CheckpointError with a kind describing the defect.
LoadedCheckpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace trmoe
