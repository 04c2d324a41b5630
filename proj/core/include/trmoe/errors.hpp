// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace trmoe {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for a primitive.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a primitive (log of a
/// non-positive value, zero-norm cosine input, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid model, training or CLI configuration. The message names the field.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Invalid dataset content or token input.
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed or incompatible checkpoint file.
class CheckpointError : public Error {
public:
    enum class Kind { Io, BadMagic, BadVersion, Truncated, ShapeMismatch, BadTrailer };

    CheckpointError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(std::size_t step, std::string gate_dump)
        : Error("non-finite loss at step " + std::to_string(step)),
          step_(step),
          gate_dump_(std::move(gate_dump)) {}

    std::size_t step() const noexcept { return step_; }
    const std::string& gate_dump() const noexcept { return gate_dump_; }

private:
    std::size_t step_;
    std::string gate_dump_;
};

}  // namespace trmoe
