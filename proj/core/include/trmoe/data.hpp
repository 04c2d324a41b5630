// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Annotated aspect-level instances, the word-level vocabulary, the three
// text-to-text task templates and JSONL ingestion.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trmoe/task.hpp"

namespace trmoe {

enum class Polarity : int { Positive = 0, Negative = 1, Neutral = 2 };

inline constexpr std::size_t kNumPolarities = 3;
inline constexpr std::array<Polarity, kNumPolarities> kAllPolarities{Polarity::Positive, Polarity::Negative,
                                                                      Polarity::Neutral};

std::string_view polarity_name(Polarity p) noexcept;
std::optional<Polarity> parse_polarity(std::string_view s);

struct AnnotatedInstance {
    std::string text;
    std::string aspect;
    Polarity polarity = Polarity::Neutral;
    bool implicit = false;
    std::string rationale;  // may be empty

    bool operator==(const AnnotatedInstance&) const = default;
};

/// Throws DataError if the aspect is empty or not a substring of the text.
void validate_instance(const AnnotatedInstance& inst);

/// Lowercased word-level split: runs of letters, digits, apostrophes,
/// hyphens and non-ASCII bytes form words; every other non-space character
/// is a token of its own.
std::vector<std::string> split_words(std::string_view text);

/// Token list with reserved ids PAD=0, EOS=1, UNK=2. Regular tokens follow in
/// descending frequency, ties broken lexicographically.
class Vocabulary {
public:
    static constexpr std::string_view kPad = "<pad>";
    static constexpr std::string_view kEos = "<eos>";
    static constexpr std::string_view kUnk = "<unk>";

    Vocabulary();
    /// Builds from raw texts (each is split with split_words).
    static Vocabulary build(std::span<const std::string> texts);
    /// Restores a vocabulary from its token list; the first three entries must
    /// be the reserved tokens.
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    std::size_t size() const noexcept { return tokens_.size(); }
    int id(std::string_view token) const;  // UNK when absent
    bool contains(std::string_view token) const;
    const std::string& token(int id) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    Vocabulary(std::vector<std::string> tokens, int);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab);
/// Stops at the first EOS and skips PAD. Punctuation , . ! ? : ; attaches to
/// the preceding word; all other tokens are space separated.
std::string detokenize(std::span<const int> ids, const Vocabulary& vocab);

inline constexpr std::size_t kMaxRationaleTokens = 48;

struct TaskExample {
    TaskId task = TaskId::Pol;
    std::vector<int> prompt;
    std::vector<int> target;  // ends with EOS
    std::size_t source = 0;   // index of the originating instance
};

std::string task_prompt(const AnnotatedInstance& inst, TaskId task);
/// Target text before tokenisation: the polarity word, explicit|implicit, or
/// the rationale.
std::string task_target(const AnnotatedInstance& inst, TaskId task);

/// Two or three examples; the REA example is dropped (and *dropped_rea
/// incremented) when the rationale is empty. REA targets keep at most
/// kMaxRationaleTokens tokens before EOS.
std::vector<TaskExample> build_task_examples(const AnnotatedInstance& inst, const Vocabulary& vocab,
                                             std::size_t source = 0, std::size_t* dropped_rea = nullptr);

/// build_task_examples over a whole corpus; `source` is the instance index.
std::vector<TaskExample> build_examples(std::span<const AnnotatedInstance> instances, const Vocabulary& vocab,
                                        std::size_t* dropped_rea = nullptr);

/// All prompt and target texts of the given instances, suitable for
/// Vocabulary::build.
std::vector<std::string> vocabulary_texts(std::span<const AnnotatedInstance> instances);

struct LineError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct JsonlReport {
    std::vector<AnnotatedInstance> instances;
    std::vector<LineError> errors;
};

JsonlReport parse_jsonl(std::istream& in);
/// Throws Error if the file cannot be opened.
JsonlReport load_jsonl(const std::string& path);
std::string to_jsonl_line(const AnnotatedInstance& inst);
void write_jsonl(std::ostream& out, std::span<const AnnotatedInstance> instances);
void write_jsonl(const std::string& path, std::span<const AnnotatedInstance> instances);

/// Seeded shuffle followed by a split; the second part receives
/// round(fraction · n) instances.
std::pair<std::vector<AnnotatedInstance>, std::vector<AnnotatedInstance>> split_holdout(
    std::span<const AnnotatedInstance> instances, double fraction, std::uint64_t seed);

}  // namespace trmoe
