// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Polarity accuracy, macro-F1, implicit-subset accuracy and implicitness
// detection accuracy from greedy decodes.

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>

#include "trmoe/data.hpp"
#include "trmoe/model.hpp"

namespace trmoe {

/// Rows are gold polarity, columns predicted polarity; the last column
/// counts decodes that are not a polarity word.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumPolarities + 1>, kNumPolarities> counts{};

    void add(Polarity gold, std::optional<Polarity> predicted);
    std::size_t total() const;
    std::size_t correct() const;
};

struct F1Summary {
    std::array<double, kNumPolarities> per_class{};
    // Set for a class that is neither present in gold nor predicted; its F1
    // contributes 0 to the macro average.
    std::array<bool, kNumPolarities> undefined{};
    double macro = 0.0;
};

F1Summary macro_f1(const ConfusionMatrix& cm);

struct EvalReport {
    std::size_t n = 0;
    double all_accuracy = 0.0;
    double all_macro_f1 = 0.0;
    std::optional<double> isa_accuracy;  // absent when no instance is implicit
    std::size_t implicit_count = 0;
    double imp_accuracy = 0.0;
    std::array<double, kNumPolarities> per_class_f1{};
    std::array<bool, kNumPolarities> per_class_undefined{};
    std::size_t non_label_pol = 0;  // POL decodes that are not a polarity word
    std::size_t non_label_imp = 0;
    ConfusionMatrix confusion;

    std::string to_json() const;
};

/// Predicted label of a POL decode, or nullopt for anything else.
std::optional<Polarity> parse_polarity_output(std::span<const int> decoded, const Vocabulary& vocab);

/// Greedy-decodes POL and IMP for every instance (eval mode). Throws
/// DataError on an empty list.
EvalReport evaluate(const Model& model, std::span<const AnnotatedInstance> instances, const Vocabulary& vocab);

}  // namespace trmoe
