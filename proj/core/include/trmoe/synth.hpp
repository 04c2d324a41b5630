// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic restaurant/laptop review corpus. Explicit items
// state an opinion adjective; implicit items describe an event that implies
// the polarity without any adjective from the sentiment lexicon.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trmoe/data.hpp"

namespace trmoe {

enum class Domain { Restaurant, Laptop };

/// One generation template. `pattern` contains "{a}" for the aspect and, for
/// explicit templates, "{adj}" for a lexicon adjective of `polarity`.
struct SynthTemplate {
    std::string pattern;
    Polarity polarity;
    bool implicit;
    // Implicit events are domain specific; explicit frames fit both domains.
    std::optional<Domain> domain;
};

const std::vector<SynthTemplate>& synth_templates();
const std::vector<std::string>& sentiment_lexicon(Polarity p);
const std::vector<std::string>& domain_aspects(Domain d);

struct SynthItem {
    AnnotatedInstance instance;
    std::size_t template_id = 0;
    std::string adjective;  // empty for implicit items
};

/// `size` items balanced over the six (polarity, implicitness) cells; the
/// remainder of size / 6 goes to the first cells in
/// positive/negative/neutral × explicit/implicit order. Rationales are empty.
std::vector<SynthItem> synth_corpus_items(std::size_t size, std::uint64_t seed);
std::vector<AnnotatedInstance> synth_corpus(std::size_t size, std::uint64_t seed);

}  // namespace trmoe
