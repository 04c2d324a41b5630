// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/synth.hpp"

#include <array>
#include <random>

namespace trmoe {

namespace {

using P = Polarity;

std::vector<SynthTemplate> make_templates() {
    std::vector<SynthTemplate> t;
    const std::array<const char*, 4> frames{"the {a} was {adj}", "the {a} is really {adj}", "i found the {a} {adj}",
                                            "in my opinion the {a} is {adj}"};
    for (P p : kAllPolarities)
        for (const char* f : frames) t.push_back({f, p, false, std::nullopt});

    auto events = [&](Domain d, P p, std::initializer_list<const char*> patterns) {
        for (const char* s : patterns) t.push_back({s, p, true, d});
    };
    events(Domain::Restaurant, P::Positive,
           {"we finished every bite of the {a}", "i ordered a second round of the {a}",
            "we will come back just for the {a}", "my friend asked the chef for the recipe of the {a}"});
    events(Domain::Restaurant, P::Negative,
           {"we waited forty minutes for the {a}", "i sent the {a} back to the kitchen",
            "the {a} arrived after an hour", "half of the {a} was left on the plate"});
    events(Domain::Restaurant, P::Neutral,
           {"the {a} came on a white plate", "i ordered the {a} at noon", "the {a} is listed on the menu",
            "we shared the {a} between two people"});
    events(Domain::Laptop, P::Positive,
           {"i have used the {a} daily for three years without a single problem",
            "the {a} still works like on the first day", "i would buy this model again just for the {a}",
            "my whole team switched to this model because of the {a}"});
    events(Domain::Laptop, P::Negative,
           {"the {a} stopped working after two days", "i had to send the {a} in for repair twice",
            "the {a} broke within a week", "the {a} died in the middle of my meeting"});
    events(Domain::Laptop, P::Neutral,
           {"the {a} is located on the left side", "i checked the {a} settings yesterday",
            "the manual describes the {a} on page four", "the {a} was included in the box"});
    return t;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
    return v[rng() % v.size()];
}

}  // namespace

const std::vector<SynthTemplate>& synth_templates() {
    static const std::vector<SynthTemplate> templates = make_templates();
    return templates;
}

const std::vector<std::string>& sentiment_lexicon(Polarity p) {
    static const std::array<std::vector<std::string>, kNumPolarities> lex{
        std::vector<std::string>{"great", "excellent", "delicious", "amazing", "wonderful", "fantastic"},
        std::vector<std::string>{"terrible", "awful", "horrible", "bad", "disappointing", "poor"},
        std::vector<std::string>{"average", "typical", "normal", "okay", "unremarkable", "ordinary"},
    };
    return lex[static_cast<std::size_t>(p)];
}

const std::vector<std::string>& domain_aspects(Domain d) {
    static const std::vector<std::string> restaurant{"food", "soup", "pasta", "pizza", "steak",
                                                     "coffee", "dessert", "salad", "burger", "curry"};
    static const std::vector<std::string> laptop{"battery", "screen", "keyboard", "trackpad",
                                                 "charger", "speakers", "fan", "hinge"};
    return d == Domain::Restaurant ? restaurant : laptop;
}

std::vector<SynthItem> synth_corpus_items(std::size_t size, std::uint64_t seed) {
    static const std::vector<std::string> prefixes{"", "last friday, ", "to be honest, ", "as usual, "};
    static const std::vector<std::string> suffixes{"", " this time", "."};
    const auto& templates = synth_templates();
    std::mt19937_64 rng(seed);
    std::vector<SynthItem> items;
    items.reserve(size);
    std::size_t cell = 0;
    for (P p : kAllPolarities)
        for (bool implicit : {false, true}) {
            const std::size_t count = size / 6 + (cell < size % 6 ? 1 : 0);
            ++cell;
            std::vector<std::size_t> ids;
            for (std::size_t i = 0; i < templates.size(); ++i)
                if (templates[i].polarity == p && templates[i].implicit == implicit) ids.push_back(i);
            for (std::size_t n = 0; n < count; ++n) {
                SynthItem item;
                item.template_id = pick(ids, rng);
                const SynthTemplate& tpl = templates[item.template_id];
                const Domain domain = tpl.domain.value_or(rng() % 2 ? Domain::Laptop : Domain::Restaurant);
                const std::string aspect = pick(domain_aspects(domain), rng);
                std::string body = tpl.pattern;
                replace_all(body, "{a}", aspect);
                if (!implicit) {
                    item.adjective = pick(sentiment_lexicon(p), rng);
                    replace_all(body, "{adj}", item.adjective);
                }
                item.instance.text = pick(prefixes, rng) + body + pick(suffixes, rng);
                item.instance.aspect = aspect;
                item.instance.polarity = p;
                item.instance.implicit = implicit;
                items.push_back(std::move(item));
            }
        }
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng() % i]);
    return items;
}

std::vector<AnnotatedInstance> synth_corpus(std::size_t size, std::uint64_t seed) {
    std::vector<AnnotatedInstance> out;
    for (auto& item : synth_corpus_items(size, seed)) out.push_back(std::move(item.instance));
    return out;
}

}  // namespace trmoe
