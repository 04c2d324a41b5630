// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/metrics.hpp"

#include "json.hpp"
#include "trmoe/errors.hpp"

namespace trmoe {

namespace {
constexpr std::size_t kMaxLabelTokens = 4;
}

void ConfusionMatrix::add(Polarity gold, std::optional<Polarity> predicted) {
    const auto col = predicted ? static_cast<std::size_t>(*predicted) : kNumPolarities;
    ++counts[static_cast<std::size_t>(gold)][col];
}

std::size_t ConfusionMatrix::total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
        for (auto c : row) n += c;
    return n;
}

std::size_t ConfusionMatrix::correct() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < kNumPolarities; ++i) n += counts[i][i];
    return n;
}

F1Summary macro_f1(const ConfusionMatrix& cm) {
    F1Summary s;
    for (std::size_t c = 0; c < kNumPolarities; ++c) {
        const double tp = static_cast<double>(cm.counts[c][c]);
        double gold = 0.0, predicted = 0.0;
        for (std::size_t j = 0; j <= kNumPolarities; ++j) gold += static_cast<double>(cm.counts[c][j]);
        for (std::size_t i = 0; i < kNumPolarities; ++i) predicted += static_cast<double>(cm.counts[i][c]);
        if (gold + predicted == 0.0) {
            s.undefined[c] = true;
            s.per_class[c] = 0.0;
        } else {
            s.per_class[c] = 2.0 * tp / (gold + predicted);
        }
        s.macro += s.per_class[c];
    }
    s.macro /= static_cast<double>(kNumPolarities);
    return s;
}

std::optional<Polarity> parse_polarity_output(std::span<const int> decoded, const Vocabulary& vocab) {
    return parse_polarity(detokenize(decoded, vocab));
}

EvalReport evaluate(const Model& model, std::span<const AnnotatedInstance> instances, const Vocabulary& vocab) {
    if (instances.empty()) throw DataError("evaluate: empty instance list");
    EvalReport r;
    r.n = instances.size();
    std::size_t isa_correct = 0, imp_correct = 0;
    for (const auto& inst : instances) {
        const auto pol_ids = model.greedy_decode(tokenize(task_prompt(inst, TaskId::Pol), vocab), TaskId::Pol,
                                                 kMaxLabelTokens);
        const auto pred = parse_polarity_output(pol_ids, vocab);
        if (!pred) ++r.non_label_pol;
        r.confusion.add(inst.polarity, pred);
        if (inst.implicit) {
            ++r.implicit_count;
            if (pred == inst.polarity) ++isa_correct;
        }
        const auto imp_ids = model.greedy_decode(tokenize(task_prompt(inst, TaskId::Imp), vocab), TaskId::Imp,
                                                 kMaxLabelTokens);
        const std::string imp = detokenize(imp_ids, vocab);
        if (imp != "explicit" && imp != "implicit") ++r.non_label_imp;
        if (imp == (inst.implicit ? "implicit" : "explicit")) ++imp_correct;
    }
    const double n = static_cast<double>(r.n);
    r.all_accuracy = static_cast<double>(r.confusion.correct()) / n;
    const F1Summary f1 = macro_f1(r.confusion);
    r.all_macro_f1 = f1.macro;
    r.per_class_f1 = f1.per_class;
    r.per_class_undefined = f1.undefined;
    if (r.implicit_count) r.isa_accuracy = static_cast<double>(isa_correct) / static_cast<double>(r.implicit_count);
    r.imp_accuracy = static_cast<double>(imp_correct) / n;
    return r;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["n"] = n;
    j["all_accuracy"] = all_accuracy;
    j["all_macro_f1"] = all_macro_f1;
    j["isa_accuracy"] = isa_accuracy ? nlohmann::ordered_json(*isa_accuracy) : nlohmann::ordered_json(nullptr);
    j["implicit_count"] = implicit_count;
    j["imp_accuracy"] = imp_accuracy;
    nlohmann::ordered_json f1;
    nlohmann::ordered_json flags = nlohmann::ordered_json::array();
    for (Polarity p : kAllPolarities) {
        f1[std::string(polarity_name(p))] = per_class_f1[static_cast<std::size_t>(p)];
        if (per_class_undefined[static_cast<std::size_t>(p)]) flags.push_back(std::string(polarity_name(p)));
    }
    j["per_class_f1"] = f1;
    j["f1_undefined_classes"] = flags;
    j["non_label_pol"] = non_label_pol;
    j["non_label_imp"] = non_label_imp;
    return j.dump();
}

}  // namespace trmoe
