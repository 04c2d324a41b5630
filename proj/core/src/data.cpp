// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "trmoe/errors.hpp"
#include "trmoe/model.hpp"

namespace trmoe {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) || c == '\'' || c == '-' || c >= 0x80;
}

bool attaches_left(std::string_view tok) {
    return tok == "," || tok == "." || tok == "!" || tok == "?" || tok == ":" || tok == ";";
}

}  // namespace

std::string_view polarity_name(Polarity p) noexcept {
    switch (p) {
        case Polarity::Positive: return "positive";
        case Polarity::Negative: return "negative";
        case Polarity::Neutral: return "neutral";
    }
    return "?";
}

std::optional<Polarity> parse_polarity(std::string_view s) {
    for (Polarity p : kAllPolarities)
        if (polarity_name(p) == s) return p;
    return std::nullopt;
}

void validate_instance(const AnnotatedInstance& inst) {
    if (inst.aspect.empty()) throw DataError("aspect is empty");
    if (inst.text.find(inst.aspect) == std::string::npos)
        throw DataError("aspect \"" + inst.aspect + "\" is not a substring of the text");
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
            continue;
        }
        if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        if (!std::isspace(c)) out.emplace_back(1, ch);
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocabulary::Vocabulary() : Vocabulary({std::string(kPad), std::string(kEos), std::string(kUnk)}, 0) {}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 3 || tokens[0] != kPad || tokens[1] != kEos || tokens[2] != kUnk)
        throw DataError("vocabulary: reserved tokens missing");
    return Vocabulary(std::move(tokens), 0);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, int) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
            throw DataError("vocabulary: duplicate token \"" + tokens_[i] + "\"");
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts)
        for (auto& w : split_words(t)) ++counts[w];
    std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> tokens{std::string(kPad), std::string(kEos), std::string(kUnk)};
    for (auto& [w, n] : entries)
        if (w != kPad && w != kEos && w != kUnk) tokens.push_back(w);
    return from_tokens(std::move(tokens));
}

int Vocabulary::id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
        throw DataError("vocabulary: id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
    std::vector<int> ids;
    for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
    return ids;
}

std::string detokenize(std::span<const int> ids, const Vocabulary& vocab) {
    std::string out;
    for (int id : ids) {
        if (id == kEosId) break;
        if (id == kPadId) continue;
        const std::string& tok = vocab.token(id);
        if (!out.empty() && !attaches_left(tok)) out.push_back(' ');
        out += tok;
    }
    return out;
}

std::string task_prompt(const AnnotatedInstance& inst, TaskId task) {
    const std::string body = " | sentence: " + inst.text + " | aspect: " + inst.aspect;
    switch (task) {
        case TaskId::Pol: return "task: polarity" + body;
        case TaskId::Imp: return "task: implicitness" + body;
        case TaskId::Rea:
            return "task: rationale" + body + " | polarity: " + std::string(polarity_name(inst.polarity));
    }
    return {};
}

std::string task_target(const AnnotatedInstance& inst, TaskId task) {
    switch (task) {
        case TaskId::Pol: return std::string(polarity_name(inst.polarity));
        case TaskId::Imp: return inst.implicit ? "implicit" : "explicit";
        case TaskId::Rea: return inst.rationale;
    }
    return {};
}

std::vector<TaskExample> build_task_examples(const AnnotatedInstance& inst, const Vocabulary& vocab,
                                             std::size_t source, std::size_t* dropped_rea) {
    validate_instance(inst);
    std::vector<TaskExample> out;
    for (TaskId t : kAllTasks) {
        TaskExample ex;
        ex.task = t;
        ex.source = source;
        ex.prompt = tokenize(task_prompt(inst, t), vocab);
        ex.target = tokenize(task_target(inst, t), vocab);
        if (ex.target.empty()) {
            if (t == TaskId::Rea) {
                if (dropped_rea) ++*dropped_rea;
                continue;
            }
            throw DataError("empty target for task " + std::string(task_name(t)));
        }
        if (t == TaskId::Rea && ex.target.size() > kMaxRationaleTokens) ex.target.resize(kMaxRationaleTokens);
        ex.target.push_back(kEosId);
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<TaskExample> build_examples(std::span<const AnnotatedInstance> instances, const Vocabulary& vocab,
                                        std::size_t* dropped_rea) {
    std::vector<TaskExample> out;
    for (std::size_t i = 0; i < instances.size(); ++i)
        for (auto& ex : build_task_examples(instances[i], vocab, i, dropped_rea)) out.push_back(std::move(ex));
    return out;
}

std::vector<std::string> vocabulary_texts(std::span<const AnnotatedInstance> instances) {
    std::vector<std::string> texts;
    texts.reserve(instances.size() * 6);
    for (const auto& inst : instances)
        for (TaskId t : kAllTasks) {
            texts.push_back(task_prompt(inst, t));
            texts.push_back(task_target(inst, t));
        }
    // Labels must be known even when a class is absent from the data.
    for (Polarity p : kAllPolarities) texts.emplace_back(polarity_name(p));
    texts.emplace_back("explicit implicit");
    return texts;
}

namespace {

AnnotatedInstance parse_instance(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("line is not a JSON object");
    auto required_string = [&](const char* key) -> std::string {
        if (!j.contains(key)) throw DataError(std::string("missing required field \"") + key + "\"");
        if (!j.at(key).is_string()) throw DataError(std::string("field \"") + key + "\" must be a string");
        return j.at(key).get<std::string>();
    };
    AnnotatedInstance inst;
    inst.text = required_string("text");
    inst.aspect = required_string("aspect");
    const std::string pol = required_string("polarity");
    const auto p = parse_polarity(pol);
    if (!p) throw DataError("polarity \"" + pol + "\" is not one of positive, negative, neutral");
    inst.polarity = *p;
    if (!j.contains("implicit")) throw DataError("missing required field \"implicit\"");
    const auto& imp = j.at("implicit");
    if (imp.is_number_integer() && (imp.get<long long>() == 0 || imp.get<long long>() == 1))
        inst.implicit = imp.get<long long>() == 1;
    else if (imp.is_boolean())
        inst.implicit = imp.get<bool>();
    else
        throw DataError("field \"implicit\" must be 0 or 1");
    if (j.contains("rationale")) {
        if (!j.at("rationale").is_string()) throw DataError("field \"rationale\" must be a string");
        inst.rationale = j.at("rationale").get<std::string>();
    }
    validate_instance(inst);
    return inst;
}

}  // namespace

JsonlReport parse_jsonl(std::istream& in) {
    JsonlReport report;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            report.instances.push_back(parse_instance(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            report.errors.push_back({n, std::string("malformed JSON: ") + e.what()});
        } catch (const DataError& e) {
            report.errors.push_back({n, e.what()});
        }
    }
    return report;
}

JsonlReport load_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return parse_jsonl(in);
}

std::string to_jsonl_line(const AnnotatedInstance& inst) {
    nlohmann::ordered_json j;
    j["text"] = inst.text;
    j["aspect"] = inst.aspect;
    j["polarity"] = std::string(polarity_name(inst.polarity));
    j["implicit"] = inst.implicit ? 1 : 0;
    if (!inst.rationale.empty()) j["rationale"] = inst.rationale;
    return j.dump();
}

void write_jsonl(std::ostream& out, std::span<const AnnotatedInstance> instances) {
    for (const auto& inst : instances) out << to_jsonl_line(inst) << '\n';
}

void write_jsonl(const std::string& path, std::span<const AnnotatedInstance> instances) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    write_jsonl(out, instances);
    if (!out) throw Error("write failed: " + path);
}

std::pair<std::vector<AnnotatedInstance>, std::vector<AnnotatedInstance>> split_holdout(
    std::span<const AnnotatedInstance> instances, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) throw ConfigError("holdout_fraction", "must lie in [0, 1]");
    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit draw so the order does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    const auto n_hold = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(instances.size())));
    std::pair<std::vector<AnnotatedInstance>, std::vector<AnnotatedInstance>> out;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < order.size() - n_hold ? out.first : out.second).push_back(instances[order[i]]);
    return out;
}

}  // namespace trmoe
