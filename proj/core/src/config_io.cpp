// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// JSON (de)serialisation and validation of ModelConfig and TrainConfig.
// Unknown keys are rejected so that typos in config files do not pass
// silently.

#include <algorithm>
#include <set>

#include "json.hpp"
#include "trmoe/errors.hpp"
#include "trmoe/model.hpp"
#include "trmoe/trainer.hpp"

namespace trmoe {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

json parse_object(std::string_view text, const char* what) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(what, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError(what, "expected a JSON object");
    return j;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known) {
    const std::set<std::string> names(known.begin(), known.end());
    for (const auto& [key, _] : j.items())
        if (!names.count(key)) throw ConfigError(key, "unknown field");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(key, "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 && std::is_unsigned_v<T>))
                throw ConfigError(key, "expected a non-negative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(key, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(key, "expected a string");
        }
        out = v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key, e.what());
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (vocab_size < 4) throw ConfigError("vocab_size", "must be at least 4 (three reserved ids plus one token)");
    if (d_model == 0) throw ConfigError("d_model", "must be positive");
    if (n_heads == 0) throw ConfigError("n_heads", "must be positive");
    if (d_model % n_heads != 0) throw ConfigError("n_heads", "must divide d_model");
    if (d_ff == 0) throw ConfigError("d_ff", "must be positive");
    if (n_encoder_blocks == 0) throw ConfigError("n_encoder_blocks", "must be positive");
    if (n_decoder_blocks == 0) throw ConfigError("n_decoder_blocks", "must be positive");
    if (max_seq_len == 0) throw ConfigError("max_seq_len", "must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate", "must lie in [0, 1)");
    std::set<std::size_t> seen;
    for (auto l : routed_layers) {
        if (l < 1 || l > n_encoder_blocks || l > n_decoder_blocks)
            throw ConfigError("routed_layers", "index " + std::to_string(l) + " outside 1..min(n_encoder_blocks, n_decoder_blocks)");
        if (!seen.insert(l).second) throw ConfigError("routed_layers", "duplicate index " + std::to_string(l));
    }
    if (n_experts == 0) throw ConfigError("n_experts", "must be positive");
    if (top_k == 0 || top_k > n_experts) throw ConfigError("top_k", "must satisfy 1 <= top_k <= n_experts");
    if (d_task == 0) throw ConfigError("d_task", "must be positive");
    if (d_router_hidden == 0) throw ConfigError("d_router_hidden", "must be positive");
    if (!(init_std > 0.0)) throw ConfigError("init_std", "must be positive");
    if (!(expert_noise_std >= 0.0)) throw ConfigError("expert_noise_std", "must be non-negative");
    if (!(ln_eps >= 0.0)) throw ConfigError("ln_eps", "must be non-negative");
}

std::string ModelConfig::to_json() const {
    ordered j;
    j["vocab_size"] = vocab_size;
    j["d_model"] = d_model;
    j["n_heads"] = n_heads;
    j["d_ff"] = d_ff;
    j["n_encoder_blocks"] = n_encoder_blocks;
    j["n_decoder_blocks"] = n_decoder_blocks;
    j["max_seq_len"] = max_seq_len;
    j["dropout_rate"] = dropout_rate;
    j["routed_layers"] = routed_layers;
    j["n_experts"] = n_experts;
    j["top_k"] = top_k;
    j["d_task"] = d_task;
    j["d_router_hidden"] = d_router_hidden;
    j["init_std"] = init_std;
    j["expert_noise_std"] = expert_noise_std;
    j["fresh_experts"] = fresh_experts;
    j["ln_eps"] = ln_eps;
    j["seed"] = seed;
    return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
    const json j = parse_object(text, "model");
    reject_unknown(j, {"vocab_size", "d_model", "n_heads", "d_ff", "n_encoder_blocks", "n_decoder_blocks",
                       "max_seq_len", "dropout_rate", "routed_layers", "n_experts", "top_k", "d_task",
                       "d_router_hidden", "init_std", "expert_noise_std", "fresh_experts", "ln_eps", "seed"});
    ModelConfig c;
    read(j, "vocab_size", c.vocab_size);
    read(j, "d_model", c.d_model);
    read(j, "n_heads", c.n_heads);
    read(j, "d_ff", c.d_ff);
    read(j, "n_encoder_blocks", c.n_encoder_blocks);
    read(j, "n_decoder_blocks", c.n_decoder_blocks);
    read(j, "max_seq_len", c.max_seq_len);
    read(j, "dropout_rate", c.dropout_rate);
    if (j.contains("routed_layers")) {
        const json& v = j.at("routed_layers");
        if (!v.is_array()) throw ConfigError("routed_layers", "expected an array of block indices");
        c.routed_layers.clear();
        for (const auto& e : v) {
            if (!e.is_number_integer() || e.get<long long>() < 1)
                throw ConfigError("routed_layers", "entries must be positive integers");
            c.routed_layers.push_back(e.get<std::size_t>());
        }
    }
    read(j, "n_experts", c.n_experts);
    read(j, "top_k", c.top_k);
    read(j, "d_task", c.d_task);
    read(j, "d_router_hidden", c.d_router_hidden);
    read(j, "init_std", c.init_std);
    read(j, "expert_noise_std", c.expert_noise_std);
    read(j, "fresh_experts", c.fresh_experts);
    read(j, "ln_eps", c.ln_eps);
    read(j, "seed", c.seed);
    return c;
}

std::string_view ablation_name(Ablation a) noexcept {
    switch (a) {
        case Ablation::None: return "none";
        case Ablation::NoMtl: return "no_mtl";
        case Ablation::NoMoe: return "no_moe";
    }
    return "?";
}

std::optional<Ablation> parse_ablation(std::string_view s) {
    if (s == "none") return Ablation::None;
    if (s == "no_mtl" || s == "no-mtl") return Ablation::NoMtl;
    if (s == "no_moe" || s == "no-moe") return Ablation::NoMoe;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be positive");
    if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
    if (accum_steps < 1) throw ConfigError("accum_steps", "must be at least 1");
    if (!(lambda_sep >= 0.0)) throw ConfigError("lambda_sep", "must be non-negative");
}

std::string TrainConfig::to_json() const {
    ordered j;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["adam_eps"] = adam_eps;
    j["batch_size"] = batch_size;
    j["accum_steps"] = accum_steps;
    j["max_steps"] = max_steps;
    j["lambda_sep"] = lambda_sep;
    j["seed"] = seed;
    j["eval_every"] = eval_every;
    j["checkpoint_path"] = checkpoint_path;
    j["ablation"] = std::string(ablation_name(ablation));
    j["use_separation"] = use_separation;
    return j.dump();
}

TrainConfig TrainConfig::from_json(std::string_view text) {
    const json j = parse_object(text, "train");
    reject_unknown(j, {"lr", "beta1", "beta2", "adam_eps", "batch_size", "accum_steps", "max_steps", "lambda_sep",
                       "seed", "eval_every", "checkpoint_path", "ablation", "use_separation"});
    TrainConfig c;
    read(j, "lr", c.lr);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "adam_eps", c.adam_eps);
    read(j, "batch_size", c.batch_size);
    read(j, "accum_steps", c.accum_steps);
    read(j, "max_steps", c.max_steps);
    read(j, "lambda_sep", c.lambda_sep);
    read(j, "seed", c.seed);
    read(j, "eval_every", c.eval_every);
    read(j, "checkpoint_path", c.checkpoint_path);
    if (j.contains("ablation")) {
        std::string s;
        read(j, "ablation", s);
        const auto a = parse_ablation(s);
        if (!a) throw ConfigError("ablation", "expected none, no_mtl or no_moe");
        c.ablation = *a;
    }
    read(j, "use_separation", c.use_separation);
    return c;
}

ModelConfig apply_ablation(ModelConfig cfg, Ablation a) {
    if (a == Ablation::NoMoe) cfg.routed_layers.clear();
    return cfg;
}

}  // namespace trmoe
