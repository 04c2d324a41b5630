// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe_cli/cli_config.hpp"

#include <fstream>
#include <iterator>

#include "json.hpp"
#include "trmoe/errors.hpp"

namespace trmoe::cli {

CliConfig CliConfig::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
    CliConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "model") {
            c.model = ModelConfig::from_json(value.dump());
        } else if (key == "train") {
            c.train = TrainConfig::from_json(value.dump());
        } else if (key == "data") {
            if (!value.is_object()) throw ConfigError("data", "expected an object");
            for (const auto& [k, v] : value.items()) {
                if (k == "path" && v.is_string()) {
                    c.data.path = v.get<std::string>();
                } else if (k == "holdout_fraction" && v.is_number()) {
                    c.data.holdout_fraction = v.get<double>();
                } else if (k == "split_seed" && v.is_number_unsigned()) {
                    c.data.split_seed = v.get<std::uint64_t>();
                } else {
                    throw ConfigError("data." + k, "unknown field or wrong type");
                }
            }
        } else {
            throw ConfigError(key, "unknown section (expected model, train or data)");
        }
    }
    return c;
}

CliConfig CliConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("--config", "cannot open " + path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::string CliConfig::to_json() const {
    nlohmann::ordered_json j;
    j["model"] = nlohmann::ordered_json::parse(model.to_json());
    j["train"] = nlohmann::ordered_json::parse(train.to_json());
    j["data"] = {{"path", data.path}, {"holdout_fraction", data.holdout_fraction}, {"split_seed", data.split_seed}};
    return j.dump(2) + "\n";
}

}  // namespace trmoe::cli
