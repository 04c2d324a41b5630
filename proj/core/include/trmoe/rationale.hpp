// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Appraisal rationale providers. The offline backend is a deterministic
// template; the http backend asks a chat-completion endpoint.

#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trmoe/data.hpp"
#include "trmoe/errors.hpp"

namespace trmoe {

enum class RationaleStyle {
    // Generic appraisal clause keyed on polarity and implicitness.
    Appraisal,
    // Additionally quotes the sentence, so the rationale carries the event.
    EventGrounded,
};

/// "the reviewer evaluates the {a} as {y} because the described event ..."
std::string offline_rationale(const AnnotatedInstance& inst, RationaleStyle style = RationaleStyle::Appraisal);

/// The instruction sent to the http backend.
std::string rationale_prompt(const AnnotatedInstance& inst);

class RationaleError : public Error {
public:
    enum class Kind { Timeout, HttpStatus, MalformedResponse, Connection };

    RationaleError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct HttpRationaleConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
    std::string api_key;   // sent as a bearer token when nonempty
    std::string model = "desk-rationale";
    std::chrono::milliseconds timeout{30000};
    bool fallback = false;          // offline template on any backend error
    std::size_t max_in_flight = 4;  // concurrent requests

    /// Reads TRMOE_LLM_ENDPOINT and TRMOE_LLM_KEY. Throws ConfigError naming
    /// TRMOE_LLM_ENDPOINT when it is unset or empty.
    static HttpRationaleConfig from_env();
};

/// One POST round trip; returns choices[0].message.content.
std::string request_rationale(const HttpRationaleConfig& cfg, const AnnotatedInstance& inst);

class RationaleProvider {
public:
    using Logger = std::function<void(const std::string&)>;

    /// Offline provider.
    explicit RationaleProvider(RationaleStyle style = RationaleStyle::Appraisal);
    /// Http provider.
    explicit RationaleProvider(HttpRationaleConfig http, Logger logger = {});

    std::string generate(const AnnotatedInstance& inst);
    /// Results keep instance order regardless of completion order.
    std::vector<std::string> generate_all(std::span<const AnnotatedInstance> instances);
    /// Fills every empty rationale in place.
    void annotate(std::vector<AnnotatedInstance>& instances);

    std::size_t fallback_events() const noexcept { return fallbacks_; }

private:
    RationaleStyle style_;
    std::optional<HttpRationaleConfig> http_;
    Logger logger_;
    std::size_t fallbacks_ = 0;
};

}  // namespace trmoe
