// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/rationale.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace trmoe {

namespace {

// Goal conduciveness and norm compatibility phrased per polarity; explicit
// items point at the stated opinion, implicit ones at the event itself.
std::string appraisal_clause(Polarity y, bool implicit) {
    switch (y) {
        case Polarity::Positive:
            return implicit ? "furthers the goals of the reviewer and meets the standards they expect"
                            : "is praised directly, which signals that the goals of the reviewer were met";
        case Polarity::Negative:
            return implicit ? "blocks the goals of the reviewer and violates the norms they expect"
                            : "is criticised directly, which signals that the goals of the reviewer were blocked";
        case Polarity::Neutral:
            return implicit ? "neither helps nor hinders the goals of the reviewer"
                            : "is described in plain terms that neither help nor hinder the goals of the reviewer";
    }
    return {};
}

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("TRMOE_LLM_ENDPOINT", "expected scheme://host[:port]/path");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

std::string offline_rationale(const AnnotatedInstance& inst, RationaleStyle style) {
    std::string head = "the reviewer evaluates the " + inst.aspect + " as " + std::string(polarity_name(inst.polarity));
    if (style == RationaleStyle::EventGrounded) {
        std::string event = inst.text;
        while (!event.empty() && (event.back() == '.' || event.back() == '!' || event.back() == ' ')) event.pop_back();
        return head + " because " + event + ", an event that " + appraisal_clause(inst.polarity, inst.implicit);
    }
    return head + " because the described event " + appraisal_clause(inst.polarity, inst.implicit);
}

std::string rationale_prompt(const AnnotatedInstance& inst) {
    return "Sentence: " + inst.text + "\nAspect: " + inst.aspect +
           "\nSentiment polarity: " + std::string(polarity_name(inst.polarity)) +
           "\nConsidering how the described situation affects the speaker's goals and whether it fits the norms "
           "they expect, explain in one sentence why the speaker holds this attitude toward the aspect.";
}

HttpRationaleConfig HttpRationaleConfig::from_env() {
    HttpRationaleConfig cfg;
    const char* endpoint = std::getenv("TRMOE_LLM_ENDPOINT");
    if (endpoint == nullptr || *endpoint == '\0')
        throw ConfigError("TRMOE_LLM_ENDPOINT", "environment variable must be set for the http rationale backend");
    cfg.endpoint = endpoint;
    if (const char* key = std::getenv("TRMOE_LLM_KEY")) cfg.api_key = key;
    return cfg;
}

std::string request_rationale(const HttpRationaleConfig& cfg, const AnnotatedInstance& inst) {
    using Kind = RationaleError::Kind;
    const Endpoint ep = split_endpoint(cfg.endpoint);
    httplib::Client client(ep.base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    nlohmann::json body;
    body["model"] = cfg.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", rationale_prompt(inst)}}});
    const auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
            throw RationaleError(Kind::Timeout, "rationale request timed out: " + httplib::to_string(err));
        throw RationaleError(Kind::Connection, "rationale request failed: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300)
        throw RationaleError(Kind::HttpStatus, "rationale endpoint returned HTTP " + std::to_string(res->status));
    try {
        const auto j = nlohmann::json::parse(res->body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw RationaleError(Kind::MalformedResponse, "message content is not a string");
        return content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw RationaleError(Kind::MalformedResponse, std::string("malformed rationale response: ") + e.what());
    }
}

RationaleProvider::RationaleProvider(RationaleStyle style) : style_(style) {}

RationaleProvider::RationaleProvider(HttpRationaleConfig http, Logger logger)
    : style_(RationaleStyle::Appraisal), http_(std::move(http)), logger_(std::move(logger)) {
    if (http_->max_in_flight == 0) throw ConfigError("max_in_flight", "must be at least 1");
}

std::string RationaleProvider::generate(const AnnotatedInstance& inst) {
    return generate_all(std::span<const AnnotatedInstance>(&inst, 1)).front();
}

std::vector<std::string> RationaleProvider::generate_all(std::span<const AnnotatedInstance> instances) {
    std::vector<std::string> out(instances.size());
    if (!http_) {
        for (std::size_t i = 0; i < instances.size(); ++i) out[i] = offline_rationale(instances[i], style_);
        return out;
    }
    std::vector<std::exception_ptr> errors(instances.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < instances.size(); i = next++) {
            try {
                out[i] = request_rationale(*http_, instances[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::min(http_->max_in_flight, instances.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (!errors[i]) continue;
        if (!http_->fallback) std::rethrow_exception(errors[i]);
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            if (logger_) logger_("rationale fallback for instance " + std::to_string(i) + ": " + e.what());
        }
        ++fallbacks_;
        out[i] = offline_rationale(instances[i], style_);
    }
    return out;
}

void RationaleProvider::annotate(std::vector<AnnotatedInstance>& instances) {
    std::vector<std::size_t> todo;
    std::vector<AnnotatedInstance> pending;
    for (std::size_t i = 0; i < instances.size(); ++i)
        if (instances[i].rationale.empty()) todo.push_back(i), pending.push_back(instances[i]);
    const auto texts = generate_all(pending);
    for (std::size_t j = 0; j < todo.size(); ++j) instances[todo[j]].rationale = texts[j];
}

}  // namespace trmoe
