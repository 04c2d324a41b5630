// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "trmoe/errors.hpp"
#include "trmoe/rationale.hpp"

namespace trmoe {
namespace {

AnnotatedInstance service() { return {"we waited an hour for the service", "service", Polarity::Negative, true, ""}; }

/// Local chat-completion stand-in on an ephemeral port.
class MockServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit MockServer(Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    HttpRationaleConfig config() const {
        HttpRationaleConfig c;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
        c.timeout = std::chrono::milliseconds(2000);
        return c;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string completion(const std::string& content) {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
    return j.dump();
}

TEST(OfflineRationale, FixedTemplate) {
    const auto inst = service();
    const std::string r = offline_rationale(inst);
    EXPECT_EQ(r,
              "the reviewer evaluates the service as negative because the described event blocks the goals of the "
              "reviewer and violates the norms they expect");
    EXPECT_EQ(r, offline_rationale(inst));
    auto explicit_inst = inst;
    explicit_inst.implicit = false;
    EXPECT_NE(offline_rationale(explicit_inst), r);
}

TEST(OfflineRationale, EventGroundedQuotesSentence) {
    AnnotatedInstance inst{"the battery died in my meeting.", "battery", Polarity::Negative, true, ""};
    const std::string r = offline_rationale(inst, RationaleStyle::EventGrounded);
    EXPECT_EQ(r.rfind("the reviewer evaluates the battery as negative because the battery died in my meeting, an event that ",
                      0),
              0u);
}

TEST(OfflineRationale, ProviderAnnotatesOnlyEmpty) {
    std::vector<AnnotatedInstance> insts{service(), service()};
    insts[1].rationale = "kept";
    RationaleProvider provider;
    provider.annotate(insts);
    EXPECT_EQ(insts[0].rationale, offline_rationale(service()));
    EXPECT_EQ(insts[1].rationale, "kept");
}

TEST(RationalePrompt, AsksForOneSentence) {
    const std::string p = rationale_prompt(service());
    EXPECT_NE(p.find("explain in one sentence why the speaker holds this attitude toward the aspect"), std::string::npos);
    EXPECT_NE(p.find("Aspect: service"), std::string::npos);
    EXPECT_NE(p.find("negative"), std::string::npos);
}

TEST(HttpRationale, ReturnsCannedBodyAndSendsRequestShape) {
    std::mutex mu;
    nlohmann::json seen;
    std::string auth;
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard<std::mutex> lock(mu);
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(completion("waiting an hour frustrates a hungry diner"), "application/json");
    });
    auto cfg = server.config();
    cfg.api_key = "secret";
    cfg.model = "m1";
    RationaleProvider provider(cfg);
    EXPECT_EQ(provider.generate(service()), "waiting an hour frustrates a hungry diner");
    EXPECT_EQ(auth, "Bearer secret");
    EXPECT_EQ(seen["model"], "m1");
    ASSERT_EQ(seen["messages"].size(), 1u);
    EXPECT_EQ(seen["messages"][0]["role"], "user");
    EXPECT_EQ(seen["messages"][0]["content"], rationale_prompt(service()));
}

TEST(HttpRationale, NoAuthHeaderWithoutKey) {
    std::string auth = "unset";
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        auth = req.has_header("Authorization") ? req.get_header_value("Authorization") : "";
        res.set_content(completion("ok"), "application/json");
    });
    EXPECT_EQ(request_rationale(server.config(), service()), "ok");
    EXPECT_EQ(auth, "");
}

RationaleError::Kind error_kind(const HttpRationaleConfig& cfg) {
    try {
        request_rationale(cfg, service());
    } catch (const RationaleError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected RationaleError";
    return RationaleError::Kind::Connection;
}

TEST(HttpRationale, DistinctErrorKinds) {
    MockServer status([](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
        res.set_content("busy", "text/plain");
    });
    EXPECT_EQ(error_kind(status.config()), RationaleError::Kind::HttpStatus);

    MockServer malformed([](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"choices\": []}", "application/json");
    });
    EXPECT_EQ(error_kind(malformed.config()), RationaleError::Kind::MalformedResponse);

    MockServer not_json([](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
    EXPECT_EQ(error_kind(not_json.config()), RationaleError::Kind::MalformedResponse);

    MockServer slow([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(600));
        res.set_content(completion("late"), "application/json");
    });
    auto cfg = slow.config();
    cfg.timeout = std::chrono::milliseconds(150);
    EXPECT_EQ(error_kind(cfg), RationaleError::Kind::Timeout);
}

TEST(HttpRationale, TimeoutFallsBackWithLog) {
    MockServer slow([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(600));
        res.set_content(completion("late"), "application/json");
    });
    auto cfg = slow.config();
    cfg.timeout = std::chrono::milliseconds(150);
    cfg.fallback = true;
    std::vector<std::string> log;
    RationaleProvider provider(cfg, [&](const std::string& m) { log.push_back(m); });
    EXPECT_EQ(provider.generate(service()), offline_rationale(service()));
    EXPECT_EQ(provider.fallback_events(), 1u);
    ASSERT_EQ(log.size(), 1u);
    EXPECT_NE(log[0].find("fallback"), std::string::npos);

    cfg.fallback = false;
    RationaleProvider strict(cfg);
    EXPECT_THROW(strict.generate(service()), RationaleError);
}

TEST(HttpRationale, BoundedConcurrencyKeepsOrder) {
    std::atomic<int> in_flight{0}, peak{0};
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        const int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(40));
        const auto content = nlohmann::json::parse(req.body)["messages"][0]["content"].get<std::string>();
        const auto start = content.find("Aspect: ") + 8;
        res.set_content(completion("r-" + content.substr(start, content.find('\n', start) - start)),
                        "application/json");
        --in_flight;
    });
    std::vector<AnnotatedInstance> insts;
    for (int i = 0; i < 12; ++i) {
        const std::string a = "a" + std::to_string(i);
        insts.push_back({"the " + a + " broke", a, Polarity::Negative, true, ""});
    }
    auto cfg = server.config();
    RationaleProvider provider(cfg);
    const auto out = provider.generate_all(insts);
    ASSERT_EQ(out.size(), 12u);
    for (int i = 0; i < 12; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)], "r-a" + std::to_string(i));
    EXPECT_LE(peak.load(), 4);
    EXPECT_GE(peak.load(), 1);

    cfg.max_in_flight = 0;
    EXPECT_THROW(RationaleProvider{cfg}, ConfigError);
}

TEST(HttpRationale, ConnectionRefused) {
    HttpRationaleConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    cfg.timeout = std::chrono::milliseconds(500);
    const auto kind = error_kind(cfg);
    EXPECT_TRUE(kind == RationaleError::Kind::Connection || kind == RationaleError::Kind::Timeout);
}

TEST(HttpRationaleConfig, RequiresEndpointVariable) {
    ::unsetenv("TRMOE_LLM_ENDPOINT");
    try {
        HttpRationaleConfig::from_env();
        ADD_FAILURE();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "TRMOE_LLM_ENDPOINT");
    }
    ::setenv("TRMOE_LLM_ENDPOINT", "http://localhost:9/x", 1);
    ::setenv("TRMOE_LLM_KEY", "k", 1);
    const auto cfg = HttpRationaleConfig::from_env();
    EXPECT_EQ(cfg.endpoint, "http://localhost:9/x");
    EXPECT_EQ(cfg.api_key, "k");
    EXPECT_EQ(cfg.timeout, std::chrono::milliseconds(30000));
    ::unsetenv("TRMOE_LLM_ENDPOINT");
    ::unsetenv("TRMOE_LLM_KEY");
}

}  // namespace
}  // namespace trmoe
