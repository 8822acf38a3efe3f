// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/config.hpp"
#include "velocitune/error.hpp"

#include <catch_amalgamated.hpp>

#include <string>

using namespace velocitune;
using Catch::Matchers::ContainsSubstring;

namespace {

Error parse_error(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const Error& e) {
        return e;
    }
    FAIL("config was accepted: " << text);
    return Error(ErrorKind::Io, "unreachable");
}

} // namespace

TEST_CASE("minimal config gets defaults", "[io][config]") {
    const RunConfig c = parse_config(R"({"domains": [{"name": "a", "tokens": 300}, {"name": "b", "tokens": 100}]})");
    CHECK(c.domains.size() == 2);
    CHECK(c.policy.kind == PolicyKind::Velocitune);
    CHECK(c.policy.smoothing == 0.0);
    CHECK(c.settings.update_interval == 150);
    CHECK(c.settings.proxy_fraction == 0.51);
    CHECK(c.settings.total_tokens == 400);
    CHECK(c.initial_mode == InitialWeightMode::TokenRatio);
    CHECK(c.initial_weights().vec() == std::vector<double>{0.75, 0.25});
    CHECK_FALSE(c.dynamics.has_value());
    CHECK_THROWS_AS(c.scenario(), Error);
}

TEST_CASE("explicit weights must lie on the simplex", "[io][config]") {
    const Error e = parse_error(R"({"domains": [{"name": "a", "tokens": 1, "weight": 0.5},
                                                {"name": "b", "tokens": 1, "weight": 0.4}]})");
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK_THAT(e.what(), ContainsSubstring("weight"));

    CHECK(parse_error(R"({"domains": [{"name": "a", "tokens": 1, "weight": 1.0}, {"name": "b", "tokens": 1}]})").kind() ==
          ErrorKind::Validation);
}

TEST_CASE("SystemStack fixture keeps its explicit ratios", "[io][config]") {
    const RunConfig c = load_config(VELOCITUNE_CONFIG_DIR "/systemstack.json");
    CHECK(c.initial_mode == InitialWeightMode::Explicit);
    CHECK(c.initial_weights().vec() == std::vector<double>{0.187, 0.503, 0.310});
    CHECK(c.domains.names() == std::vector<std::string>{"Blogs", "Stackoverflow", "Arxiv"});
    CHECK(c.settings.proxy_fraction == 0.58);
    CHECK_NOTHROW(c.scenario());
}

TEST_CASE("shipped fixtures load", "[io][config]") {
    for (const char* name : {"reference.json", "saturated.json", "systemstack.json", "minimal.json"}) {
        INFO(name);
        const RunConfig c = load_config(std::string(VELOCITUNE_CONFIG_DIR) + "/" + name);
        CHECK(c.dynamics.has_value());
        CHECK_NOTHROW(c.scenario());
    }
    const RunConfig ref = load_config(VELOCITUNE_CONFIG_DIR "/reference.json");
    CHECK(ref.domains.size() == 5);
    CHECK(ref.settings.total_tokens == 63'000'000'000ull);
    CHECK(ref.settings.seed == 20241113);
}

TEST_CASE("validation names the offending field", "[io][config]") {
    const std::string head = R"({"domains": [{"name": "a", "tokens": 10}], )";
    struct Case {
        std::string body;
        std::string field;
    };
    for (const auto& c : std::vector<Case>{
             {R"("update_interval": 0})", "update_interval"},
             {R"("proxy_fraction": 1.5})", "proxy_fraction"},
             {R"("proxy_fraction": 0})", "proxy_fraction"},
             {R"("smoothing": 2})", "smoothing"},
             {R"("batch_tokens": 100})", "batch_tokens"},
             {R"("policy": "doremi"})", "policy"},
             {R"("sampling": "stratified"})", "sampling"},
             {R"("seed": -1})", "seed"},
             {R"("colour": "red"})", "colour"},
             {R"("fit": {"huber_delta": 0}})", "fit.huber_delta"},
             {R"("dynamics": {"domains": [{"E": 1, "B": 1, "beta": 3, "D0": 1}]}})", "beta"},
             {R"("dynamics": {"domains": []}})", "dynamics.domains"},
         }) {
        INFO(c.body);
        const Error e = parse_error(head + c.body);
        CHECK(e.kind() == ErrorKind::Validation);
        CHECK_THAT(e.what(), ContainsSubstring(c.field));
    }
}

TEST_CASE("syntax errors report line and column", "[io][config]") {
    const Error e = parse_error("{\n  \"domains\": [\n    {\"name\": \"a\" \"tokens\": 1}\n  ]\n}\n");
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK_THAT(e.what(), ContainsSubstring("line 3"));
    CHECK_THAT(e.what(), ContainsSubstring("column"));
}

TEST_CASE("duplicate domain names are rejected", "[io][config]") {
    const Error e = parse_error(R"({"domains": [{"name": "a", "tokens": 1}, {"name": "a", "tokens": 2}]})");
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK_THAT(e.what(), ContainsSubstring("domains"));
}

TEST_CASE("integral floats are accepted for token counts", "[io][config]") {
    const RunConfig c = parse_config(R"({"domains": [{"name": "a", "tokens": 1.6e10}], "total_tokens": 3.2e10})");
    CHECK(c.domains.token_counts()[0] == 16'000'000'000ull);
    CHECK(c.settings.total_tokens == 32'000'000'000ull);
    CHECK(parse_error(R"({"domains": [{"name": "a", "tokens": 1.5}]})").kind() == ErrorKind::Validation);
}

TEST_CASE("uniform initial weights and policy objects", "[io][config]") {
    const RunConfig c = parse_config(R"({"domains": [{"name": "a", "tokens": 3}, {"name": "b", "tokens": 1}],
                                         "initial_weights": "uniform",
                                         "policy": {"kind": "dbl", "smoothing": 0.1}})");
    CHECK(c.initial_weights().vec() == std::vector<double>{0.5, 0.5});
    CHECK(c.policy == Policy{PolicyKind::Dbl, 0.1});
    CHECK(c.settings.smoothing == 0.1);
}

TEST_CASE("missing files are io errors", "[io][config]") {
    try {
        (void)load_config("/nonexistent/velocitune.json");
        FAIL("missing file accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
}
