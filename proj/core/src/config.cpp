// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/config.hpp"
#include "velocitune/error.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace velocitune {

using nlohmann::json;

std::string_view to_string(AllocationMode mode) noexcept {
    return mode == AllocationMode::Multinomial ? "multinomial" : "proportional";
}

std::string_view to_string(TokenAxis axis) noexcept {
    return axis == TokenAxis::Cumulative ? "cumulative" : "per_domain";
}

Scenario RunConfig::scenario() const {
    if (!dynamics) throw Error(ErrorKind::Validation, "config has no 'dynamics' block; simulation needs one");
    Scenario s{domains, *dynamics, settings};
    s.validate();
    return s;
}

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
    throw Error(ErrorKind::Validation, field + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!ok.count(it.key())) invalid(where.empty() ? it.key() : where + "." + it.key(), "unknown field");
    }
}

const json& require_object(const json& j, const std::string& field) {
    if (!j.is_object()) invalid(field, "expected an object");
    return j;
}

double get_double(const json& j, const std::string& field) {
    if (!j.is_number()) invalid(field, "expected a number");
    return j.get<double>();
}

std::uint64_t get_u64(const json& j, const std::string& field) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) invalid(field, "must be non-negative");
    // Accept integral floats such as 1.6e10.
    if (j.is_number_float()) {
        const double d = j.get<double>();
        if (d >= 0.0 && d < 1.8e19 && d == std::floor(d)) return static_cast<std::uint64_t>(d);
        invalid(field, "expected a non-negative integer");
    }
    invalid(field, "expected a non-negative integer");
}

std::string get_string(const json& j, const std::string& field) {
    if (!j.is_string()) invalid(field, "expected a string");
    return j.get<std::string>();
}

std::vector<double> get_doubles(const json& j, const std::string& field) {
    if (!j.is_array()) invalid(field, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_double(j[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

std::string line_col(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void parse_fit(const json& j, RunSettings& s) {
    require_object(j, "fit");
    check_keys(j, "fit", {"huber_delta", "token_axis", "max_iterations", "beta_starts", "floor_start_fractions",
                          "beta_max"});
    if (j.contains("huber_delta")) s.fit.huber_delta = get_double(j["huber_delta"], "fit.huber_delta");
    if (j.contains("beta_max")) s.fit.beta_max = get_double(j["beta_max"], "fit.beta_max");
    if (j.contains("max_iterations")) {
        s.fit.max_iterations = static_cast<int>(get_u64(j["max_iterations"], "fit.max_iterations"));
    }
    if (j.contains("beta_starts")) s.fit.beta_starts = get_doubles(j["beta_starts"], "fit.beta_starts");
    if (j.contains("floor_start_fractions")) {
        s.fit.floor_start_fractions = get_doubles(j["floor_start_fractions"], "fit.floor_start_fractions");
    }
    if (j.contains("token_axis")) {
        const std::string a = get_string(j["token_axis"], "fit.token_axis");
        if (a == "cumulative") s.token_axis = TokenAxis::Cumulative;
        else if (a == "per_domain") s.token_axis = TokenAxis::PerDomain;
        else invalid("fit.token_axis", "expected 'cumulative' or 'per_domain'");
    }
    if (!(s.fit.huber_delta > 0.0)) invalid("fit.huber_delta", "must be positive");
    if (!(s.fit.beta_max > 0.0 && s.fit.beta_max <= 2.0)) invalid("fit.beta_max", "must lie in (0, 2]");
    if (s.fit.beta_starts.empty()) invalid("fit.beta_starts", "must not be empty");
    for (double b : s.fit.beta_starts)
        if (!(b > 0.0 && b <= s.fit.beta_max)) invalid("fit.beta_starts", "entries must lie in (0, beta_max]");
    for (double f : s.fit.floor_start_fractions)
        if (!(f >= 0.0 && f < 1.0)) invalid("fit.floor_start_fractions", "entries must lie in [0, 1)");
}

DynamicsParams parse_dynamics(const json& j, std::size_t k) {
    require_object(j, "dynamics");
    check_keys(j, "dynamics", {"noise_sigma", "domains", "transfer"});
    DynamicsParams p;
    if (j.contains("noise_sigma")) p.noise_sigma = get_double(j["noise_sigma"], "dynamics.noise_sigma");
    if (!j.contains("domains") || !j["domains"].is_array()) invalid("dynamics.domains", "expected an array");
    const json& ds = j["domains"];
    if (ds.size() != k) {
        invalid("dynamics.domains", "has " + std::to_string(ds.size()) + " entries for " + std::to_string(k) + " domains");
    }
    for (std::size_t i = 0; i < k; ++i) {
        const std::string f = "dynamics.domains[" + std::to_string(i) + "]";
        require_object(ds[i], f);
        check_keys(ds[i], f, {"E", "B", "beta", "D0"});
        for (const char* key : {"E", "B", "beta", "D0"})
            if (!ds[i].contains(key)) invalid(f + "." + key, "missing");
        p.domains.push_back({get_double(ds[i]["E"], f + ".E"), get_double(ds[i]["B"], f + ".B"),
                             get_double(ds[i]["beta"], f + ".beta"), get_double(ds[i]["D0"], f + ".D0")});
    }
    if (j.contains("transfer")) {
        const json& t = j["transfer"];
        if (!t.is_array() || t.size() != k) invalid("dynamics.transfer", "expected a k x k array");
        for (std::size_t i = 0; i < k; ++i) {
            auto row = get_doubles(t[i], "dynamics.transfer[" + std::to_string(i) + "]");
            if (row.size() != k) invalid("dynamics.transfer[" + std::to_string(i) + "]", "expected k entries");
            p.transfer.push_back(std::move(row));
        }
    } else {
        p.transfer = DynamicsParams::identity_transfer(k);
    }
    p.validate();
    return p;
}

} // namespace

RunConfig parse_config(std::string_view text, std::string_view source) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw Error(ErrorKind::Parse, std::string(source) + ": " + line_col(text, byte) + ": " + e.what());
    }
    require_object(root, "<root>");
    check_keys(root, "", {"domains", "initial_weights", "policy", "smoothing", "update_interval", "total_tokens",
                          "batch_tokens", "sequence_tokens", "proxy_fraction", "sampling", "seed", "fit", "dynamics"});

    if (!root.contains("domains") || !root["domains"].is_array() || root["domains"].empty()) {
        invalid("domains", "expected a non-empty array");
    }
    std::vector<std::string> names;
    std::vector<std::uint64_t> tokens;
    std::vector<double> explicit_w;
    std::size_t with_weight = 0;
    for (std::size_t i = 0; i < root["domains"].size(); ++i) {
        const json& d = root["domains"][i];
        const std::string f = "domains[" + std::to_string(i) + "]";
        require_object(d, f);
        check_keys(d, f, {"name", "tokens", "weight"});
        if (!d.contains("name")) invalid(f + ".name", "missing");
        if (!d.contains("tokens")) invalid(f + ".tokens", "missing");
        names.push_back(get_string(d["name"], f + ".name"));
        tokens.push_back(get_u64(d["tokens"], f + ".tokens"));
        if (d.contains("weight")) {
            explicit_w.push_back(get_double(d["weight"], f + ".weight"));
            ++with_weight;
        }
    }
    if (with_weight != 0 && with_weight != names.size()) {
        invalid("domains", "either every domain or no domain may carry an explicit weight");
    }

    RunConfig cfg;
    try {
        cfg.domains = DomainSet(names, tokens);
    } catch (const Error& e) {
        invalid("domains", e.what());
    }
    const std::size_t k = cfg.domains.size();
    RunSettings& s = cfg.settings;

    if (root.contains("initial_weights")) {
        const std::string mode = get_string(root["initial_weights"], "initial_weights");
        if (mode == "token_ratio") cfg.initial_mode = InitialWeightMode::TokenRatio;
        else if (mode == "uniform") cfg.initial_mode = InitialWeightMode::Uniform;
        else invalid("initial_weights", "expected 'token_ratio' or 'uniform'");
        if (with_weight) invalid("initial_weights", "conflicts with explicit per-domain weights");
    }
    if (with_weight) cfg.initial_mode = InitialWeightMode::Explicit;

    try {
        switch (cfg.initial_mode) {
            case InitialWeightMode::Explicit: s.initial_weights = WeightVector(explicit_w).vec(); break;
            case InitialWeightMode::Uniform: s.initial_weights = WeightVector::uniform(k).vec(); break;
            case InitialWeightMode::TokenRatio: s.initial_weights = default_weights(cfg.domains).vec(); break;
        }
    } catch (const Error& e) {
        invalid("domains[].weight", e.what());
    }

    if (root.contains("policy")) {
        const json& p = root["policy"];
        if (p.is_string()) {
            cfg.policy.kind = parse_policy_kind(p.get<std::string>());
        } else {
            require_object(p, "policy");
            check_keys(p, "policy", {"kind", "smoothing"});
            if (!p.contains("kind")) invalid("policy.kind", "missing");
            cfg.policy.kind = parse_policy_kind(get_string(p["kind"], "policy.kind"));
            if (p.contains("smoothing")) cfg.policy.smoothing = get_double(p["smoothing"], "policy.smoothing");
        }
    }
    if (root.contains("smoothing")) {
        s.smoothing = get_double(root["smoothing"], "smoothing");
        if (cfg.policy.smoothing == 0.0) cfg.policy.smoothing = s.smoothing;
    }
    if (!(cfg.policy.smoothing >= 0.0 && cfg.policy.smoothing <= 1.0)) invalid("smoothing", "must lie in [0, 1]");
    s.smoothing = cfg.policy.smoothing;

    if (root.contains("update_interval")) {
        const std::uint64_t m = get_u64(root["update_interval"], "update_interval");
        if (m < 1) invalid("update_interval", "must be >= 1");
        s.update_interval = static_cast<std::int64_t>(m);
    }
    s.total_tokens = root.contains("total_tokens") ? get_u64(root["total_tokens"], "total_tokens")
                                                   : cfg.domains.total_tokens();
    if (s.total_tokens == 0) invalid("total_tokens", "must be positive");
    if (root.contains("batch_tokens")) s.batch_tokens = get_u64(root["batch_tokens"], "batch_tokens");
    if (root.contains("sequence_tokens")) s.sequence_tokens = get_u64(root["sequence_tokens"], "sequence_tokens");
    if (s.sequence_tokens == 0) invalid("sequence_tokens", "must be positive");
    if (s.batch_tokens < s.sequence_tokens) invalid("batch_tokens", "must hold at least one sequence");
    if (root.contains("proxy_fraction")) s.proxy_fraction = get_double(root["proxy_fraction"], "proxy_fraction");
    if (!(s.proxy_fraction > 0.0 && s.proxy_fraction <= 1.0)) invalid("proxy_fraction", "must lie in (0, 1]");
    if (root.contains("sampling")) {
        const std::string m = get_string(root["sampling"], "sampling");
        if (m == "multinomial") s.sampling = AllocationMode::Multinomial;
        else if (m == "proportional") s.sampling = AllocationMode::Proportional;
        else invalid("sampling", "expected 'multinomial' or 'proportional'");
    }
    if (root.contains("seed")) s.seed = get_u64(root["seed"], "seed");
    if (root.contains("fit")) parse_fit(root["fit"], s);
    if (root.contains("dynamics")) cfg.dynamics = parse_dynamics(root["dynamics"], k);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

} // namespace velocitune
