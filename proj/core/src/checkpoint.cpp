// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/checkpoint.hpp"
#include "velocitune/error.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace velocitune {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "velocitune-checkpoint";

json losses_json(const LossVector& l) { return l.vec(); }

AllocationMode parse_mode(const std::string& s) {
    if (s == "multinomial") return AllocationMode::Multinomial;
    if (s == "proportional") return AllocationMode::Proportional;
    throw Error(ErrorKind::Corruption, "unknown sampling mode '" + s + "'");
}

json to_json(const SchedulerState& s) {
    json j;
    j["policy"] = {{"kind", std::string(to_string(s.policy.kind))}, {"smoothing", s.policy.smoothing}};
    j["weights"] = s.weights.vec();
    j["init_losses"] = losses_json(s.init_losses);
    j["target_losses"] = s.target_losses ? json(s.target_losses->vec()) : json(nullptr);
    j["converged"] = std::vector<bool>(s.converged);
    j["step"] = s.step;
    j["update_interval"] = s.update_interval;
    j["last_velocity"] = s.last_velocity ? json(s.last_velocity->vec()) : json(nullptr);
    return j;
}

SchedulerState scheduler_from_json(const json& j) {
    Policy p{parse_policy_kind(j.at("policy").at("kind").get<std::string>()),
             j.at("policy").at("smoothing").get<double>()};
    SchedulerState s{p,
                     WeightVector(j.at("weights").get<std::vector<double>>()),
                     LossVector(j.at("init_losses").get<std::vector<double>>()),
                     std::nullopt,
                     j.at("converged").get<std::vector<bool>>(),
                     j.at("step").get<std::int64_t>(),
                     j.at("update_interval").get<std::int64_t>(),
                     std::nullopt};
    if (!j.at("target_losses").is_null()) s.target_losses = LossVector(j["target_losses"].get<std::vector<double>>());
    if (!j.at("last_velocity").is_null()) {
        s.last_velocity = VelocityVector(j["last_velocity"].get<std::vector<double>>());
    }
    if (s.converged.size() != s.weights.size() || s.init_losses.size() != s.weights.size() || s.update_interval < 1) {
        throw Error(ErrorKind::Corruption, "scheduler state is inconsistent");
    }
    return s;
}

json to_json(const SamplerState& s) {
    json cursors = json::array();
    for (const auto& c : s.cursors) {
        cursors.push_back({{"sequences", c.sequences}, {"perm_key", c.perm_key}, {"cursor", c.cursor},
                           {"epochs", c.epochs}, {"started", c.started}});
    }
    return {{"mode", std::string(s.mode == AllocationMode::Multinomial ? "multinomial" : "proportional")},
            {"rng", {s.rng.key(), s.rng.counter()}},
            {"sequence_tokens", s.sequence_tokens},
            {"cursors", cursors},
            {"credit", s.credit},
            {"consumed_tokens", s.consumed_tokens}};
}

SamplerState sampler_from_json(const json& j) {
    SamplerState s;
    s.mode = parse_mode(j.at("mode").get<std::string>());
    s.rng = CounterRng::from_state(j.at("rng").at(0).get<std::uint64_t>(), j.at("rng").at(1).get<std::uint64_t>());
    s.sequence_tokens = j.at("sequence_tokens").get<std::uint64_t>();
    for (const auto& c : j.at("cursors")) {
        s.cursors.push_back({c.at("sequences").get<std::uint64_t>(), c.at("perm_key").get<std::uint64_t>(),
                             c.at("cursor").get<std::uint64_t>(), c.at("epochs").get<std::uint64_t>(),
                             c.at("started").get<bool>()});
    }
    s.credit = j.at("credit").get<std::vector<double>>();
    s.consumed_tokens = j.at("consumed_tokens").get<std::vector<std::uint64_t>>();
    return s;
}

json to_json(const SimState& s) {
    return {{"consumed", s.consumed}, {"step", s.step}, {"rng", {s.noise_rng.key(), s.noise_rng.counter()}}};
}

SimState sim_from_json(const json& j) {
    return {j.at("consumed").get<std::vector<std::uint64_t>>(), j.at("step").get<std::int64_t>(),
            CounterRng::from_state(j.at("rng").at(0).get<std::uint64_t>(), j.at("rng").at(1).get<std::uint64_t>())};
}

json to_json(const Trajectory& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        rows.push_back({{"step", r.step},
                        {"weights", r.weights.vec()},
                        {"eval_losses", r.eval_losses.vec()},
                        {"velocities", r.velocities ? json(r.velocities->vec()) : json(nullptr)},
                        {"alloc_tokens", r.alloc_tokens}});
    }
    return {{"domains", t.domains},
            {"policy", std::string(to_string(t.policy))},
            {"total_steps", t.total_steps},
            {"rows", rows}};
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.domains = j.at("domains").get<std::vector<std::string>>();
    t.policy = parse_policy_kind(j.at("policy").get<std::string>());
    t.total_steps = j.at("total_steps").get<std::int64_t>();
    for (const auto& r : j.at("rows")) {
        TrajectoryRow row{r.at("step").get<std::int64_t>(), WeightVector(r.at("weights").get<std::vector<double>>()),
                          LossVector(r.at("eval_losses").get<std::vector<double>>()), std::nullopt,
                          r.at("alloc_tokens").get<std::vector<std::uint64_t>>()};
        if (!r.at("velocities").is_null()) row.velocities = VelocityVector(r["velocities"].get<std::vector<double>>());
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

CheckpointBundle bundle_from_snapshot(const RunSnapshot& snap) {
    return {snap.trajectory.domains, snap.scheduler, snap.sampler, snap.sim, snap.trajectory, snap.step};
}

RunSnapshot snapshot_from_bundle(const CheckpointBundle& b) {
    if (!b.sampler || !b.sim || !b.trajectory) {
        throw Error(ErrorKind::Validation, "checkpoint does not contain simulator state");
    }
    return {b.scheduler, *b.sampler, *b.sim, *b.trajectory, b.step};
}

std::string serialize_checkpoint(const CheckpointBundle& b) {
    json payload;
    payload["domains"] = b.domains;
    payload["step"] = b.step;
    payload["scheduler"] = to_json(b.scheduler);
    payload["sampler"] = b.sampler ? to_json(*b.sampler) : json(nullptr);
    payload["sim"] = b.sim ? to_json(*b.sim) : json(nullptr);
    payload["trajectory"] = b.trajectory ? to_json(*b.trajectory) : json(nullptr);
    const std::string body = payload.dump();

    json root;
    root["format"] = kFormat;
    root["version"] = kCheckpointVersion;
    root["checksum"] = hex64(fnv1a64(body));
    root["payload"] = std::move(payload);
    return root.dump(1) + "\n";
}

CheckpointBundle deserialize_checkpoint(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Corruption, std::string("checkpoint is not valid JSON (truncated?): ") + e.what());
    }
    if (!root.is_object() || root.value("format", "") != kFormat) {
        throw Error(ErrorKind::Corruption, "not a velocitune checkpoint");
    }
    if (!root.contains("version") || !root["version"].is_number_integer()) {
        throw Error(ErrorKind::Corruption, "checkpoint has no version");
    }
    if (root["version"].get<int>() != kCheckpointVersion) {
        throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(root["version"].get<int>()) +
                                                    ", expected " + std::to_string(kCheckpointVersion));
    }
    if (!root.contains("payload") || !root.contains("checksum") || !root["checksum"].is_string()) {
        throw Error(ErrorKind::Corruption, "checkpoint is missing payload or checksum");
    }
    const json& p = root["payload"];
    if (hex64(fnv1a64(p.dump())) != root["checksum"].get<std::string>()) {
        throw Error(ErrorKind::Corruption, "checkpoint checksum mismatch");
    }
    try {
        CheckpointBundle b{p.at("domains").get<std::vector<std::string>>(), scheduler_from_json(p.at("scheduler")),
                           std::nullopt, std::nullopt, std::nullopt, p.at("step").get<std::int64_t>()};
        if (!p.at("sampler").is_null()) b.sampler = sampler_from_json(p["sampler"]);
        if (!p.at("sim").is_null()) b.sim = sim_from_json(p["sim"]);
        if (!p.at("trajectory").is_null()) b.trajectory = trajectory_from_json(p["trajectory"]);
        if (b.domains.size() != b.scheduler.weights.size()) {
            throw Error(ErrorKind::Corruption, "domain list does not match scheduler state");
        }
        return b;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Corruption, std::string("malformed checkpoint payload: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Corruption) throw;
        throw Error(ErrorKind::Corruption, std::string("invalid checkpoint state: ") + e.what());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    const fs::path tmp = dir / ("." + path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw Error(ErrorKind::Io, "short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot rename checkpoint into '" + path.string() + "'");
    }
}

void save_checkpoint(const CheckpointBundle& bundle, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_checkpoint(bundle));
}

CheckpointBundle load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

} // namespace velocitune
