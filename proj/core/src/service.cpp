// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/service.hpp"
#include "velocitune/error.hpp"

#include "json.hpp"

#include <istream>
#include <ostream>

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cstring>

namespace velocitune {

using nlohmann::json;

namespace {

struct ProtocolFailure {
    std::string code;
    std::string expected;
    std::string message;
};

[[noreturn]] void reject(std::string expected, std::string message, std::string code = "protocol-error") {
    throw ProtocolFailure{std::move(code), std::move(expected), std::move(message)};
}

std::vector<double> number_array(const json& msg, const char* field, std::size_t expect_len, const std::string& expected) {
    if (!msg.contains(field) || !msg[field].is_array()) reject(expected, std::string("'") + field + "' must be an array");
    const json& a = msg[field];
    if (expect_len && a.size() != expect_len) {
        reject(expected, std::string("'") + field + "' has " + std::to_string(a.size()) + " entries, expected " +
                             std::to_string(expect_len));
    }
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) reject(expected, std::string("'") + field + "' must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::int64_t integer_field(const json& msg, const char* field, const std::string& expected) {
    if (!msg.contains(field) || !msg[field].is_number_integer()) {
        reject(expected, std::string("'") + field + "' must be an integer");
    }
    return msg[field].get<std::int64_t>();
}

} // namespace

SidecarSession::SidecarSession(const CheckpointBundle& resumed)
    : mDomains(resumed.domains), mState(resumed.scheduler) {}

std::string SidecarSession::handle(std::string_view line) {
    json id = nullptr;
    const std::string expected_next = mState ? "report_losses or checkpoint" : "init";
    try {
        json msg;
        try {
            msg = json::parse(line.begin(), line.end());
        } catch (const json::parse_error& e) {
            reject(expected_next, std::string("malformed message: ") + e.what(), "parse-error");
        }
        if (!msg.is_object()) reject(expected_next, "message must be a JSON object", "parse-error");
        if (msg.contains("id")) id = msg["id"];
        if (!msg.contains("kind") || !msg["kind"].is_string()) reject(expected_next, "message has no 'kind'");
        const std::string kind = msg["kind"].get<std::string>();

        if (kind == "init") {
            if (mState) reject("report_losses or checkpoint", "session is already initialized");
            if (!msg.contains("domains") || !msg["domains"].is_array() || msg["domains"].empty()) {
                reject("init", "'domains' must be a non-empty array of names");
            }
            std::vector<std::string> names;
            for (const auto& d : msg["domains"]) {
                if (!d.is_string()) reject("init", "'domains' must contain only strings");
                names.push_back(d.get<std::string>());
            }
            const std::size_t k = names.size();
            Policy policy;
            if (msg.contains("policy")) {
                const json& p = msg["policy"];
                if (p.is_string()) {
                    policy.kind = parse_policy_kind(p.get<std::string>());
                } else if (p.is_object() && p.contains("kind") && p["kind"].is_string()) {
                    policy.kind = parse_policy_kind(p["kind"].get<std::string>());
                    if (p.contains("smoothing") && p["smoothing"].is_number()) policy.smoothing = p["smoothing"].get<double>();
                } else {
                    reject("init", "'policy' must be a name or {kind, smoothing}");
                }
            }
            const std::int64_t m = msg.contains("update_interval") ? integer_field(msg, "update_interval", "init") : 150;
            LossVector init(number_array(msg, "init_losses", k, "init"));
            std::optional<LossVector> targets;
            if (msg.contains("target_losses") && !msg["target_losses"].is_null()) {
                targets = LossVector(number_array(msg, "target_losses", k, "init"));
            }
            std::optional<WeightVector> w0;
            if (msg.contains("initial_weights")) {
                w0 = WeightVector(number_array(msg, "initial_weights", k, "init"));
            } else if (msg.contains("token_counts")) {
                w0 = normalize(number_array(msg, "token_counts", k, "init"));
            } else {
                w0 = WeightVector::uniform(k);
            }
            if (!needs_targets(policy.kind)) targets.reset();
            DomainSet check(names, std::vector<std::uint64_t>(k, 1));
            SchedulerState state = make_scheduler(policy, *w0, init, targets, m);
            mDomains = std::move(names);
            mState = std::move(state);
            json r = {{"kind", "ack"}, {"id", id}, {"step", mState->step}, {"weights", mState->weights.vec()}};
            return r.dump();
        }

        if (!mState) reject("init", "first message must be 'init', got '" + kind + "'");

        if (kind == "report_losses") {
            const std::int64_t step = integer_field(msg, "step", "report_losses");
            if (step <= mState->step) {
                reject("report_losses", "step " + std::to_string(step) + " does not follow step " +
                                            std::to_string(mState->step), "ordering-error");
            }
            if (!is_update_step(*mState, step)) {
                reject("report_losses", "step " + std::to_string(step) + " is not a multiple of the update interval " +
                                            std::to_string(mState->update_interval));
            }
            LossVector losses(number_array(msg, "losses", mDomains.size(), "report_losses"));
            SchedulerStepResult res = scheduler_step(*mState, step, losses);
            json r = {{"kind", "weights"}, {"id", id}, {"step", step}, {"weights", res.weights.vec()}};
            if (res.state.policy.kind == PolicyKind::Velocitune && res.state.last_velocity) {
                r["velocity"] = res.state.last_velocity->vec();
            }
            mState = std::move(res.state);
            return r.dump();
        }

        if (kind == "checkpoint") {
            if (!msg.contains("path") || !msg["path"].is_string()) reject("checkpoint", "'path' must be a string");
            CheckpointBundle b{mDomains, *mState, std::nullopt, std::nullopt, std::nullopt, mState->step};
            save_checkpoint(b, msg["path"].get<std::string>());
            json r = {{"kind", "ack"}, {"id", id}, {"step", mState->step}, {"path", msg["path"]}};
            return r.dump();
        }

        reject(expected_next, "unknown message kind '" + kind + "'");
    } catch (const ProtocolFailure& f) {
        json r = {{"kind", "error"}, {"id", id}, {"code", f.code}, {"expected", f.expected}, {"message", f.message}};
        return r.dump();
    } catch (const Error& e) {
        json r = {{"kind", "error"},
                  {"id", id},
                  {"code", std::string(to_string(e.kind()))},
                  {"expected", expected_next},
                  {"message", e.what()}};
        return r.dump();
    } catch (const std::exception& e) {
        json r = {{"kind", "error"}, {"id", id}, {"code", "internal"}, {"expected", expected_next}, {"message", e.what()}};
        return r.dump(-1, ' ', false, json::error_handler_t::replace);
    }
}

void serve_stream(SidecarSession& session, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        out << session.handle(line) << '\n';
        out.flush();
    }
}

namespace {

bool write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

void serve_connection(SidecarSession& session, int fd) {
    std::string buffer;
    char chunk[4096];
    while (true) {
        const ssize_t n = ::read(fd, chunk, sizeof chunk);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            std::string line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            if (!write_all(fd, session.handle(line) + "\n")) return;
        }
    }
}

} // namespace

void serve_unix_socket(SidecarSession& session, const std::string& path, std::size_t max_clients) {
    sockaddr_un addr{};
    if (path.size() >= sizeof(addr.sun_path)) throw Error(ErrorKind::Io, "socket path too long: " + path);
    const int listener = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (listener < 0) throw Error(ErrorKind::Io, std::string("socket: ") + std::strerror(errno));
    addr.sun_family = AF_UNIX;
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    ::unlink(path.c_str());
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listener, 1) < 0) {
        const std::string err = std::strerror(errno);
        ::close(listener);
        throw Error(ErrorKind::Io, "cannot listen on '" + path + "': " + err);
    }
    for (std::size_t served = 0; max_clients == 0 || served < max_clients; ++served) {
        const int fd = ::accept(listener, nullptr, nullptr);
        if (fd < 0) break;
        serve_connection(session, fd);
        ::close(fd);
    }
    ::close(listener);
    ::unlink(path.c_str());
}

} // namespace velocitune
