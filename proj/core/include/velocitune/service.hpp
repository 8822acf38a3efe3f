// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sidecar protocol: one JSON object per line in each direction, strictly
// request/response. Grammar: docs/protocol.md.

#pragma once

#include "velocitune/checkpoint.hpp"
#include "velocitune/scheduler.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace velocitune {

class SidecarSession {
public:
    SidecarSession() = default;
    /// Continues a session persisted by a `checkpoint` request.
    explicit SidecarSession(const CheckpointBundle& resumed);

    /// Exactly one response line (without trailing newline) per request line.
    /// Never throws for malformed input; failures become `error` responses.
    [[nodiscard]] std::string handle(std::string_view line);

    [[nodiscard]] bool initialized() const noexcept { return mState.has_value(); }
    [[nodiscard]] const std::optional<SchedulerState>& state() const noexcept { return mState; }
    [[nodiscard]] const std::vector<std::string>& domains() const noexcept { return mDomains; }

private:
    std::vector<std::string> mDomains;
    std::optional<SchedulerState> mState;
};

/// Reads requests until end-of-stream, flushing after every response.
void serve_stream(SidecarSession& session, std::istream& in, std::ostream& out);

/// Listens on a Unix domain socket; clients are served one at a time and the
/// session state carries over between connections. Returns when `max_clients`
/// connections have closed (0 = forever).
void serve_unix_socket(SidecarSession& session, const std::string& path, std::size_t max_clients = 0);

} // namespace velocitune
