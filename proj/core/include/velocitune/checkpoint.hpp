// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned, checksummed JSON checkpoints. Writes go to a temporary file in
// the destination directory and are renamed into place.

#pragma once

#include "velocitune/scheduler.hpp"
#include "velocitune/sim.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace velocitune {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointBundle {
    std::vector<std::string> domains;
    SchedulerState scheduler;
    std::optional<SamplerState> sampler;
    std::optional<SimState> sim;
    std::optional<Trajectory> trajectory;
    std::int64_t step = 0;

    bool operator==(const CheckpointBundle&) const = default;
};

[[nodiscard]] CheckpointBundle bundle_from_snapshot(const RunSnapshot& snap);
/// Throws Validation when the bundle lacks simulator state.
[[nodiscard]] RunSnapshot snapshot_from_bundle(const CheckpointBundle& bundle);

[[nodiscard]] std::string serialize_checkpoint(const CheckpointBundle& bundle);
/// Throws Corruption (truncation, checksum, missing fields) or VersionMismatch.
[[nodiscard]] CheckpointBundle deserialize_checkpoint(std::string_view text);

void save_checkpoint(const CheckpointBundle& bundle, const std::filesystem::path& path);
[[nodiscard]] CheckpointBundle load_checkpoint(const std::filesystem::path& path);

/// Atomic whole-file write (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

[[nodiscard]] std::uint64_t fnv1a64(std::string_view data) noexcept;

} // namespace velocitune
