// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration, JSON on disk. Field reference: docs/config.md.

#pragma once

#include "velocitune/domain.hpp"
#include "velocitune/scheduler.hpp"
#include "velocitune/sim.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace velocitune {

enum class InitialWeightMode { TokenRatio, Uniform, Explicit };

struct RunConfig {
    DomainSet domains{{"default"}, {1}};
    InitialWeightMode initial_mode = InitialWeightMode::TokenRatio;
    Policy policy;
    RunSettings settings; ///< settings.initial_weights is always populated after loading
    std::optional<DynamicsParams> dynamics;

    [[nodiscard]] WeightVector initial_weights() const { return WeightVector(settings.initial_weights); }
    /// Throws Validation when the config has no dynamics block.
    [[nodiscard]] Scenario scenario() const;
};

/// Parses and validates; Parse errors carry line/column, Validation errors
/// name the offending field.
[[nodiscard]] RunConfig parse_config(std::string_view text, std::string_view source = "<config>");
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

[[nodiscard]] std::string_view to_string(AllocationMode mode) noexcept;
[[nodiscard]] std::string_view to_string(TokenAxis axis) noexcept;

} // namespace velocitune
