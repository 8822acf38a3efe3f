// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Domain-weight policies. Every m steps the scheduler turns per-domain eval
// losses into a multiplicative update of the sampling weights:
//
//   velocitune  w'[i] ∝ w[i] * exp(clamp01((l - target) / (init - target)))
//   dbl         w'[i] ∝ w[i] * exp(max(l - target, 0))
//   no_target   w'[i] ∝ w[i] * exp(l / init)
//   static      w' = w

#pragma once

#include "velocitune/domain.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace velocitune {

enum class PolicyKind { Velocitune, Dbl, NoTarget, Static };

[[nodiscard]] std::string_view to_string(PolicyKind kind) noexcept;
/// Throws Validation for unknown names.
[[nodiscard]] PolicyKind parse_policy_kind(std::string_view name);
[[nodiscard]] bool needs_targets(PolicyKind kind) noexcept;

struct Policy {
    PolicyKind kind = PolicyKind::Velocitune;
    /// Uniform mixing applied after renormalization; 0 disables it.
    double smoothing = 0.0;

    bool operator==(const Policy&) const = default;
};

[[nodiscard]] VelocityVector compute_velocity(const LossVector& current, const LossVector& init,
                                              const LossVector& target, const std::vector<bool>& converged = {});

[[nodiscard]] WeightVector update_weights_velocitune(const WeightVector& prev, const VelocityVector& velocity);
[[nodiscard]] WeightVector update_weights_dbl(const WeightVector& prev, const LossVector& current,
                                              const LossVector& target);
[[nodiscard]] WeightVector update_weights_no_target(const WeightVector& prev, const LossVector& current,
                                                    const LossVector& init);

struct SchedulerState {
    Policy policy;
    WeightVector weights;
    LossVector init_losses;
    std::optional<LossVector> target_losses;
    /// Domains whose init loss already beats the target; their velocity is pinned to 0.
    std::vector<bool> converged;
    std::int64_t step = 0;
    std::int64_t update_interval = 150;
    std::optional<VelocityVector> last_velocity;

    bool operator==(const SchedulerState&) const = default;
};

/// Builds a validated state at step 0. Domains with init <= target are
/// flagged converged rather than rejected.
[[nodiscard]] SchedulerState make_scheduler(Policy policy, WeightVector initial, LossVector init_losses,
                                            std::optional<LossVector> target_losses,
                                            std::int64_t update_interval);

[[nodiscard]] bool is_update_step(const SchedulerState& state, std::int64_t step) noexcept;

struct SchedulerStepResult {
    SchedulerState state;
    WeightVector weights;
};

/// Advances to `step`. Losses must be supplied exactly on multiples of the
/// update interval (Protocol error otherwise); steps must strictly increase
/// (Ordering error otherwise).
[[nodiscard]] SchedulerStepResult scheduler_step(SchedulerState state, std::int64_t step,
                                                 const std::optional<LossVector>& eval_losses);

} // namespace velocitune
