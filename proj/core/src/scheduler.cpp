// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/scheduler.hpp"
#include "velocitune/error.hpp"

#include <algorithm>
#include <cmath>

namespace velocitune {

std::string_view to_string(PolicyKind kind) noexcept {
    switch (kind) {
        case PolicyKind::Velocitune: return "velocitune";
        case PolicyKind::Dbl: return "dbl";
        case PolicyKind::NoTarget: return "no_target";
        case PolicyKind::Static: return "static";
    }
    return "unknown";
}

PolicyKind parse_policy_kind(std::string_view name) {
    if (name == "velocitune") return PolicyKind::Velocitune;
    if (name == "dbl") return PolicyKind::Dbl;
    if (name == "no_target") return PolicyKind::NoTarget;
    if (name == "static" || name == "cpt") return PolicyKind::Static;
    throw Error(ErrorKind::Validation, "unknown policy '" + std::string(name) +
                                           "' (expected velocitune, dbl, no_target or static)");
}

bool needs_targets(PolicyKind kind) noexcept {
    return kind == PolicyKind::Velocitune || kind == PolicyKind::Dbl;
}

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw Error(ErrorKind::Validation, std::string(what) + ": length " + std::to_string(b) + " != " +
                                               std::to_string(a));
    }
}

// w[i] * exp(score[i] - max score), renormalized. Subtracting the max leaves
// the result unchanged and keeps exp() finite for unbounded scores.
WeightVector exp_reweight(const WeightVector& prev, std::span<const double> score) {
    const double top = *std::max_element(score.begin(), score.end());
    std::vector<double> raw(prev.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = prev[i] * std::exp(score[i] - top);
    return normalize(raw);
}

} // namespace

VelocityVector compute_velocity(const LossVector& current, const LossVector& init, const LossVector& target,
                                const std::vector<bool>& converged) {
    require_same_size(current.size(), init.size(), "init losses");
    require_same_size(current.size(), target.size(), "target losses");
    if (!converged.empty()) require_same_size(current.size(), converged.size(), "converged flags");

    std::vector<double> v(current.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!converged.empty() && converged[i]) {
            v[i] = 0.0;
            continue;
        }
        const double headroom = init[i] - target[i];
        if (!(headroom > 0.0)) {
            throw Error(ErrorKind::DegenerateDomain,
                        "domain " + std::to_string(i) + " has init loss <= target loss and is not flagged converged");
        }
        v[i] = std::clamp((current[i] - target[i]) / headroom, 0.0, 1.0);
    }
    return VelocityVector(std::move(v));
}

WeightVector update_weights_velocitune(const WeightVector& prev, const VelocityVector& velocity) {
    require_same_size(prev.size(), velocity.size(), "velocity");
    // V in [0, 1] keeps exp() in [1, e], so no shift is needed.
    std::vector<double> raw(prev.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = prev[i] * std::exp(velocity[i]);
    return normalize(raw);
}

WeightVector update_weights_dbl(const WeightVector& prev, const LossVector& current, const LossVector& target) {
    require_same_size(prev.size(), current.size(), "current losses");
    require_same_size(prev.size(), target.size(), "target losses");
    std::vector<double> dist(prev.size());
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = std::max(current[i] - target[i], 0.0);
    return exp_reweight(prev, dist);
}

WeightVector update_weights_no_target(const WeightVector& prev, const LossVector& current, const LossVector& init) {
    require_same_size(prev.size(), current.size(), "current losses");
    require_same_size(prev.size(), init.size(), "init losses");
    std::vector<double> ratio(prev.size());
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        if (!(init[i] > 0.0)) {
            throw Error(ErrorKind::DegenerateDomain, "domain " + std::to_string(i) + " has zero init loss");
        }
        ratio[i] = current[i] / init[i];
    }
    return exp_reweight(prev, ratio);
}

SchedulerState make_scheduler(Policy policy, WeightVector initial, LossVector init_losses,
                              std::optional<LossVector> target_losses, std::int64_t update_interval) {
    if (update_interval < 1) throw Error(ErrorKind::Validation, "update interval must be >= 1");
    if (!(policy.smoothing >= 0.0 && policy.smoothing <= 1.0)) {
        throw Error(ErrorKind::Validation, "smoothing must lie in [0, 1]");
    }
    require_same_size(initial.size(), init_losses.size(), "init losses");
    if (needs_targets(policy.kind) && !target_losses) {
        throw Error(ErrorKind::Validation, std::string(to_string(policy.kind)) + " policy requires target losses");
    }
    std::vector<bool> converged(initial.size(), false);
    if (target_losses) {
        require_same_size(initial.size(), target_losses->size(), "target losses");
        for (std::size_t i = 0; i < converged.size(); ++i) converged[i] = !((*target_losses)[i] < init_losses[i]);
    }
    return SchedulerState{policy,  std::move(initial), std::move(init_losses), std::move(target_losses),
                          std::move(converged), 0, update_interval, std::nullopt};
}

bool is_update_step(const SchedulerState& state, std::int64_t step) noexcept {
    return step > 0 && step % state.update_interval == 0;
}

SchedulerStepResult scheduler_step(SchedulerState state, std::int64_t step,
                                   const std::optional<LossVector>& eval_losses) {
    if (step <= state.step) {
        throw Error(ErrorKind::Ordering,
                    "step " + std::to_string(step) + " does not follow step " + std::to_string(state.step));
    }
    const bool update = is_update_step(state, step);
    if (update && !eval_losses) {
        throw Error(ErrorKind::Protocol, "eval losses required at update step " + std::to_string(step));
    }
    if (!update && eval_losses) {
        throw Error(ErrorKind::Protocol, "eval losses supplied at non-update step " + std::to_string(step));
    }
    if (update) {
        const LossVector& losses = *eval_losses;
        require_same_size(state.weights.size(), losses.size(), "eval losses");
        std::optional<WeightVector> next;
        switch (state.policy.kind) {
            case PolicyKind::Velocitune: {
                VelocityVector v = compute_velocity(losses, state.init_losses, *state.target_losses, state.converged);
                next = update_weights_velocitune(state.weights, v);
                state.last_velocity = std::move(v);
                break;
            }
            case PolicyKind::Dbl: next = update_weights_dbl(state.weights, losses, *state.target_losses); break;
            case PolicyKind::NoTarget:
                next = update_weights_no_target(state.weights, losses, state.init_losses);
                break;
            case PolicyKind::Static: next = state.weights; break;
        }
        if (state.policy.kind != PolicyKind::Static) next = smooth(*next, state.policy.smoothing);
        state.weights = std::move(*next);
    }
    state.step = step;
    WeightVector w = state.weights;
    return {std::move(state), std::move(w)};
}

} // namespace velocitune
