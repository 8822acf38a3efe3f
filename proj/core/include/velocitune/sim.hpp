// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parametric training-dynamics simulator. Each domain's eval loss follows
//
//   l_i = E_i + B_i * (D0_i + sum_j tau_ij * consumed_j)^-beta_i
//
// where tau is a transfer matrix with unit diagonal. The simulator replaces
// the model in the two-phase pipeline: a static proxy run produces
// checkpoints, the scaling fit yields targets, and the scheduler drives the
// main run.

#pragma once

#include "velocitune/domain.hpp"
#include "velocitune/rng.hpp"
#include "velocitune/sampler.hpp"
#include "velocitune/scaling.hpp"
#include "velocitune/scheduler.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace velocitune {

struct DomainDynamics {
    double E = 0.0;
    double B = 1.0;
    double beta = 0.3;
    double D0 = 0.0;

    bool operator==(const DomainDynamics&) const = default;
};

struct DynamicsParams {
    std::vector<DomainDynamics> domains;
    std::vector<std::vector<double>> transfer; ///< k x k, tau_ii = 1
    double noise_sigma = 0.005;

    [[nodiscard]] std::size_t size() const noexcept { return domains.size(); }
    /// Throws Validation naming the violated invariant.
    void validate() const;
    /// Identity transfer, no cross-domain credit.
    static std::vector<std::vector<double>> identity_transfer(std::size_t k);

    bool operator==(const DynamicsParams&) const = default;
};

struct SimState {
    std::vector<std::uint64_t> consumed;
    std::int64_t step = 0;
    CounterRng noise_rng;

    bool operator==(const SimState&) const = default;
};

[[nodiscard]] SimState make_sim_state(std::size_t k, std::uint64_t seed, std::uint64_t stream);

/// Exact closed-form losses.
[[nodiscard]] LossVector sim_eval(const DynamicsParams& params, const SimState& state);
/// Adds N(0, noise_sigma) per domain and advances the noise stream; clamped at 0.
[[nodiscard]] LossVector sim_eval_noisy(const DynamicsParams& params, SimState& state);
/// Throws DomainError for negative allocations.
[[nodiscard]] SimState sim_train_step(const DynamicsParams& params, SimState state,
                                      std::span<const std::int64_t> allocation);

enum class TokenAxis { Cumulative, PerDomain };

/// Everything a simulated run needs besides the dynamics and the policy.
struct RunSettings {
    std::uint64_t total_tokens = 0;
    std::uint64_t batch_tokens = 1'000'000;
    std::uint64_t sequence_tokens = 4096;
    std::int64_t update_interval = 150;
    std::uint64_t seed = 0;
    AllocationMode sampling = AllocationMode::Multinomial;
    double proxy_fraction = 0.51;
    TokenAxis token_axis = TokenAxis::Cumulative;
    FitOptions fit;
    double smoothing = 0.0;
    std::vector<double> initial_weights; ///< empty means token-ratio

    [[nodiscard]] std::uint64_t slots_per_batch() const;
    [[nodiscard]] std::uint64_t tokens_per_batch() const { return slots_per_batch() * sequence_tokens; }
    /// ceil(total / tokens_per_batch): consumption overshoots by less than one batch.
    [[nodiscard]] std::int64_t total_steps(std::uint64_t total) const;
};

struct Scenario {
    DomainSet domains;
    DynamicsParams dynamics;
    RunSettings settings;

    [[nodiscard]] WeightVector initial_weights() const;
    void validate() const;
};

/// Static default-weight run over `proxy_fraction` of the token budget;
/// one noisy checkpoint per update interval.
[[nodiscard]] std::vector<CheckpointSeries> run_proxy_phase(const Scenario& scenario);

struct PipelineResult {
    LossVector init_losses;
    std::vector<CheckpointSeries> checkpoints;
    std::vector<ScalingFit> fits;
    std::vector<double> full_tokens;
    LossVector target_losses;
};

/// Proxy run, per-domain fits, and extrapolated targets at the full budget.
/// Init losses come from the noiseless eval path at t = 0.
[[nodiscard]] PipelineResult prepare_targets(const Scenario& scenario);

struct TrajectoryRow {
    std::int64_t step = 0;
    WeightVector weights;
    LossVector eval_losses;
    std::optional<VelocityVector> velocities;
    std::vector<std::uint64_t> alloc_tokens; ///< tokens drawn while these weights were in effect

    bool operator==(const TrajectoryRow&) const = default;
};

struct Trajectory {
    std::vector<std::string> domains;
    PolicyKind policy = PolicyKind::Static;
    std::int64_t total_steps = 0;
    std::vector<TrajectoryRow> rows;

    [[nodiscard]] std::vector<std::uint64_t> total_alloc_tokens() const;
    bool operator==(const Trajectory&) const = default;
};

/// Complete resumable state of a simulated run.
struct RunSnapshot {
    SchedulerState scheduler;
    SamplerState sampler;
    SimState sim;
    Trajectory trajectory;
    std::int64_t step = 0;

    bool operator==(const RunSnapshot&) const = default;
};

/// Algorithm loop as a stepper: at step t the scheduler sees losses after
/// t-1 batches whenever t is a multiple of m, then one batch is drawn.
class TrainingRun {
public:
    TrainingRun(const Scenario& scenario, Policy policy, const LossVector& init_losses,
                const std::optional<LossVector>& target_losses);
    TrainingRun(const Scenario& scenario, RunSnapshot snapshot);

    [[nodiscard]] bool done() const noexcept { return mSnap.step >= mSnap.trajectory.total_steps; }
    void step();
    void run_until(std::int64_t step);
    TrainingRun& run_to_end();

    [[nodiscard]] std::int64_t current_step() const noexcept { return mSnap.step; }
    [[nodiscard]] const Trajectory& trajectory() const noexcept { return mSnap.trajectory; }
    [[nodiscard]] const RunSnapshot& snapshot() const noexcept { return mSnap; }
    /// Noiseless losses of the current simulated model.
    [[nodiscard]] LossVector current_losses() const;

private:
    Scenario mScenario;
    std::uint64_t mSlots;
    RunSnapshot mSnap;
};

[[nodiscard]] Trajectory run_training(const Scenario& scenario, Policy policy, const LossVector& init_losses,
                                      const std::optional<LossVector>& target_losses);

/// Earliest evaluation step after which every row stays within `epsilon`
/// (max-norm) of the final weights. A window consisting only of the final row
/// does not count, so a tail that never settles yields nullopt.
[[nodiscard]] std::optional<std::int64_t> stabilization_step(const Trajectory& traj, double epsilon);

/// Step-weighted mean of the weights in effect over the run.
[[nodiscard]] WeightVector time_averaged_weights(const Trajectory& traj);

struct PolicySummary {
    std::string label;
    Policy policy;
    Trajectory trajectory;
    LossVector final_losses;      ///< noiseless
    VelocityVector final_velocity; ///< against the shared init/targets
    double velocity_spread = 0.0;
    double max_gap_to_target = 0.0; ///< max_i (final_i - target_i)
    std::optional<std::int64_t> stabilization;
    WeightVector averaged_weights;
};

struct ComparisonReport {
    PipelineResult pipeline;
    double stabilization_epsilon = 0.01;
    std::vector<PolicySummary> summaries;
};

struct ComparisonOptions {
    double stabilization_epsilon = 0.01;
    /// Also replay velocitune's time-averaged weights as a static mixture.
    bool with_reweighted = false;
};

/// Runs every policy on the shared scenario (parallel, merged in input order).
[[nodiscard]] ComparisonReport compare_policies(const Scenario& scenario, std::span<const Policy> policies,
                                                const ComparisonOptions& options = {});

[[nodiscard]] PolicySummary summarize(std::string label, Policy policy, const TrainingRun& run,
                                      const PipelineResult& pipeline, double epsilon);

} // namespace velocitune
