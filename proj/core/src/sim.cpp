// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/sim.hpp"
#include "velocitune/error.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

namespace velocitune {

namespace {

// Stream ids keep the proxy and main runs on independent random sequences.
constexpr std::uint64_t kMainNoiseStream = 11;
constexpr std::uint64_t kProxyNoiseStream = 21;
constexpr std::uint64_t kProxySamplerSalt = 0x70726F7879ULL;

void fail(const std::string& msg) { throw Error(ErrorKind::Validation, msg); }

} // namespace

void DynamicsParams::validate() const {
    const std::size_t k = domains.size();
    if (k == 0) fail("dynamics: no domains");
    for (std::size_t i = 0; i < k; ++i) {
        const auto& d = domains[i];
        const std::string at = "dynamics domain " + std::to_string(i) + ": ";
        if (!(std::isfinite(d.E) && d.E >= 0.0)) fail(at + "E must be >= 0");
        if (!(std::isfinite(d.B) && d.B > 0.0)) fail(at + "B must be > 0");
        if (!(d.beta > 0.0 && d.beta <= 2.0)) fail(at + "beta must lie in (0, 2]");
        if (!(std::isfinite(d.D0) && d.D0 >= 0.0)) fail(at + "D0 must be >= 0");
    }
    if (transfer.size() != k) fail("dynamics: transfer must be k x k");
    for (std::size_t i = 0; i < k; ++i) {
        if (transfer[i].size() != k) fail("dynamics: transfer must be k x k");
        for (std::size_t j = 0; j < k; ++j) {
            const double t = transfer[i][j];
            if (!(t >= 0.0 && t <= 1.0)) fail("dynamics: transfer entries must lie in [0, 1]");
        }
        if (transfer[i][i] != 1.0) fail("dynamics: transfer diagonal must be 1");
    }
    if (!(std::isfinite(noise_sigma) && noise_sigma >= 0.0)) fail("dynamics: noise_sigma must be >= 0");
}

std::vector<std::vector<double>> DynamicsParams::identity_transfer(std::size_t k) {
    std::vector<std::vector<double>> t(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) t[i][i] = 1.0;
    return t;
}

SimState make_sim_state(std::size_t k, std::uint64_t seed, std::uint64_t stream) {
    return SimState{std::vector<std::uint64_t>(k, 0), 0, CounterRng(seed, stream)};
}

LossVector sim_eval(const DynamicsParams& params, const SimState& state) {
    const std::size_t k = params.size();
    if (state.consumed.size() != k) fail("sim state does not match dynamics");
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        double effective = params.domains[i].D0;
        for (std::size_t j = 0; j < k; ++j) effective += params.transfer[i][j] * static_cast<double>(state.consumed[j]);
        const auto& d = params.domains[i];
        // D0 = 0 at the origin gives an infinite first loss, which LossVector rejects.
        out[i] = d.E + d.B * std::pow(effective, -d.beta);
    }
    return LossVector(std::move(out));
}

LossVector sim_eval_noisy(const DynamicsParams& params, SimState& state) {
    std::vector<double> v = sim_eval(params, state).vec();
    if (params.noise_sigma > 0.0) {
        for (double& x : v) x = std::max(0.0, x + params.noise_sigma * state.noise_rng.normal());
    }
    return LossVector(std::move(v));
}

SimState sim_train_step(const DynamicsParams& params, SimState state, std::span<const std::int64_t> allocation) {
    if (allocation.size() != params.size() || state.consumed.size() != params.size()) {
        fail("allocation length does not match dynamics");
    }
    for (std::int64_t a : allocation) {
        if (a < 0) throw Error(ErrorKind::DomainError, "negative token allocation");
    }
    for (std::size_t i = 0; i < allocation.size(); ++i) state.consumed[i] += static_cast<std::uint64_t>(allocation[i]);
    ++state.step;
    return state;
}

std::uint64_t RunSettings::slots_per_batch() const {
    return velocitune::slots_per_batch(batch_tokens, sequence_tokens);
}

std::int64_t RunSettings::total_steps(std::uint64_t total) const {
    const std::uint64_t per = tokens_per_batch();
    return static_cast<std::int64_t>((total + per - 1) / per);
}

WeightVector Scenario::initial_weights() const {
    if (settings.initial_weights.empty()) return default_weights(domains);
    return WeightVector(settings.initial_weights);
}

void Scenario::validate() const {
    dynamics.validate();
    if (dynamics.size() != domains.size()) fail("dynamics and domain list differ in length");
    if (settings.update_interval < 1) fail("update interval must be >= 1");
    if (!(settings.proxy_fraction > 0.0 && settings.proxy_fraction <= 1.0)) fail("proxy_fraction must lie in (0, 1]");
    if (settings.total_tokens == 0) fail("total_tokens must be positive");
    if (!settings.initial_weights.empty() && settings.initial_weights.size() != domains.size()) {
        fail("initial_weights length does not match domains");
    }
    (void)settings.slots_per_batch();
    (void)initial_weights();
}

namespace {

std::vector<std::uint64_t> sequences_per_domain(const Scenario& s) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t t : s.domains.token_counts()) out.push_back(std::max<std::uint64_t>(1, t / s.settings.sequence_tokens));
    return out;
}

std::vector<std::int64_t> to_tokens(const std::vector<std::uint64_t>& counts, std::uint64_t seq) {
    std::vector<std::int64_t> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<std::int64_t>(counts[i] * seq);
    return out;
}

} // namespace

std::vector<CheckpointSeries> run_proxy_phase(const Scenario& scenario) {
    scenario.validate();
    const auto& cfg = scenario.settings;
    const std::size_t k = scenario.domains.size();
    const WeightVector w = scenario.initial_weights();
    const auto budget = static_cast<std::uint64_t>(std::llround(cfg.proxy_fraction * static_cast<double>(cfg.total_tokens)));
    const std::int64_t steps = cfg.total_steps(budget);
    const std::uint64_t slots = cfg.slots_per_batch();

    SamplerState sampler = make_sampler(cfg.seed ^ kProxySamplerSalt, sequences_per_domain(scenario),
                                        cfg.sequence_tokens, cfg.sampling);
    SimState sim = make_sim_state(k, cfg.seed, kProxyNoiseStream);
    std::vector<std::vector<CheckpointPoint>> points(k);

    for (std::int64_t t = 1; t <= steps; ++t) {
        Allocation a = allocate_batch(w, slots, std::move(sampler));
        sampler = std::move(a.state);
        sim = sim_train_step(scenario.dynamics, std::move(sim), to_tokens(a.counts, cfg.sequence_tokens));
        if (t % cfg.update_interval == 0 || t == steps) {
            const LossVector l = sim_eval_noisy(scenario.dynamics, sim);
            double total = 0.0;
            for (auto c : sim.consumed) total += static_cast<double>(c);
            for (std::size_t i = 0; i < k; ++i) {
                const double x = cfg.token_axis == TokenAxis::Cumulative ? total : static_cast<double>(sim.consumed[i]);
                // Per-domain axes can stall for rarely sampled domains.
                if (!points[i].empty() && !(x > points[i].back().tokens)) continue;
                points[i].push_back({x, l[i]});
            }
        }
    }
    std::vector<CheckpointSeries> out;
    out.reserve(k);
    for (auto& p : points) out.emplace_back(std::move(p));
    return out;
}

PipelineResult prepare_targets(const Scenario& scenario) {
    scenario.validate();
    const std::size_t k = scenario.domains.size();
    LossVector init = sim_eval(scenario.dynamics, make_sim_state(k, scenario.settings.seed, kMainNoiseStream));
    std::vector<CheckpointSeries> series = run_proxy_phase(scenario);

    std::vector<std::future<ScalingFit>> jobs;
    for (const auto& s : series) {
        jobs.push_back(std::async(std::launch::async,
                                  [&s, &opts = scenario.settings.fit] { return fit_data_scaling(s, opts); }));
    }
    std::vector<ScalingFit> fits;
    for (auto& j : jobs) fits.push_back(j.get());

    const WeightVector w = scenario.initial_weights();
    const auto total = static_cast<double>(scenario.settings.total_tokens);
    std::vector<double> full(k);
    for (std::size_t i = 0; i < k; ++i) {
        full[i] = scenario.settings.token_axis == TokenAxis::Cumulative ? total : w[i] * total;
    }
    LossVector targets = predict_targets(fits, full);
    return {std::move(init), std::move(series), std::move(fits), std::move(full), std::move(targets)};
}

std::vector<std::uint64_t> Trajectory::total_alloc_tokens() const {
    std::vector<std::uint64_t> out(domains.size(), 0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += r.alloc_tokens[i];
    return out;
}

namespace {

RunSnapshot initial_snapshot(const Scenario& sc, Policy policy, const LossVector& init_losses,
                             const std::optional<LossVector>& target_losses) {
    const auto& cfg = sc.settings;
    const std::size_t k = sc.domains.size();
    if (policy.smoothing == 0.0) policy.smoothing = cfg.smoothing;
    std::optional<LossVector> targets;
    if (needs_targets(policy.kind)) targets = target_losses;
    SchedulerState sched = make_scheduler(policy, sc.initial_weights(), init_losses, targets, cfg.update_interval);
    Trajectory traj{sc.domains.names(), policy.kind, cfg.total_steps(cfg.total_tokens), {}};
    traj.rows.push_back(TrajectoryRow{0, sched.weights, init_losses, std::nullopt, std::vector<std::uint64_t>(k, 0)});
    return RunSnapshot{std::move(sched),
                       make_sampler(cfg.seed, sequences_per_domain(sc), cfg.sequence_tokens, cfg.sampling),
                       make_sim_state(k, cfg.seed, kMainNoiseStream), std::move(traj), 0};
}

} // namespace

TrainingRun::TrainingRun(const Scenario& scenario, Policy policy, const LossVector& init_losses,
                         const std::optional<LossVector>& target_losses)
    : mScenario(scenario), mSlots(scenario.settings.slots_per_batch()),
      mSnap((mScenario.validate(), initial_snapshot(mScenario, policy, init_losses, target_losses))) {}

TrainingRun::TrainingRun(const Scenario& scenario, RunSnapshot snapshot)
    : mScenario(scenario), mSlots(0), mSnap(std::move(snapshot)) {
    mScenario.validate();
    mSlots = mScenario.settings.slots_per_batch();
    const std::size_t k = mScenario.domains.size();
    if (mSnap.sim.consumed.size() != k || mSnap.sampler.cursors.size() != k || mSnap.scheduler.weights.size() != k ||
        mSnap.trajectory.domains != mScenario.domains.names() || mSnap.trajectory.rows.empty()) {
        fail("snapshot does not match the scenario");
    }
    if (mSnap.trajectory.total_steps != mScenario.settings.total_steps(mScenario.settings.total_tokens)) {
        fail("snapshot was taken with a different token budget");
    }
}

void TrainingRun::step() {
    if (done()) return;
    const std::int64_t t = mSnap.step + 1;
    std::optional<LossVector> losses;
    if (is_update_step(mSnap.scheduler, t)) losses = sim_eval_noisy(mScenario.dynamics, mSnap.sim);
    SchedulerStepResult r = scheduler_step(std::move(mSnap.scheduler), t, losses);
    mSnap.scheduler = std::move(r.state);
    if (losses) {
        std::optional<VelocityVector> v;
        if (mSnap.scheduler.policy.kind == PolicyKind::Velocitune) v = mSnap.scheduler.last_velocity;
        mSnap.trajectory.rows.push_back(TrajectoryRow{t, r.weights, std::move(*losses), std::move(v),
                                                      std::vector<std::uint64_t>(r.weights.size(), 0)});
    }
    Allocation a = allocate_batch(r.weights, mSlots, std::move(mSnap.sampler));
    mSnap.sampler = std::move(a.state);
    const auto tokens = to_tokens(a.counts, mScenario.settings.sequence_tokens);
    mSnap.sim = sim_train_step(mScenario.dynamics, std::move(mSnap.sim), tokens);
    auto& alloc = mSnap.trajectory.rows.back().alloc_tokens;
    for (std::size_t i = 0; i < alloc.size(); ++i) alloc[i] += static_cast<std::uint64_t>(tokens[i]);
    mSnap.step = t;
}

void TrainingRun::run_until(std::int64_t step) {
    while (!done() && mSnap.step < step) this->step();
}

TrainingRun& TrainingRun::run_to_end() {
    while (!done()) step();
    return *this;
}

LossVector TrainingRun::current_losses() const { return sim_eval(mScenario.dynamics, mSnap.sim); }

Trajectory run_training(const Scenario& scenario, Policy policy, const LossVector& init_losses,
                        const std::optional<LossVector>& target_losses) {
    TrainingRun run(scenario, policy, init_losses, target_losses);
    run.run_to_end();
    return run.trajectory();
}

std::optional<std::int64_t> stabilization_step(const Trajectory& traj, double epsilon) {
    if (traj.rows.empty()) throw Error(ErrorKind::Validation, "empty trajectory");
    if (!(epsilon > 0.0)) throw Error(ErrorKind::Validation, "epsilon must be positive");
    const WeightVector& last = traj.rows.back().weights;
    std::size_t first_stable = traj.rows.size() - 1;
    for (std::size_t r = traj.rows.size(); r-- > 0;) {
        double dist = 0.0;
        for (std::size_t i = 0; i < last.size(); ++i) dist = std::max(dist, std::abs(traj.rows[r].weights[i] - last[i]));
        if (!(dist < epsilon)) break;
        first_stable = r;
    }
    if (traj.rows.size() > 1 && first_stable == traj.rows.size() - 1) return std::nullopt;
    return traj.rows[first_stable].step;
}

WeightVector time_averaged_weights(const Trajectory& traj) {
    if (traj.rows.empty()) throw Error(ErrorKind::Validation, "empty trajectory");
    const std::size_t k = traj.rows.front().weights.size();
    std::vector<double> acc(k, 0.0);
    for (std::size_t r = 0; r < traj.rows.size(); ++r) {
        const std::int64_t begin = std::max<std::int64_t>(traj.rows[r].step, 1);
        const std::int64_t end = r + 1 < traj.rows.size() ? traj.rows[r + 1].step : traj.total_steps + 1;
        const auto span = static_cast<double>(std::max<std::int64_t>(end - begin, 0));
        for (std::size_t i = 0; i < k; ++i) acc[i] += span * traj.rows[r].weights[i];
    }
    return normalize(acc);
}

PolicySummary summarize(std::string label, Policy policy, const TrainingRun& run, const PipelineResult& pipeline,
                        double epsilon) {
    PolicySummary s{std::move(label), policy, run.trajectory(), run.current_losses(),
                    VelocityVector({}), 0.0, 0.0, std::nullopt, WeightVector::uniform(1)};
    std::vector<bool> converged(pipeline.init_losses.size());
    for (std::size_t i = 0; i < converged.size(); ++i) {
        converged[i] = !(pipeline.target_losses[i] < pipeline.init_losses[i]);
    }
    s.final_velocity = compute_velocity(s.final_losses, pipeline.init_losses, pipeline.target_losses, converged);
    s.velocity_spread = s.final_velocity.spread();
    double gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.final_losses.size(); ++i) gap = std::max(gap, s.final_losses[i] - pipeline.target_losses[i]);
    s.max_gap_to_target = gap;
    s.stabilization = stabilization_step(s.trajectory, epsilon);
    s.averaged_weights = time_averaged_weights(s.trajectory);
    return s;
}

ComparisonReport compare_policies(const Scenario& scenario, std::span<const Policy> policies,
                                  const ComparisonOptions& options) {
    ComparisonReport report{prepare_targets(scenario), options.stabilization_epsilon, {}};
    const PipelineResult& pipe = report.pipeline;

    auto run_one = [&](std::string label, Policy policy, const Scenario& sc) {
        TrainingRun run(sc, policy, pipe.init_losses, pipe.target_losses);
        run.run_to_end();
        return summarize(std::move(label), policy, run, pipe, options.stabilization_epsilon);
    };

    std::vector<std::future<PolicySummary>> jobs;
    for (const Policy& p : policies) {
        jobs.push_back(std::async(std::launch::async, run_one, std::string(to_string(p.kind)), p, std::cref(scenario)));
    }
    for (auto& j : jobs) report.summaries.push_back(j.get());

    if (options.with_reweighted) {
        auto it = std::find_if(report.summaries.begin(), report.summaries.end(),
                               [](const PolicySummary& s) { return s.policy.kind == PolicyKind::Velocitune; });
        if (it == report.summaries.end()) {
            throw Error(ErrorKind::Validation, "reweighted replay needs a velocitune run in the comparison");
        }
        Scenario replay = scenario;
        replay.settings.initial_weights = it->averaged_weights.vec();
        report.summaries.push_back(run_one("reweighted", Policy{PolicyKind::Static, 0.0}, replay));
    }
    return report;
}

} // namespace velocitune
