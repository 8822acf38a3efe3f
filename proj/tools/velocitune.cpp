// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// velocitune fit | proxy | simulate | compare | serve

#include "velocitune/checkpoint.hpp"
#include "velocitune/config.hpp"
#include "velocitune/error.hpp"
#include "velocitune/export.hpp"
#include "velocitune/service.hpp"
#include "velocitune/sim.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace velocitune;
namespace fs = std::filesystem;

namespace {

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    write_file_atomic(path, text);
}

std::string join6(std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_sig6(v[i]);
    return s;
}

RunConfig load_with_overrides(const std::string& path, const std::string& policy, std::optional<std::uint64_t> seed) {
    RunConfig cfg = load_config(path);
    if (!policy.empty()) cfg.policy.kind = parse_policy_kind(policy);
    if (seed) cfg.settings.seed = *seed;
    return cfg;
}

int cmd_fit(const std::string& config_path, const std::string& csv_path, const std::string& out) {
    const RunConfig cfg = load_config(config_path);
    std::ifstream in(csv_path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + csv_path + "'");
    const std::vector<NamedSeries> series = read_checkpoint_csv(in);

    std::vector<FitRecord> records;
    const double total = static_cast<double>(cfg.settings.total_tokens);
    const WeightVector w0 = cfg.initial_weights();
    for (const auto& s : series) {
        const std::size_t i = cfg.domains.index_of(s.domain);
        const double full = cfg.settings.token_axis == TokenAxis::Cumulative ? total : w0[i] * total;
        const ScalingFit fit = fit_data_scaling(s.series, cfg.settings.fit);
        records.push_back({s.domain, fit, full, predict_loss(fit, full)});
    }
    std::ostringstream ss;
    write_fit_report(records, ss);
    write_output(out, ss.str());
    return 0;
}

int cmd_proxy(const RunConfig& cfg, const std::string& out) {
    const Scenario sc = cfg.scenario();
    const auto series = run_proxy_phase(sc);
    std::ostringstream ss;
    write_checkpoint_csv(sc.domains.names(), series, ss);
    write_output(out, ss.str());
    return 0;
}

struct SimulateArgs {
    std::string out;
    std::string resume;
    std::string save_checkpoint;
    std::int64_t stop_at = 0;
    double epsilon = 0.01;
};

int cmd_simulate(const RunConfig& cfg, const SimulateArgs& args) {
    const Scenario sc = cfg.scenario();
    const PipelineResult pipe = prepare_targets(sc);

    std::optional<TrainingRun> run;
    if (!args.resume.empty()) {
        const CheckpointBundle b = load_checkpoint(args.resume);
        if (b.domains != sc.domains.names()) throw Error(ErrorKind::Validation, "checkpoint domains differ from config");
        run.emplace(sc, snapshot_from_bundle(b));
    } else {
        run.emplace(sc, cfg.policy, pipe.init_losses, pipe.target_losses);
    }

    if (!args.save_checkpoint.empty()) {
        run->run_until(args.stop_at > 0 ? args.stop_at : run->trajectory().total_steps);
        save_checkpoint(bundle_from_snapshot(run->snapshot()), args.save_checkpoint);
        std::cerr << "checkpoint step=" << run->current_step() << " path=" << args.save_checkpoint << '\n';
        if (args.out.empty()) return 0;
    } else {
        run->run_to_end();
    }
    if (!run->done()) {
        // A stopped run exports what it has; the remainder comes from --resume.
        write_output(args.out, trajectory_csv(run->trajectory()));
        return 0;
    }
    write_output(args.out, trajectory_csv(run->trajectory()));

    const PolicySummary s = summarize(std::string(to_string(cfg.policy.kind)), cfg.policy, *run, pipe, args.epsilon);
    std::ostream& log = (args.out.empty() || args.out == "-") ? std::cerr : std::cout;
    log << "policy=" << s.label << " steps=" << s.trajectory.total_steps
        << " updates=" << s.trajectory.rows.size() - 1 << '\n'
        << "final_weights=" << join6(s.trajectory.rows.back().weights.values()) << '\n'
        << "averaged_weights=" << join6(s.averaged_weights.values()) << '\n'
        << "final_losses=" << join6(s.final_losses.values()) << '\n'
        << "target_losses=" << join6(pipe.target_losses.values()) << '\n'
        << "velocity_spread=" << format_sig6(s.velocity_spread)
        << " max_gap_to_target=" << format_sig6(s.max_gap_to_target) << " stabilization_step="
        << (s.stabilization ? std::to_string(*s.stabilization) : std::string("none")) << '\n';
    return 0;
}

int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& names, bool reweighted, double epsilon,
                const std::string& out, const std::string& traj_dir) {
    const Scenario sc = cfg.scenario();
    std::vector<Policy> policies;
    for (const auto& n : names) policies.push_back(Policy{parse_policy_kind(n), cfg.policy.smoothing});
    const ComparisonReport rep = compare_policies(sc, policies, {epsilon, reweighted});
    std::ostringstream ss;
    write_comparison_report(rep, sc.domains.names(), ss);
    write_output(out, ss.str());
    if (!traj_dir.empty()) {
        fs::create_directories(traj_dir);
        for (const auto& s : rep.summaries) {
            write_file_atomic(fs::path(traj_dir) / (s.label + ".csv"), trajectory_csv(s.trajectory));
        }
    }
    return 0;
}

int cmd_serve(const std::string& transport, const std::string& resume) {
    SidecarSession session = resume.empty() ? SidecarSession() : SidecarSession(load_checkpoint(resume));
    if (transport == "stdio") {
        serve_stream(session, std::cin, std::cout);
        return 0;
    }
    if (transport.rfind("unix:", 0) == 0) {
        serve_unix_socket(session, transport.substr(5));
        return 0;
    }
    throw Error(ErrorKind::Validation, "unknown transport '" + transport + "' (expected stdio or unix:<path>)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Velocity-guided domain-weight scheduling for multi-domain continual pre-training"};
    app.require_subcommand(1);

    std::string config, policy, out, csv, transport = "stdio", resume, traj_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> policies = {"velocitune", "dbl", "static"};
    bool reweighted = false;
    SimulateArgs sim_args;
    double epsilon = 0.01;

    auto* fit = app.add_subcommand("fit", "Fit per-domain scaling laws to checkpoint losses and predict targets");
    fit->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    fit->add_option("--checkpoints", csv, "CSV with header domain,tokens,loss")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", out, "Report path (default stdout)");

    auto* proxy = app.add_subcommand("proxy", "Simulate the static proxy run and write its checkpoint CSV");
    proxy->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    proxy->add_option("--seed", seed, "Override config seed");
    proxy->add_option("--out", out, "CSV path (default stdout)");

    auto* simulate = app.add_subcommand("simulate", "Run the full pipeline in the simulator and export the trajectory");
    simulate->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    simulate->add_option("--policy", policy, "velocitune | dbl | no_target | static");
    simulate->add_option("--seed", seed, "Override config seed");
    simulate->add_option("--out", sim_args.out, "Trajectory CSV path (default stdout)");
    simulate->add_option("--resume", sim_args.resume, "Continue from a run checkpoint")->check(CLI::ExistingFile);
    simulate->add_option("--save-checkpoint", sim_args.save_checkpoint, "Write a run checkpoint at --stop-at");
    simulate->add_option("--stop-at", sim_args.stop_at, "Step at which to checkpoint and stop");
    simulate->add_option("--epsilon", sim_args.epsilon, "Stabilization tolerance (max-norm)");

    auto* compare = app.add_subcommand("compare", "Run several policies on the same scenario and report");
    compare->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    compare->add_option("--policies", policies, "Policies to compare")->delimiter(',');
    compare->add_option("--seed", seed, "Override config seed");
    compare->add_flag("--with-reweighted", reweighted, "Replay velocitune's time-averaged weights as a static mix");
    compare->add_option("--epsilon", epsilon, "Stabilization tolerance (max-norm)");
    compare->add_option("--out", out, "Report path (default stdout)");
    compare->add_option("--trajectories", traj_dir, "Directory for per-policy trajectory CSVs");

    auto* serve = app.add_subcommand("serve", "Run the scheduler as a line-delimited JSON sidecar");
    serve->add_option("--config", config, "Unused by the protocol; accepted for symmetry");
    serve->add_option("--transport", transport, "stdio or unix:<socket path>");
    serve->add_option("--resume", resume, "Continue a session checkpoint")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) return cmd_fit(config, csv, out);
        if (*proxy) return cmd_proxy(load_with_overrides(config, "", seed), out);
        if (*simulate) return cmd_simulate(load_with_overrides(config, policy, seed), sim_args);
        if (*compare) return cmd_compare(load_with_overrides(config, "", seed), policies, reweighted, epsilon, out, traj_dir);
        if (*serve) return cmd_serve(transport, resume);
    } catch (const velocitune::FitError& e) {
        std::cerr << "error: " << e.what() << " (best residual " << format_sig6(e.best_residual()) << ")\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
