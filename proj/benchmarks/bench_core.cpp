// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/config.hpp"
#include "velocitune/sampler.hpp"
#include "velocitune/scaling.hpp"
#include "velocitune/scheduler.hpp"
#include "velocitune/sim.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace velocitune;

namespace {

void BM_SchedulerUpdate(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    std::vector<double> init(k), target(k), current(k);
    for (std::size_t i = 0; i < k; ++i) {
        init[i] = 2.0 + 0.1 * static_cast<double>(i);
        target[i] = 1.0 + 0.05 * static_cast<double>(i);
        current[i] = 0.5 * (init[i] + target[i]);
    }
    SchedulerState s = make_scheduler({}, WeightVector::uniform(k), LossVector(init), LossVector(target), 1);
    const LossVector losses(current);
    std::int64_t step = 0;
    for (auto _ : state) {
        auto r = scheduler_step(std::move(s), ++step, losses);
        s = std::move(r.state);
        benchmark::DoNotOptimize(s.weights);
    }
}
BENCHMARK(BM_SchedulerUpdate)->Arg(5)->Arg(64);

void BM_FitScaling(benchmark::State& state) {
    std::vector<CheckpointPoint> pts;
    for (int i = 1; i <= state.range(0); ++i) {
        const double t = 1e8 * i;
        pts.push_back({t, 1.2 + 8.0 * std::pow(t, -0.25) + 0.002 * std::sin(i)});
    }
    const CheckpointSeries series(pts);
    for (auto _ : state) benchmark::DoNotOptimize(fit_data_scaling(series));
}
BENCHMARK(BM_FitScaling)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_AllocateBatch(benchmark::State& state) {
    const auto mode = state.range(0) == 0 ? AllocationMode::Multinomial : AllocationMode::Proportional;
    const WeightVector w({0.189, 0.5, 0.259, 0.029, 0.023});
    SamplerState s = make_sampler(3, {1 << 20, 1 << 20, 1 << 20, 1 << 20, 1 << 20}, 4096, mode);
    for (auto _ : state) {
        auto a = allocate_batch(w, 244, std::move(s));
        s = std::move(a.state);
        benchmark::DoNotOptimize(a.counts);
    }
}
BENCHMARK(BM_AllocateBatch)->Arg(0)->Arg(1);

void BM_TrainingRun(benchmark::State& state) {
    const Scenario sc = load_config(VELOCITUNE_CONFIG_DIR "/reference.json").scenario();
    const PipelineResult p = prepare_targets(sc);
    for (auto _ : state) benchmark::DoNotOptimize(run_training(sc, {}, p.init_losses, p.target_losses));
}
BENCHMARK(BM_TrainingRun)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
