// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/error.hpp"
#include "velocitune/scaling.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace velocitune;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

CheckpointSeries law_series(double E, double B, double beta, const std::vector<double>& tokens) {
    std::vector<CheckpointPoint> pts;
    for (double t : tokens) pts.push_back({t, oracle::power_law(E, B, beta, t)});
    return CheckpointSeries(std::move(pts));
}

std::vector<double> doubling_grid() { return {1e8, 2e8, 4e8, 8e8, 1.6e9, 3.2e9}; }

std::vector<double> linear_grid(int n, double step) {
    std::vector<double> t;
    for (int i = 1; i <= n; ++i) t.push_back(step * i);
    return t;
}

CheckpointSeries noisy_series(double E, double B, double beta, const std::vector<double>& tokens, double sigma,
                              std::mt19937_64& gen) {
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<CheckpointPoint> pts;
    for (double t : tokens) pts.push_back({t, oracle::power_law(E, B, beta, t) + noise(gen)});
    return CheckpointSeries(std::move(pts));
}

CheckpointSeries head(const CheckpointSeries& s, std::size_t n) {
    return CheckpointSeries({s.points().begin(), s.points().begin() + static_cast<std::ptrdiff_t>(n)});
}

} // namespace

TEST_CASE("CheckpointSeries validation", "[scaling]") {
    auto kind = [](std::vector<CheckpointPoint> pts) {
        try {
            CheckpointSeries s(std::move(pts));
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Io;
    };
    CHECK(kind({{1, 2}, {2, 1.5}, {3, 1.2}}) == ErrorKind::InsufficientData);
    CHECK(kind({{1, 2}, {2, 1.5}, {2, 1.2}, {4, 1.1}}) == ErrorKind::Validation);
    CHECK(kind({{0, 2}, {2, 1.5}, {3, 1.2}, {4, 1.1}}) == ErrorKind::Validation);
    CHECK(kind({{1, 2}, {2, NAN}, {3, 1.2}, {4, 1.1}}) == ErrorKind::InvalidLoss);
}

TEST_CASE("noiseless series recovers the generating law", "[scaling]") {
    const ScalingFit fit = fit_data_scaling(law_series(1.5, 10.0, 0.3, doubling_grid()));
    CHECK_THAT(fit.E, WithinRel(1.5, 1e-4));
    CHECK_THAT(fit.B, WithinRel(10.0, 1e-4));
    CHECK_THAT(fit.beta, WithinRel(0.3, 1e-4));
    CHECK(fit.fit_rmse < 1e-9);

    const double full = 3.2e10;
    const double predicted = predict_loss(fit, full);
    CHECK_THAT(predicted, WithinRel(oracle::power_law(1.5, 10.0, 0.3, full), 1e-4));
}

TEST_CASE("fit is deterministic", "[scaling]") {
    std::mt19937_64 gen(5);
    const auto s = noisy_series(1.2, 8.0, 0.25, linear_grid(20, 1e8), 0.01, gen);
    const ScalingFit a = fit_data_scaling(s);
    const ScalingFit b = fit_data_scaling(s);
    CHECK(a.E == b.E);
    CHECK(a.B == b.B);
    CHECK(a.beta == b.beta);
    CHECK(a.fit_rmse == b.fit_rmse);
}

TEST_CASE("flat and rising series are fit failures", "[scaling]") {
    std::vector<CheckpointPoint> flat;
    for (double t : doubling_grid()) flat.push_back({t, 2.0});
    try {
        (void)fit_data_scaling(CheckpointSeries(flat));
        FAIL("flat series should not fit");
    } catch (const FitError& e) {
        CHECK(e.kind() == ErrorKind::FitFailure);
        CHECK(std::isfinite(e.best_residual()));
        CHECK(e.best_residual() >= 0.0);
    }

    std::vector<CheckpointPoint> rising;
    double l = 1.0;
    for (double t : doubling_grid()) rising.push_back({t, l += 0.1});
    CHECK_THROWS_AS(fit_data_scaling(CheckpointSeries(rising)), FitError);
}

TEST_CASE("predict_loss closed form", "[scaling]") {
    CHECK_THAT(predict_loss({1.5, 10.0, 0.3, 0.0}, 1e300), WithinAbs(1.5, 1e-12));
    CHECK(predict_loss({0.0, 1.0, 1.0, 0.0}, 4.0) == 0.25);
    CHECK_THAT(predict_loss({1.2, 8.0, 0.25, 0.0}, 1e9), WithinAbs(1.24499, 5e-6));
    CHECK_THAT(predict_loss({1.2, 8.0, 0.25, 0.0}, 1e9), WithinAbs(oracle::power_law(1.2, 8.0, 0.25, 1e9), 1e-15));
    try {
        (void)predict_loss({1.0, 1.0, 0.5, 0.0}, 0.0);
        FAIL("zero tokens should be rejected");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DomainError);
    }
    CHECK_THROWS_AS(predict_loss({1.0, 1.0, 0.5, 0.0}, -5.0), Error);
}

TEST_CASE("predict_targets aligns with fits", "[scaling]") {
    const ScalingFit f{1.0, 5.0, 0.4, 0.0};
    const std::vector<ScalingFit> fits{f, f};
    const std::vector<double> full{1e10, 1e10};
    const LossVector t = predict_targets(fits, full);
    CHECK(t[0] == t[1]);
    CHECK(t[0] == predict_loss(f, 1e10));

    const std::vector<double> short_tokens{1e10};
    CHECK_THROWS_AS(predict_targets(fits, short_tokens), Error);
}

TEST_CASE("predictions decrease and stay above the floor", "[scaling][property]") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100000; ++trial) {
        const ScalingFit f{3.0 * u(gen), std::pow(10.0, 4.0 * u(gen) - 1.0), 0.01 + 1.99 * u(gen), 0.0};
        const double t1 = std::pow(10.0, 1.0 + 10.0 * u(gen));
        const double t2 = t1 * (1.0 + 10.0 * u(gen) + 1e-6);
        const double l1 = predict_loss(f, t1);
        const double l2 = predict_loss(f, t2);
        REQUIRE(l2 <= l1);
        REQUIRE(l2 >= f.E);
        // Strict decrease and a strict floor hold while the reducible part is representable.
        if (f.B * std::pow(t2, -f.beta) > 1e-12 * f.E + 1e-300) {
            REQUIRE(l2 < l1);
            REQUIRE(l2 > f.E);
        }
    }
}

TEST_CASE("refitting on a fit's own predictions round-trips", "[scaling][property]") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const double E = 0.3 + 1.5 * u(gen);
        const double beta = 0.1 + 0.5 * u(gen);
        // Keep the reducible part between 5% and 100% of E over the sampled range.
        const double reducible = E * (0.05 + 0.95 * u(gen));
        const double B = reducible * std::pow(1e8, beta);
        const ScalingFit truth{E, B, beta, 0.0};
        std::vector<CheckpointPoint> pts;
        for (double t : linear_grid(12, 2e8)) pts.push_back({t, predict_loss(truth, t)});
        const ScalingFit f = fit_data_scaling(CheckpointSeries(pts));
        INFO("E=" << E << " B=" << B << " beta=" << beta);
        CHECK_THAT(f.E, WithinRel(E, 1e-6));
        CHECK_THAT(f.beta, WithinRel(beta, 1e-6));
        CHECK_THAT(f.B, WithinRel(B, 1e-6));
    }
}

TEST_CASE("half-data extrapolation error at the proxy cadence", "[scaling][montecarlo]") {
    // 100 checkpoints, fit on the first 50, predict at the last.
    const std::vector<double> grid = linear_grid(100, 1e8);
    double total = 0.0;
    const int seeds = 40;
    for (int seed = 0; seed < seeds; ++seed) {
        std::mt19937_64 gen(1000 + static_cast<std::uint64_t>(seed));
        const auto full = noisy_series(1.2, 8.0, 0.25, grid, 0.01, gen);
        const ScalingFit f = fit_data_scaling(head(full, 50));
        total += std::abs(predict_loss(f, grid.back()) - oracle::power_law(1.2, 8.0, 0.25, grid.back()));
    }
    CHECK(total / seeds <= 5e-3);
}

TEST_CASE("a single outlier moves the extrapolation only mildly", "[scaling][property]") {
    const std::vector<double> grid = linear_grid(20, 1e8);
    const double full = 2e10;
    const double truth = oracle::power_law(1.2, 8.0, 0.25, full);
    double clean_err = 0.0;
    double outlier_err = 0.0;
    for (int seed = 0; seed < 30; ++seed) {
        std::mt19937_64 gen(77 + static_cast<std::uint64_t>(seed));
        const auto s = noisy_series(1.2, 8.0, 0.25, grid, 0.01, gen);
        clean_err += std::abs(predict_loss(fit_data_scaling(s), full) - truth);

        std::vector<CheckpointPoint> pts = s.points();
        pts[static_cast<std::size_t>(seed) % pts.size()].loss += 0.5;
        outlier_err += std::abs(predict_loss(fit_data_scaling(CheckpointSeries(pts)), full) - truth);
    }
    CHECK(outlier_err < 3.0 * clean_err);
}
