// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fixed-model-size data scaling law L(D) = E + B * D^-beta, fitted to proxy
// checkpoints and used to extrapolate per-domain target losses.

#pragma once

#include "velocitune/domain.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace velocitune {

struct CheckpointPoint {
    double tokens = 0.0;
    double loss = 0.0;
};

/// One domain's proxy-run learning curve. Needs at least four points with
/// strictly increasing positive token counts and finite losses.
class CheckpointSeries {
public:
    static constexpr std::size_t kMinPoints = 4;

    explicit CheckpointSeries(std::vector<CheckpointPoint> points);

    [[nodiscard]] const std::vector<CheckpointPoint>& points() const noexcept { return mPoints; }
    [[nodiscard]] std::size_t size() const noexcept { return mPoints.size(); }
    [[nodiscard]] double min_loss() const noexcept;

private:
    std::vector<CheckpointPoint> mPoints;
};

struct ScalingFit {
    double E = 0.0;     ///< irreducible loss, nats/token
    double B = 1.0;     ///< nats * tokens^beta
    double beta = 0.5;
    double fit_rmse = 0.0; ///< residual RMSE in loss units
};

struct FitOptions {
    double huber_delta = 1e-3;
    std::vector<double> beta_starts = default_beta_starts();
    /// Start points for E as fractions of the minimum observed loss.
    std::vector<double> floor_start_fractions = {0.0, 0.5, 0.9};
    double beta_max = 2.0;
    int max_iterations = 2000;
    double gradient_tolerance = 1e-15;

    static std::vector<double> default_beta_starts();
};

/// Multi-start quasi-Newton fit of a Huber loss on log residuals.
/// Throws InsufficientData for short series, FitError when no start yields a
/// decreasing curve (flat or rising data).
[[nodiscard]] ScalingFit fit_data_scaling(const CheckpointSeries& series, const FitOptions& options = {});

/// E + B * tokens^-beta; throws DomainError for non-positive tokens.
[[nodiscard]] double predict_loss(const ScalingFit& fit, double tokens);

[[nodiscard]] LossVector predict_targets(std::span<const ScalingFit> fits, std::span<const double> full_tokens);

} // namespace velocitune
