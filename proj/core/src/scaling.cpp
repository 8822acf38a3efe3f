// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/scaling.hpp"
#include "velocitune/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace velocitune {

CheckpointSeries::CheckpointSeries(std::vector<CheckpointPoint> points) : mPoints(std::move(points)) {
    if (mPoints.size() < kMinPoints) {
        throw Error(ErrorKind::InsufficientData, "scaling fit needs at least " + std::to_string(kMinPoints) +
                                                     " checkpoints, got " + std::to_string(mPoints.size()));
    }
    double prev = 0.0;
    for (const auto& p : mPoints) {
        if (!std::isfinite(p.tokens) || !(p.tokens > prev)) {
            throw Error(ErrorKind::Validation, "checkpoint tokens must be positive and strictly increasing");
        }
        // Log-space residuals need strictly positive losses.
        if (!std::isfinite(p.loss) || !(p.loss > 0.0)) {
            throw Error(ErrorKind::InvalidLoss, "checkpoint losses must be finite and positive");
        }
        prev = p.tokens;
    }
}

double CheckpointSeries::min_loss() const noexcept {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : mPoints) m = std::min(m, p.loss);
    return m;
}

std::vector<double> FitOptions::default_beta_starts() {
    std::vector<double> b;
    for (int i = 1; i <= 20; ++i) b.push_back(0.05 * i);
    return b;
}

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

double huber(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_grad(double r, double delta) {
    if (r > delta) return delta;
    if (r < -delta) return -delta;
    return r;
}

// Token axis is rescaled by its geometric mean so that B and beta are well
// conditioned; parameters are mapped through sigmoid/exp to honor the bounds.
class Objective {
public:
    Objective(const CheckpointSeries& series, const FitOptions& options)
        : mDelta(options.huber_delta), mBetaMax(options.beta_max), mFloorMax(series.min_loss()) {
        double log_sum = 0.0;
        for (const auto& p : series.points()) log_sum += std::log(p.tokens);
        mLogRef = log_sum / static_cast<double>(series.size());
        for (const auto& p : series.points()) {
            mLogX.push_back(std::log(p.tokens) - mLogRef);
            mLogY.push_back(std::log(p.loss));
            mY.push_back(p.loss);
        }
    }

    struct Params {
        double E, scale, beta;
    };

    [[nodiscard]] Params decode(const Vec3& z) const {
        return {mFloorMax * sigmoid(z[0]), std::exp(z[1]), mBetaMax * sigmoid(z[2])};
    }

    [[nodiscard]] Vec3 encode(double E, double scale, double beta) const {
        const double ef = std::clamp(E / mFloorMax, 1e-3, 1.0 - 1e-3);
        const double bf = std::clamp(beta / mBetaMax, 1e-6, 1.0 - 1e-6);
        return {logit(ef), std::log(scale), logit(bf)};
    }

    [[nodiscard]] double value(const Vec3& z, Vec3* grad) const {
        const Params p = decode(z);
        double f = 0.0;
        Vec3 g{0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < mY.size(); ++k) {
            const double pw = std::exp(-p.beta * mLogX[k]);
            const double pred = p.E + p.scale * pw;
            const double r = std::log(pred) - mLogY[k];
            f += huber(r, mDelta);
            if (grad) {
                const double h = huber_grad(r, mDelta) / pred;
                g[0] += h;
                g[1] += h * pw;
                g[2] += -h * p.scale * pw * mLogX[k];
            }
        }
        if (grad) {
            const double su = sigmoid(z[0]);
            const double sv = sigmoid(z[2]);
            (*grad)[0] = g[0] * mFloorMax * su * (1.0 - su);
            (*grad)[1] = g[1] * p.scale;
            (*grad)[2] = g[2] * mBetaMax * sv * (1.0 - sv);
        }
        return f;
    }

    [[nodiscard]] double initial_scale(double E, double beta) const {
        double num = 0.0, den = 0.0, mean = 0.0;
        for (std::size_t k = 0; k < mY.size(); ++k) {
            const double pw = std::exp(-beta * mLogX[k]);
            num += pw * (mY[k] - E);
            den += pw * pw;
            mean += mY[k] - E;
        }
        const double ls = num / den;
        if (ls > 0.0) return ls;
        return std::max(mean / static_cast<double>(mY.size()), 1e-6 * mFloorMax);
    }

    [[nodiscard]] ScalingFit to_fit(const Vec3& z) const {
        const Params p = decode(z);
        double sse = 0.0;
        for (std::size_t k = 0; k < mY.size(); ++k) {
            const double pred = p.E + p.scale * std::exp(-p.beta * mLogX[k]);
            sse += (pred - mY[k]) * (pred - mY[k]);
        }
        return {p.E, p.scale * std::exp(p.beta * mLogRef), p.beta, std::sqrt(sse / static_cast<double>(mY.size()))};
    }

    // Modeled drop across the observed token range.
    [[nodiscard]] double modeled_drop(const Vec3& z) const {
        const Params p = decode(z);
        return p.scale * (std::exp(-p.beta * mLogX.front()) - std::exp(-p.beta * mLogX.back()));
    }

    [[nodiscard]] double floor_max() const noexcept { return mFloorMax; }

private:
    double mDelta;
    double mBetaMax;
    double mFloorMax;
    double mLogRef = 0.0;
    std::vector<double> mLogX, mLogY, mY;
};

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Mat3 identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

Vec3 mul(const Mat3& m, const Vec3& v) {
    return {dot(m[0], v), dot(m[1], v), dot(m[2], v)};
}

struct LocalResult {
    Vec3 z;
    double f;
};

// BFGS on the inverse Hessian with Armijo backtracking.
LocalResult minimize_bfgs(const Objective& obj, Vec3 z, const FitOptions& options) {
    Vec3 g;
    double f = obj.value(z, &g);
    Mat3 H = identity();
    bool fresh = true;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (!std::isfinite(f)) break;
        const double gnorm = std::max({std::abs(g[0]), std::abs(g[1]), std::abs(g[2])});
        if (gnorm <= options.gradient_tolerance) break;

        Vec3 d = mul(H, g);
        for (double& x : d) x = -x;
        double slope = dot(g, d);
        if (!(slope < 0.0)) {
            H = identity();
            fresh = true;
            d = {-g[0], -g[1], -g[2]};
            slope = dot(g, d);
        }
        // Keep trial points inside the range where exp() stays finite.
        const double dnorm = std::sqrt(dot(d, d));
        double alpha = dnorm > 5.0 ? 5.0 / dnorm : 1.0;

        Vec3 zn, gn;
        double fn = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (int i = 0; i < 3; ++i) zn[i] = z[i] + alpha * d[i];
            fn = obj.value(zn, &gn);
            if (std::isfinite(fn) && fn <= f + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted || fn >= f) {
            if (fresh) break;
            H = identity();
            fresh = true;
            continue;
        }

        Vec3 s, y;
        for (int i = 0; i < 3; ++i) {
            s[i] = zn[i] - z[i];
            y[i] = gn[i] - g[i];
        }
        const double sy = dot(s, y);
        if (sy > 1e-300) {
            if (fresh) {
                // Scale the initial inverse Hessian to the observed curvature.
                const double scale = sy / dot(y, y);
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) H[i][j] = (i == j) ? scale : 0.0;
            }
            const double rho = 1.0 / sy;
            const Vec3 Hy = mul(H, y);
            const double yHy = dot(y, Hy);
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    H[i][j] += (1.0 + rho * yHy) * rho * s[i] * s[j] - rho * (Hy[i] * s[j] + s[i] * Hy[j]);
                }
            }
            fresh = false;
        }
        z = zn;
        g = gn;
        f = fn;
    }
    return {z, f};
}

} // namespace

ScalingFit fit_data_scaling(const CheckpointSeries& series, const FitOptions& options) {
    if (!(options.huber_delta > 0.0) || !(options.beta_max > 0.0) || options.beta_starts.empty() ||
        options.floor_start_fractions.empty()) {
        throw Error(ErrorKind::Validation, "invalid fit options");
    }
    const Objective obj(series, options);

    std::optional<LocalResult> best;
    double best_any = std::numeric_limits<double>::infinity();
    for (double beta0 : options.beta_starts) {
        for (double frac : options.floor_start_fractions) {
            const double E0 = frac * obj.floor_max();
            const Vec3 z0 = obj.encode(E0, obj.initial_scale(E0, beta0), std::min(beta0, options.beta_max));
            const LocalResult r = minimize_bfgs(obj, z0, options);
            if (!std::isfinite(r.f)) continue;
            best_any = std::min(best_any, r.f);
            // A curve that does not drop across the data is a degenerate solution.
            if (!(obj.modeled_drop(r.z) > 1e-6 * obj.floor_max())) continue;
            if (!best || r.f < best->f) best = r;
        }
    }
    if (!best) {
        throw FitError("no start produced a decreasing scaling curve", best_any);
    }
    ScalingFit fit = obj.to_fit(best->z);
    if (!std::isfinite(fit.B) || !(fit.B > 0.0)) {
        throw FitError("fitted scale coefficient is not finite", best->f);
    }
    return fit;
}

double predict_loss(const ScalingFit& fit, double tokens) {
    if (!(tokens > 0.0)) throw Error(ErrorKind::DomainError, "tokens must be positive");
    return fit.E + fit.B * std::pow(tokens, -fit.beta);
}

LossVector predict_targets(std::span<const ScalingFit> fits, std::span<const double> full_tokens) {
    if (fits.size() != full_tokens.size()) {
        throw Error(ErrorKind::Validation, "one full-token count per fit is required");
    }
    std::vector<double> out(fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) out[i] = predict_loss(fits[i], full_tokens[i]);
    return LossVector(std::move(out));
}

} // namespace velocitune
