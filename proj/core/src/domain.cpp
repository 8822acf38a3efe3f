// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/domain.hpp"
#include "velocitune/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace velocitune {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidWeights: return "invalid-weights";
        case ErrorKind::InvalidDomainSet: return "invalid-domain-set";
        case ErrorKind::InvalidLoss: return "invalid-loss";
        case ErrorKind::DegenerateDomain: return "degenerate-domain";
        case ErrorKind::DomainError: return "domain-error";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::FitFailure: return "fit-failure";
        case ErrorKind::Protocol: return "protocol-error";
        case ErrorKind::Ordering: return "ordering-error";
        case ErrorKind::Parse: return "parse-error";
        case ErrorKind::Validation: return "validation-error";
        case ErrorKind::VersionMismatch: return "version-mismatch";
        case ErrorKind::Corruption: return "corruption";
        case ErrorKind::Io: return "io-error";
    }
    return "unknown";
}

DomainSet::DomainSet(std::vector<std::string> names, std::vector<std::uint64_t> token_counts)
    : mNames(std::move(names)), mTokenCounts(std::move(token_counts)) {
    if (mNames.empty()) {
        throw Error(ErrorKind::InvalidDomainSet, "domain list is empty");
    }
    if (mNames.size() != mTokenCounts.size()) {
        throw Error(ErrorKind::InvalidDomainSet, "token_counts length " + std::to_string(mTokenCounts.size()) +
                                                     " does not match " + std::to_string(mNames.size()) + " domains");
    }
    std::set<std::string> seen;
    for (const auto& n : mNames) {
        if (n.empty()) throw Error(ErrorKind::InvalidDomainSet, "empty domain name");
        if (!seen.insert(n).second) throw Error(ErrorKind::InvalidDomainSet, "duplicate domain name '" + n + "'");
    }
}

std::uint64_t DomainSet::total_tokens() const noexcept {
    return std::accumulate(mTokenCounts.begin(), mTokenCounts.end(), std::uint64_t{0});
}

std::size_t DomainSet::index_of(const std::string& name) const {
    auto it = std::find(mNames.begin(), mNames.end(), name);
    if (it == mNames.end()) throw Error(ErrorKind::DomainError, "unknown domain '" + name + "'");
    return static_cast<std::size_t>(it - mNames.begin());
}

WeightVector::WeightVector(std::vector<double> values) : mValues(std::move(values)) {
    if (mValues.empty()) throw Error(ErrorKind::InvalidWeights, "empty weight vector");
    double sum = 0.0;
    for (double v : mValues) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorKind::InvalidWeights, "weights must be finite and non-negative");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
        throw Error(ErrorKind::InvalidWeights, "weights sum to " + std::to_string(sum) + ", expected 1");
    }
}

WeightVector WeightVector::uniform(std::size_t k) {
    if (k == 0) throw Error(ErrorKind::InvalidWeights, "empty weight vector");
    return WeightVector(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

LossVector::LossVector(std::vector<double> values) : mValues(std::move(values)) {
    if (mValues.empty()) throw Error(ErrorKind::InvalidLoss, "empty loss vector");
    for (double v : mValues) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorKind::InvalidLoss, "losses must be finite and non-negative");
        }
    }
}

VelocityVector::VelocityVector(std::vector<double> values) : mValues(std::move(values)) {
    for (double v : mValues) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::InvalidLoss, "velocity outside [0, 1]");
    }
}

double VelocityVector::spread() const noexcept {
    if (mValues.empty()) return 0.0;
    auto [lo, hi] = std::minmax_element(mValues.begin(), mValues.end());
    return *hi - *lo;
}

WeightVector normalize(std::span<const double> raw) {
    if (raw.empty()) throw Error(ErrorKind::InvalidWeights, "empty weight vector");
    double sum = 0.0;
    for (double v : raw) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorKind::InvalidWeights, "cannot normalize negative or non-finite entries");
        }
        sum += v;
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        throw Error(ErrorKind::InvalidWeights, "cannot normalize an all-zero vector");
    }
    std::vector<double> out(raw.size());
    std::transform(raw.begin(), raw.end(), out.begin(), [sum](double v) { return v / sum; });
    return WeightVector(std::move(out));
}

WeightVector default_weights(const DomainSet& domains) {
    std::vector<double> raw(domains.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<double>(domains.token_counts()[i]);
    if (domains.total_tokens() == 0) {
        throw Error(ErrorKind::InvalidDomainSet, "total token count is zero");
    }
    return normalize(raw);
}

WeightVector smooth(const WeightVector& w, double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw Error(ErrorKind::Validation, "smoothing must lie in [0, 1]");
    if (eps == 0.0) return w;
    const double k = static_cast<double>(w.size());
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - eps) * w[i] + eps / k;
    return normalize(out);
}

} // namespace velocitune
