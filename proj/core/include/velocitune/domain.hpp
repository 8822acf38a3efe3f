// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Domain identities and the per-domain value types every other module is
// positionally aligned to. All types are immutable after construction.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace velocitune {

/// Entries of a WeightVector must sum to one within this tolerance.
inline constexpr double kSimplexTolerance = 1e-9;

class DomainSet {
public:
    DomainSet(std::vector<std::string> names, std::vector<std::uint64_t> token_counts);

    [[nodiscard]] std::size_t size() const noexcept { return mNames.size(); }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return mNames; }
    [[nodiscard]] const std::vector<std::uint64_t>& token_counts() const noexcept { return mTokenCounts; }
    [[nodiscard]] const std::string& name(std::size_t i) const { return mNames.at(i); }
    [[nodiscard]] std::uint64_t total_tokens() const noexcept;

    /// Position of `name` in canonical order; throws DomainError if absent.
    [[nodiscard]] std::size_t index_of(const std::string& name) const;

    bool operator==(const DomainSet&) const = default;

private:
    std::vector<std::string> mNames;
    std::vector<std::uint64_t> mTokenCounts;
};

/// A point on the probability simplex.
class WeightVector {
public:
    /// Validates the simplex invariant without renormalizing.
    explicit WeightVector(std::vector<double> values);

    [[nodiscard]] static WeightVector uniform(std::size_t k);

    [[nodiscard]] std::size_t size() const noexcept { return mValues.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return mValues[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return mValues; }
    [[nodiscard]] const std::vector<double>& vec() const noexcept { return mValues; }

    bool operator==(const WeightVector&) const = default;

private:
    std::vector<double> mValues;
};

/// Per-domain mean NLL in nats/token.
class LossVector {
public:
    explicit LossVector(std::vector<double> values);

    [[nodiscard]] std::size_t size() const noexcept { return mValues.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return mValues[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return mValues; }
    [[nodiscard]] const std::vector<double>& vec() const noexcept { return mValues; }

    bool operator==(const LossVector&) const = default;

private:
    std::vector<double> mValues;
};

/// Clamped normalized remaining progress; 1 means no progress, 0 means target reached.
class VelocityVector {
public:
    explicit VelocityVector(std::vector<double> values);

    [[nodiscard]] std::size_t size() const noexcept { return mValues.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return mValues[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return mValues; }
    [[nodiscard]] const std::vector<double>& vec() const noexcept { return mValues; }
    [[nodiscard]] double spread() const noexcept;

    bool operator==(const VelocityVector&) const = default;

private:
    std::vector<double> mValues;
};

/// Scales non-negative entries onto the simplex. Throws InvalidWeights on
/// negative, non-finite, or all-zero input.
[[nodiscard]] WeightVector normalize(std::span<const double> raw);

/// Token-ratio weights; throws InvalidDomainSet when the corpus is empty.
[[nodiscard]] WeightVector default_weights(const DomainSet& domains);

/// Uniform mixing `(1 - eps) * w + eps / k`; eps must lie in [0, 1].
[[nodiscard]] WeightVector smooth(const WeightVector& w, double eps);

} // namespace velocitune
