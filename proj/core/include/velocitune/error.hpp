// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace velocitune {

enum class ErrorKind {
    InvalidWeights,
    InvalidDomainSet,
    InvalidLoss,
    DegenerateDomain,
    DomainError,
    InsufficientData,
    FitFailure,
    Protocol,
    Ordering,
    Parse,
    Validation,
    VersionMismatch,
    Corruption,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// All library failures surface as this exception; `kind()` is stable for callers that branch on it.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), mKind(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return mKind; }

private:
    ErrorKind mKind;
};

/// Every multi-start attempt failed; carries the lowest objective seen.
class FitError : public Error {
public:
    FitError(const std::string& message, double best_residual)
        : Error(ErrorKind::FitFailure, message), mBestResidual(best_residual) {}

    [[nodiscard]] double best_residual() const noexcept { return mBestResidual; }

private:
    double mBestResidual;
};

} // namespace velocitune
