// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace velocitune {

/// Counter-based generator: output k is a bijective mix of (key, k), so the
/// whole state is two integers and serializes exactly.
class CounterRng {
public:
    CounterRng() = default;
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

    static CounterRng from_state(std::uint64_t key, std::uint64_t counter) noexcept {
        CounterRng r;
        r.mKey = key;
        r.mCounter = counter;
        return r;
    }

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 bits.
    double uniform() noexcept;
    /// Uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal via Box–Muller (one variate per two draws).
    double normal() noexcept;

    [[nodiscard]] std::uint64_t key() const noexcept { return mKey; }
    [[nodiscard]] std::uint64_t counter() const noexcept { return mCounter; }

    bool operator==(const CounterRng&) const = default;

private:
    std::uint64_t mKey = 0;
    std::uint64_t mCounter = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

} // namespace velocitune
