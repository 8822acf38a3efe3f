// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/rng.hpp"

#include <cmath>
#include <numbers>

namespace velocitune {

namespace {
__extension__ using u128 = unsigned __int128;
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    // SplitMix64 finalizer.
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : mKey(mix64(seed ^ mix64(stream + kGamma))), mCounter(0) {}

std::uint64_t CounterRng::next_u64() noexcept {
    const std::uint64_t k = mCounter++;
    return mix64(mKey + (k + 1) * kGamma);
}

double CounterRng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection of the biased low range.
    const std::uint64_t threshold = (0 - n) % n;
    while (true) {
        const u128 m = static_cast<u128>(next_u64()) * n;
        if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
}

double CounterRng::normal() noexcept {
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace velocitune
