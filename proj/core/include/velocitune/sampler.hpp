// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded allocation of batch slots across domains and per-domain sequence
// cycling. Each domain walks a keyed pseudo-random permutation of its
// sequence indices; on exhaustion a fresh key is drawn and the epoch counter
// increments. Permutations are computed on the fly, never materialized.

#pragma once

#include "velocitune/domain.hpp"
#include "velocitune/rng.hpp"

#include <cstdint>
#include <vector>

namespace velocitune {

enum class AllocationMode {
    Multinomial,  ///< n_slots i.i.d. categorical draws
    Proportional, ///< deterministic largest-remainder with carried fractional credit
};

struct DomainCursor {
    std::uint64_t sequences = 0; ///< size of the domain's sequence collection
    std::uint64_t perm_key = 0;
    std::uint64_t cursor = 0;
    std::uint64_t epochs = 0;
    bool started = false;

    bool operator==(const DomainCursor&) const = default;
};

struct SamplerState {
    AllocationMode mode = AllocationMode::Multinomial;
    CounterRng rng;
    std::uint64_t sequence_tokens = 4096;
    std::vector<DomainCursor> cursors;
    std::vector<double> credit; ///< proportional mode only
    std::vector<std::uint64_t> consumed_tokens;

    bool operator==(const SamplerState&) const = default;
};

/// One cursor per domain with `sequences[i]` sequences each.
[[nodiscard]] SamplerState make_sampler(std::uint64_t seed, std::vector<std::uint64_t> sequences,
                                        std::uint64_t sequence_tokens,
                                        AllocationMode mode = AllocationMode::Multinomial);

/// Sequences per batch; any remainder below one sequence is dropped.
[[nodiscard]] std::uint64_t slots_per_batch(std::uint64_t batch_tokens, std::uint64_t sequence_tokens);

struct Allocation {
    std::vector<std::uint64_t> counts;
    SamplerState state;
};

[[nodiscard]] Allocation allocate_batch(const WeightVector& weights, std::uint64_t n_slots, SamplerState state);

struct IndexDraw {
    std::vector<std::uint64_t> indices;
    SamplerState state;
};

/// Next `count` sequence indices of `domain`; throws DomainError for an unknown domain.
[[nodiscard]] IndexDraw next_indices(std::size_t domain, std::uint64_t count, SamplerState state);

/// Keyed bijection on [0, n) (cycle-walking Feistel network).
[[nodiscard]] std::uint64_t permute_index(std::uint64_t index, std::uint64_t key, std::uint64_t n) noexcept;

} // namespace velocitune
