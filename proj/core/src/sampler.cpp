// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/sampler.hpp"
#include "velocitune/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace velocitune {

SamplerState make_sampler(std::uint64_t seed, std::vector<std::uint64_t> sequences, std::uint64_t sequence_tokens,
                          AllocationMode mode) {
    if (sequences.empty()) throw Error(ErrorKind::InvalidDomainSet, "sampler needs at least one domain");
    if (sequence_tokens == 0) throw Error(ErrorKind::Validation, "sequence length must be positive");
    SamplerState s;
    s.mode = mode;
    s.rng = CounterRng(seed, /*stream=*/1);
    s.sequence_tokens = sequence_tokens;
    s.cursors.resize(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) s.cursors[i].sequences = sequences[i];
    s.credit.assign(sequences.size(), 0.0);
    s.consumed_tokens.assign(sequences.size(), 0);
    return s;
}

std::uint64_t slots_per_batch(std::uint64_t batch_tokens, std::uint64_t sequence_tokens) {
    if (sequence_tokens == 0) throw Error(ErrorKind::Validation, "sequence length must be positive");
    const std::uint64_t n = batch_tokens / sequence_tokens;
    if (n == 0) throw Error(ErrorKind::Validation, "batch holds less than one sequence");
    return n;
}

namespace {

std::vector<std::uint64_t> multinomial(const WeightVector& w, std::uint64_t n, CounterRng& rng) {
    const std::size_t k = w.size();
    std::vector<double> cdf(k);
    std::partial_sum(w.values().begin(), w.values().end(), cdf.begin());
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (w[i] > 0.0) last_positive = i;

    std::vector<std::uint64_t> counts(k, 0);
    for (std::uint64_t s = 0; s < n; ++s) {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        // Rounding can leave cdf.back() just below 1.
        const std::size_t j = it == cdf.end() ? last_positive : static_cast<std::size_t>(it - cdf.begin());
        ++counts[j];
    }
    return counts;
}

std::vector<std::uint64_t> proportional(const WeightVector& w, std::uint64_t n, std::vector<double>& credit) {
    const std::size_t k = w.size();
    std::vector<double> want(k);
    std::vector<std::uint64_t> counts(k, 0);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        want[i] = credit[i] + w[i] * static_cast<double>(n);
        const double f = std::floor(want[i]);
        counts[i] = f > 0.0 ? static_cast<std::uint64_t>(f) : 0;
        assigned += static_cast<std::int64_t>(counts[i]);
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto frac = [&](std::size_t i) { return want[i] - static_cast<double>(counts[i]); };
    std::int64_t remaining = static_cast<std::int64_t>(n) - assigned;
    if (remaining > 0) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac(a) > frac(b); });
        for (std::size_t idx = 0; remaining > 0; idx = (idx + 1) % k) {
            const std::size_t i = order[idx];
            if (w[i] <= 0.0) continue;
            ++counts[i];
            --remaining;
        }
    } else if (remaining < 0) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac(a) < frac(b); });
        for (std::size_t idx = 0; remaining < 0; idx = (idx + 1) % k) {
            const std::size_t i = order[idx];
            if (counts[i] == 0) continue;
            --counts[i];
            ++remaining;
        }
    }
    for (std::size_t i = 0; i < k; ++i) credit[i] = w[i] > 0.0 ? want[i] - static_cast<double>(counts[i]) : 0.0;
    return counts;
}

} // namespace

Allocation allocate_batch(const WeightVector& weights, std::uint64_t n_slots, SamplerState state) {
    if (n_slots == 0) throw Error(ErrorKind::Validation, "batch needs at least one slot");
    if (weights.size() != state.cursors.size()) {
        throw Error(ErrorKind::Validation, "weight vector length does not match sampler domains");
    }
    std::vector<std::uint64_t> counts = state.mode == AllocationMode::Multinomial
                                            ? multinomial(weights, n_slots, state.rng)
                                            : proportional(weights, n_slots, state.credit);
    for (std::size_t i = 0; i < counts.size(); ++i) state.consumed_tokens[i] += counts[i] * state.sequence_tokens;
    return {std::move(counts), std::move(state)};
}

std::uint64_t permute_index(std::uint64_t index, std::uint64_t key, std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const int width = static_cast<int>(std::bit_width(n - 1));
    const int bits = std::max(2, width + (width & 1));
    const int half = bits / 2;
    const std::uint64_t mask = (std::uint64_t{1} << half) - 1;
    std::uint64_t x = index;
    do {
        std::uint64_t left = x >> half;
        std::uint64_t right = x & mask;
        for (std::uint64_t round = 0; round < 4; ++round) {
            const std::uint64_t f = mix64(right ^ mix64(key + round)) & mask;
            const std::uint64_t next = left ^ f;
            left = right;
            right = next;
        }
        x = (left << half) | right;
    } while (x >= n);
    return x;
}

IndexDraw next_indices(std::size_t domain, std::uint64_t count, SamplerState state) {
    if (domain >= state.cursors.size()) {
        throw Error(ErrorKind::DomainError, "unknown domain index " + std::to_string(domain));
    }
    std::vector<std::uint64_t> out;
    if (count == 0) return {std::move(out), std::move(state)};
    DomainCursor& c = state.cursors[domain];
    if (c.sequences == 0) throw Error(ErrorKind::DomainError, "domain " + std::to_string(domain) + " has no sequences");
    out.reserve(count);
    if (!c.started) {
        c.perm_key = state.rng.next_u64();
        c.started = true;
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        if (c.cursor == c.sequences) {
            c.perm_key = state.rng.next_u64();
            c.cursor = 0;
            ++c.epochs;
        }
        out.push_back(permute_index(c.cursor++, c.perm_key, c.sequences));
    }
    return {std::move(out), std::move(state)};
}

} // namespace velocitune
