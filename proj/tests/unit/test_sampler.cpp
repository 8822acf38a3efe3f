// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/error.hpp"
#include "velocitune/sampler.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <set>

using namespace velocitune;

namespace {

double chi_square_p(const std::vector<std::uint64_t>& observed, const WeightVector& w) {
    const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::uint64_t{0}));
    double stat = 0.0;
    int dof = -1;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (w[i] == 0.0) continue;
        const double expected = n * w[i];
        const double d = static_cast<double>(observed[i]) - expected;
        stat += d * d / expected;
        ++dof;
    }
    boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, stat));
}

std::uint64_t sum(const std::vector<std::uint64_t>& v) { return std::accumulate(v.begin(), v.end(), std::uint64_t{0}); }

} // namespace

TEST_CASE("slots drop the partial sequence", "[sampler]") {
    CHECK(slots_per_batch(1'000'000, 4096) == 244);
    CHECK(slots_per_batch(4'000'000, 4096) == 976);
    CHECK(slots_per_batch(4096, 4096) == 1);
    CHECK_THROWS_AS(slots_per_batch(4095, 4096), Error);
    CHECK_THROWS_AS(slots_per_batch(10, 0), Error);
}

TEST_CASE("one-hot weights put every slot on one domain", "[sampler]") {
    for (auto mode : {AllocationMode::Multinomial, AllocationMode::Proportional}) {
        auto s = make_sampler(3, {10, 10, 10}, 4096, mode);
        for (int b = 0; b < 20; ++b) {
            auto a = allocate_batch(WeightVector({0.0, 1.0, 0.0}), 244, std::move(s));
            CHECK(a.counts == std::vector<std::uint64_t>{0, 244, 0});
            s = std::move(a.state);
        }
        CHECK(s.consumed_tokens[1] == 20ull * 244 * 4096);
    }
}

TEST_CASE("multinomial counts pass a chi-square fit", "[sampler][statistical]") {
    const WeightVector w({0.5, 0.3, 0.15, 0.05});
    std::vector<double> pvalues;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = make_sampler(seed, {1, 1, 1, 1}, 4096);
        std::vector<std::uint64_t> total(4, 0);
        for (int b = 0; b < 400; ++b) {
            auto a = allocate_batch(w, 244, std::move(s));
            for (std::size_t i = 0; i < 4; ++i) total[i] += a.counts[i];
            s = std::move(a.state);
        }
        pvalues.push_back(chi_square_p(total, w));
    }
    // Each p-value is uniform under the null; demand the minimum isn't absurd
    // (0.05/20 Bonferroni) and that they are not all suspiciously close to 1.
    CHECK(*std::min_element(pvalues.begin(), pvalues.end()) > 0.05 / 20);
    CHECK(std::accumulate(pvalues.begin(), pvalues.end(), 0.0) / 20.0 < 0.9);
}

TEST_CASE("proportional allocation tracks weights within one slot", "[sampler]") {
    const WeightVector w({0.187, 0.503, 0.31});
    auto s = make_sampler(0, {1, 1, 1}, 4096, AllocationMode::Proportional);
    std::vector<std::uint64_t> total(3, 0);
    for (int b = 1; b <= 1000; ++b) {
        auto a = allocate_batch(w, 244, std::move(s));
        REQUIRE(sum(a.counts) == 244);
        for (std::size_t i = 0; i < 3; ++i) {
            total[i] += a.counts[i];
            REQUIRE(std::abs(static_cast<double>(total[i]) - w[i] * 244.0 * b) < 1.0 + 1e-6);
        }
        s = std::move(a.state);
    }
}

TEST_CASE("allocation conserves slots and is deterministic", "[sampler][property]") {
    CounterRng gen(5, 9);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t k = 1 + gen.below(6);
        std::vector<double> raw(k);
        for (auto& v : raw) v = gen.uniform() < 0.2 ? 0.0 : gen.uniform();
        raw[gen.below(k)] += 0.01;
        const WeightVector w = normalize(raw);
        const std::uint64_t seed = gen.next_u64();
        const std::uint64_t slots = 1 + gen.below(1000);
        const auto mode = gen.below(2) ? AllocationMode::Proportional : AllocationMode::Multinomial;

        auto a = allocate_batch(w, slots, make_sampler(seed, std::vector<std::uint64_t>(k, 5), 4096, mode));
        auto b = allocate_batch(w, slots, make_sampler(seed, std::vector<std::uint64_t>(k, 5), 4096, mode));
        REQUIRE(a.counts == b.counts);
        REQUIRE(a.state == b.state);
        REQUIRE(sum(a.counts) == slots);
        REQUIRE(sum(a.state.consumed_tokens) == slots * 4096);
        for (std::size_t i = 0; i < k; ++i) {
            if (w[i] == 0.0) REQUIRE(a.counts[i] == 0);
        }
    }
}

TEST_CASE("allocation rejects mismatched inputs", "[sampler]") {
    auto s = make_sampler(1, {4, 4}, 4096);
    CHECK_THROWS_AS(allocate_batch(WeightVector({0.2, 0.3, 0.5}), 10, s), Error);
    CHECK_THROWS_AS(allocate_batch(WeightVector({0.5, 0.5}), 0, s), Error);
    CHECK_THROWS_AS(make_sampler(1, {}, 4096), Error);
}

TEST_CASE("next_indices wraps into a new epoch", "[sampler]") {
    auto s = make_sampler(11, {3, 2}, 4096);
    auto d = next_indices(0, 5, std::move(s));
    REQUIRE(d.indices.size() == 5);
    const std::set<std::uint64_t> first(d.indices.begin(), d.indices.begin() + 3);
    CHECK(first == std::set<std::uint64_t>{0, 1, 2});
    CHECK(d.state.cursors[0].epochs == 1);
    CHECK(d.state.cursors[0].cursor == 2);
    CHECK(d.state.cursors[1].epochs == 0);

    const auto before = d.state;
    auto z = next_indices(1, 0, d.state);
    CHECK(z.indices.empty());
    CHECK(z.state == before);

    try {
        (void)next_indices(7, 1, before);
        FAIL("unknown domain accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DomainError);
    }
}

TEST_CASE("every epoch visits every sequence exactly once", "[sampler][property]") {
    CounterRng gen(3, 3);
    for (int trial = 0; trial < 300; ++trial) {
        const std::uint64_t n = 1 + gen.below(700);
        auto s = make_sampler(gen.next_u64(), {n}, 4096);
        for (int epoch = 0; epoch < 3; ++epoch) {
            auto d = next_indices(0, n, std::move(s));
            std::vector<std::uint64_t> idx = d.indices;
            std::sort(idx.begin(), idx.end());
            for (std::uint64_t i = 0; i < n; ++i) REQUIRE(idx[i] == i);
            s = std::move(d.state);
        }
    }
}

TEST_CASE("permute_index is a bijection", "[sampler][property]") {
    for (std::uint64_t n : {1ull, 2ull, 3ull, 17ull, 256ull, 1000ull, 4097ull}) {
        for (std::uint64_t key : {0ull, 1ull, 0xdeadbeefull}) {
            std::vector<bool> seen(n, false);
            for (std::uint64_t i = 0; i < n; ++i) {
                const auto p = permute_index(i, key, n);
                REQUIRE(p < n);
                REQUIRE_FALSE(seen[p]);
                seen[p] = true;
            }
        }
    }
}

TEST_CASE("split draws equal one draw", "[sampler]") {
    auto whole = next_indices(0, 50, make_sampler(4, {17}, 4096));
    auto s = make_sampler(4, {17}, 4096);
    std::vector<std::uint64_t> parts;
    for (std::uint64_t c : {7u, 13u, 30u}) {
        auto d = next_indices(0, c, std::move(s));
        parts.insert(parts.end(), d.indices.begin(), d.indices.end());
        s = std::move(d.state);
    }
    CHECK(parts == whole.indices);
    CHECK(s == whole.state);
}
