// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/domain.hpp"
#include "velocitune/error.hpp"
#include "velocitune/rng.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

using namespace velocitune;
using Catch::Matchers::WithinAbs;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an exception");
    return ErrorKind::Io;
}

} // namespace

TEST_CASE("DomainSet validates names and lengths", "[core]") {
    DomainSet d({"a", "b", "c"}, {1, 2, 3});
    CHECK(d.size() == 3);
    CHECK(d.total_tokens() == 6);
    CHECK(d.index_of("c") == 2);
    CHECK(kind_of([&] { (void)d.index_of("z"); }) == ErrorKind::DomainError);

    CHECK(kind_of([] { DomainSet({}, {}); }) == ErrorKind::InvalidDomainSet);
    CHECK(kind_of([] { DomainSet({"a", "a"}, {1, 1}); }) == ErrorKind::InvalidDomainSet);
    CHECK(kind_of([] { DomainSet({"a", "b"}, {1}); }) == ErrorKind::InvalidDomainSet);
    CHECK(kind_of([] { DomainSet({""}, {1}); }) == ErrorKind::InvalidDomainSet);
}

TEST_CASE("WeightVector enforces the simplex", "[core]") {
    CHECK_NOTHROW(WeightVector({0.25, 0.75}));
    CHECK_NOTHROW(WeightVector({0.5, 0.5 + 5e-10}));
    CHECK(kind_of([] { WeightVector({0.5, 0.4}); }) == ErrorKind::InvalidWeights);
    CHECK(kind_of([] { WeightVector({1.2, -0.2}); }) == ErrorKind::InvalidWeights);
    CHECK(kind_of([] { WeightVector({NAN, 1.0}); }) == ErrorKind::InvalidWeights);
    CHECK(kind_of([] { WeightVector(std::vector<double>{}); }) == ErrorKind::InvalidWeights);
    CHECK(WeightVector::uniform(4)[3] == 0.25);
}

TEST_CASE("LossVector and VelocityVector bounds", "[core]") {
    CHECK_NOTHROW(LossVector({0.0, 2.5}));
    CHECK(kind_of([] { LossVector({-0.1}); }) == ErrorKind::InvalidLoss);
    CHECK(kind_of([] { LossVector({INFINITY}); }) == ErrorKind::InvalidLoss);
    CHECK_NOTHROW(VelocityVector({0.0, 1.0}));
    CHECK(kind_of([] { VelocityVector({1.0 + 1e-12}); }) == ErrorKind::InvalidLoss);
    CHECK(VelocityVector({0.2, 0.9, 0.5}).spread() == 0.9 - 0.2);
}

TEST_CASE("normalize examples", "[core]") {
    const double third = 1.0 / 3.0;
    auto a = normalize(std::vector<double>{2, 2, 2});
    for (double v : a.values()) CHECK_THAT(v, WithinAbs(third, 1e-15));

    auto b = normalize(std::vector<double>{1, 0, 0});
    CHECK(b.vec() == std::vector<double>{1, 0, 0});

    const double e = std::exp(1.0);
    auto c = normalize(std::vector<double>{0.5 * e, 0.5});
    CHECK_THAT(c[0], WithinAbs(0.731059, 5e-7));
    CHECK_THAT(c[1], WithinAbs(0.268941, 5e-7));

    CHECK(kind_of([] { (void)normalize(std::vector<double>{0, 0}); }) == ErrorKind::InvalidWeights);
    CHECK(kind_of([] { (void)normalize(std::vector<double>{1, -1, 1}); }) == ErrorKind::InvalidWeights);
}

TEST_CASE("default_weights follow token counts", "[core]") {
    CHECK(default_weights(DomainSet({"a", "b"}, {1, 1})).vec() == std::vector<double>{0.5, 0.5});
    CHECK(default_weights(DomainSet({"a", "b"}, {3, 1})).vec() == std::vector<double>{0.75, 0.25});

    auto sys = default_weights(DomainSet({"Blogs", "Stackoverflow", "Arxiv"}, {3'210'000'000, 7'640'000'000, 5'370'000'000}));
    CHECK_THAT(sys[0], WithinAbs(0.198, 5e-4));
    CHECK_THAT(sys[1], WithinAbs(0.471, 5e-4));
    CHECK_THAT(sys[2], WithinAbs(0.331, 5e-4));

    CHECK(kind_of([] { (void)default_weights(DomainSet({"a", "b"}, {0, 0})); }) == ErrorKind::InvalidDomainSet);
}

TEST_CASE("smooth mixes toward uniform", "[core]") {
    WeightVector w({1.0, 0.0});
    CHECK(smooth(w, 0.0) == w);
    auto s = smooth(w, 0.2);
    CHECK_THAT(s[0], WithinAbs(0.9, 1e-15));
    CHECK_THAT(s[1], WithinAbs(0.1, 1e-15));
    CHECK(kind_of([&] { (void)smooth(w, 1.5); }) == ErrorKind::Validation);
}

TEST_CASE("normalize is idempotent and scale invariant", "[core][property]") {
    CounterRng rng(42, 0);
    for (int trial = 0; trial < 100000; ++trial) {
        const std::size_t k = 1 + rng.below(8);
        std::vector<double> x(k);
        for (auto& v : x) v = rng.uniform() * std::pow(10.0, 6.0 * rng.uniform() - 3.0);
        x[rng.below(k)] += 1e-3;

        const WeightVector once = normalize(x);
        const WeightVector twice = normalize(once.values());
        const double c = std::pow(10.0, 8.0 * rng.uniform() - 4.0);
        std::vector<double> scaled(x);
        for (auto& v : scaled) v *= c;
        const WeightVector rescaled = normalize(scaled);

        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            REQUIRE(std::abs(twice[i] - once[i]) <= 1e-15);
            REQUIRE(std::abs(rescaled[i] - once[i]) <= 1e-12);
            sum += once[i];
        }
        REQUIRE(std::abs(sum - 1.0) <= kSimplexTolerance);
    }
}
