#include <doctest.h>

#include <cmath>
#include <map>

#include "fedmr/rng.hpp"

using namespace fedmr;

TEST_CASE("streams are reproducible and diverge across seeds") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(43);
    Rng d(42);
    int diff = 0;
    for (int i = 0; i < 16; ++i) diff += c.next_u64() != d.next_u64() ? 1 : 0;
    CHECK(diff > 0);
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
    CHECK(derive_seed(2, 2, 3) != derive_seed(1, 2, 3));
}

TEST_CASE("uniform_index is unbiased over a small range") {
    Rng rng(7);
    std::map<uint64_t, int> counts;
    const int draws = 60000;
    for (int i = 0; i < draws; ++i) counts[rng.uniform_index(5)]++;
    for (uint64_t v = 0; v < 5; ++v) {
        CHECK(std::abs(counts[v] / static_cast<double>(draws) - 0.2) <= 0.01);
    }
}

TEST_CASE("normal moments are sane") {
    Rng rng(11);
    double mean = 0.0;
    double var = 0.0;
    const int draws = 50000;
    for (int i = 0; i < draws; ++i) {
        const double x = rng.normal();
        mean += x;
        var += x * x;
    }
    mean /= draws;
    var = var / draws - mean * mean;
    CHECK(std::abs(mean) <= 0.02);
    CHECK(std::abs(var - 1.0) <= 0.03);
}

TEST_CASE("gamma mean matches alpha, including alpha < 1") {
    Rng rng(13);
    for (double alpha : {0.1, 0.5, 1.0, 3.0}) {
        double mean = 0.0;
        const int draws = 40000;
        for (int i = 0; i < draws; ++i) mean += rng.gamma(alpha);
        mean /= draws;
        CHECK(std::abs(mean - alpha) <= 0.05 * std::max(1.0, alpha));
    }
}

TEST_CASE("sample_without_replacement yields distinct ids") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto picks = rng.sample_without_replacement(10, 6);
        REQUIRE(picks.size() == 6);
        for (size_t i = 0; i < picks.size(); ++i) {
            CHECK(picks[i] >= 0);
            CHECK(picks[i] < 10);
            for (size_t j = i + 1; j < picks.size(); ++j) CHECK(picks[i] != picks[j]);
        }
    }
}
