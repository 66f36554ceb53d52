#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "descent/rng.hpp"

using namespace descent;

TEST_CASE("stream determinism") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    RngStream c(42), d(43);
    bool all_equal = true;
    for (int i = 0; i < 16; ++i)
        if (c.next_u64() != d.next_u64()) all_equal = false;
    CHECK_FALSE(all_equal);
}

TEST_CASE("uniform draws live in the half-open unit interval") {
    RngStream rng(5);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
    CHECK(lo < 0.05);
    CHECK(hi > 0.95);
}

TEST_CASE("normal draws have the requested moments") {
    RngStream rng(6);
    const std::size_t n = 200000;
    double sum = 0.0, sq = 0.0;
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = rng.next_normal();
        sum += xs[i];
    }
    const double mean = sum / static_cast<double>(n);
    for (double x : xs) sq += (x - mean) * (x - mean);
    const double std_dev = std::sqrt(sq / static_cast<double>(n));
    CHECK(std::fabs(mean) < 0.01);
    CHECK(std::fabs(std_dev - 1.0) < 0.01);
}

TEST_CASE("mix derives distinct child seeds") {
    const std::uint64_t base = 7;
    CHECK(RngStream::mix(base, 1) != RngStream::mix(base, 2));
    CHECK(RngStream::mix(base, 1) != RngStream::mix(8, 1));
    CHECK(RngStream::mix(base, 1) == RngStream::mix(base, 1));
}

TEST_CASE("index shuffle is a seeded permutation") {
    std::vector<std::size_t> idx(100);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    RngStream rng(9);
    shuffle_indices(rng, idx);

    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

    std::vector<std::size_t> again(100);
    for (std::size_t i = 0; i < again.size(); ++i) again[i] = i;
    RngStream rng2(9);
    shuffle_indices(rng2, again);
    CHECK(idx == again);
}
