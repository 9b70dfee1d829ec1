#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "homolab/rng.hpp"
#include "oracles.hpp"

using namespace homolab;

TEST_CASE("mix64 and counter_hash match the reference implementation") {
    for (std::uint64_t s : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL,
                            0xffffffffffffffffULL}) {
        CHECK(mix64(s) == oracle::mix64(s));
        for (std::uint64_t a = 0; a < 5; ++a)
            for (std::uint64_t b = 0; b < 3; ++b)
                CHECK(counter_hash(s, a, b, a + b) ==
                      oracle::counter_hash(s, a, b, a + b));
    }
}

TEST_CASE("u01 lands in [0,1) with uniform first moments") {
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double u = u01(counter_hash(7, static_cast<std::uint64_t>(k), 0, 0));
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    // sd of the mean is 1/sqrt(12 n) ~ 9.1e-4
    CHECK(std::fabs(mean - 0.5) < 4.0e-3);
    CHECK(std::fabs(var - 1.0 / 12.0) < 4.0e-3);
}

TEST_CASE("zigzag encodes signed offsets injectively and order-compatibly") {
    CHECK(zigzag(0) == 0);
    CHECK(zigzag(-1) == 1);
    CHECK(zigzag(1) == 2);
    CHECK(zigzag(-2) == 3);
    for (std::int64_t v = -50; v <= 50; ++v)
        for (std::int64_t w = v + 1; w <= 50; ++w)
            CHECK(zigzag(v) != zigzag(w));
}

TEST_CASE("normal_pair moments and lane independence") {
    const int n = 100000;
    double s0 = 0, s1 = 0, q0 = 0, q1 = 0, cross = 0;
    for (int k = 0; k < n; ++k) {
        const NormalPair z = normal_pair(11, static_cast<std::uint64_t>(k), 3);
        s0 += z.n0;
        s1 += z.n1;
        q0 += z.n0 * z.n0;
        q1 += z.n1 * z.n1;
        cross += z.n0 * z.n1;
    }
    const double m0 = s0 / n, m1 = s1 / n;
    CHECK(std::fabs(m0) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(m1) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(q0 / n - 1.0) < 0.02);
    CHECK(std::fabs(q1 / n - 1.0) < 0.02);
    CHECK(std::fabs(cross / n - m0 * m1) < 0.02);
}

TEST_CASE("counter draws are pure functions of the counters") {
    const NormalPair a = normal_pair(99, 123, 456);
    const NormalPair b = normal_pair(99, 123, 456);
    CHECK(a.n0 == b.n0);
    CHECK(a.n1 == b.n1);
    CHECK(normal_pair(99, 123, 457).n0 != a.n0);
    CHECK(normal_pair(100, 123, 456).n0 != a.n0);
}
