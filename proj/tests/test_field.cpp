#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "homolab/field.hpp"
#include "oracles.hpp"

using namespace homolab;

namespace {
EllipticityParams default_params() { return EllipticityParams{}; }
}  // namespace

TEST_CASE("constant field evaluates to the pinned matrix everywhere") {
    CoefficientField f = constant_field(2, 1.5, 1.2, 0.3);
    for (double x : {-7.3, 0.0, 0.25, 19.0})
        for (double y : {-2.0, 0.5, 8.8}) {
            const Mat2 a = f(x, y);
            CHECK(a.a11 == 1.5);
            CHECK(a.a22 == 1.2);
            CHECK(a.a12 == 0.3);
        }
}

TEST_CASE("sampled fields stay admissible everywhere probed") {
    const EllipticityParams p = default_params();
    for (std::uint64_t seed : {1ULL, 7ULL, 2026ULL}) {
        CoefficientField f = sample_field(seed, p, 2, Topology::free_space);
        for (int k = 0; k < 400; ++k) {
            const double x = -10.0 + 0.137 * k;
            const double y = 5.0 - 0.093 * k;
            const Mat2 a = f(x, y);
            CHECK(a.eig_min() >= p.lambda - 1e-12);
            CHECK(a.eig_max() <= p.Lambda_ + 1e-12);
            // margin the monotone stencil relies on
            CHECK(std::fabs(a.a12) <=
                  (1.0 - p.cross_margin) * std::min(a.a11, a.a22) + 1e-12);
        }
    }
}

TEST_CASE("integer translation relabels the medium exactly") {
    CoefficientField f = sample_field(3, default_params(), 2,
                                      Topology::free_space);
    CoefficientField g = f.translated(2, -5);
    for (int k = 0; k < 100; ++k) {
        const double x = -4.0 + 0.083 * k;
        const double y = 3.0 - 0.061 * k;
        const Mat2 a = f(x + 2.0, y - 5.0);
        const Mat2 b = g(x, y);
        CHECK(a.a11 == doctest::Approx(b.a11).epsilon(1e-14));
        CHECK(a.a22 == doctest::Approx(b.a22).epsilon(1e-14));
        CHECK(a.a12 == doctest::Approx(b.a12).epsilon(1e-14));
    }
}

TEST_CASE("torus fields are periodic with the declared period") {
    const long P = 9;
    CoefficientField f = sample_field(5, default_params(), 2, Topology::torus, P);
    for (int k = 0; k < 60; ++k) {
        const double x = 0.21 * k;
        const double y = 7.0 - 0.17 * k;
        const Mat2 a = f(x, y);
        const Mat2 b = f(x + P, y);
        const Mat2 c = f(x, y - P);
        CHECK(a.a11 == doctest::Approx(b.a11).epsilon(1e-13));
        CHECK(a.a12 == doctest::Approx(c.a12).epsilon(1e-13));
        CHECK(a.a22 == doctest::Approx(c.a22).epsilon(1e-13));
    }
}

TEST_CASE("evaluations one unit apart decorrelate") {
    Box U{{0.0, 0.0}, {0.5, 0.5}};
    Box V{{1.75, 0.0}, {2.25, 0.5}};
    FieldStatistics s = decorrelation_probe(default_params(), 400, U, V, 2);
    CHECK(!s.degenerate);
    CHECK(std::fabs(s.cross_set_correlation) <
          4.0 / std::sqrt(static_cast<double>(s.n_seeds)));
    // stationarity: the two box centers see the same one-point law
    CHECK(std::fabs(s.translation_mismatch) < 0.05);
}

TEST_CASE("field regularity respects the Holder budget") {
    EllipticityParams p = default_params();
    CoefficientField f = sample_field(17, p, 2, Topology::free_space);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double x = -3.0 + 0.031 * k;
        const double y = 1.0 + 0.023 * k;
        for (double dx : {0.01, 0.05, 0.2}) {
            const Mat2 d = f(x + dx, y) - f(x, y);
            worst = std::max(worst, d.norm2() / std::pow(dx, p.alpha0));
        }
    }
    CHECK(worst <= p.K0 * (1.0 + 1e-9));
}

TEST_CASE("two-point 1D field realizes the two-valued law per unit cell") {
    CoefficientField f = two_point_field_1d(8, 1.0, 2.0, Topology::torus, 243);
    int seen_a = 0, seen_b = 0;
    for (long c = 0; c < 243; ++c) {
        const double v = f.cell_matrix(c, 0).a11;
        const bool is_a = std::fabs(v - 1.0) < 1e-14;
        const bool is_b = std::fabs(v - 2.0) < 1e-14;
        CHECK((is_a || is_b));
        seen_a += is_a;
        seen_b += is_b;
        // cells are centered on integer coordinates; the plateau value there
        // is the cell matrix itself
        const double mid = f(static_cast<double>(c)).a11;
        CHECK(mid == doctest::Approx(v).epsilon(1e-13));
    }
    CHECK(seen_a > 60);
    CHECK(seen_b > 60);
}

TEST_CASE("laminar 2D field is constant along the second axis") {
    CoefficientField f = laminar_field_2d(4, 1.0, 2.0, Topology::torus, 81);
    for (int k = 0; k < 80; ++k) {
        const double x = 0.19 * k;
        const Mat2 a = f(x, 0.3);
        const Mat2 b = f(x, 17.9);
        CHECK(a.a11 == doctest::Approx(b.a11).epsilon(1e-13));
        CHECK(a.a22 == doctest::Approx(b.a22).epsilon(1e-13));
        CHECK(a.a12 == 0.0);
        CHECK(b.a12 == 0.0);
    }
}

TEST_CASE("distinct seeds give distinct media, same seed reproduces") {
    const EllipticityParams p = default_params();
    CoefficientField f = sample_field(100, p, 2, Topology::free_space);
    CoefficientField g = sample_field(100, p, 2, Topology::free_space);
    CoefficientField h = sample_field(101, p, 2, Topology::free_space);
    CHECK(f(0.3, 0.7).a11 == g(0.3, 0.7).a11);
    CHECK(f(0.3, 0.7).a11 != h(0.3, 0.7).a11);
}

TEST_CASE("parameter validation rejects bad ellipticity data") {
    EllipticityParams p = default_params();
    p.lambda = -1.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = default_params();
    p.Lambda_ = 0.5 * p.lambda;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = default_params();
    p.alpha0 = 1.5;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    FieldSpec s;
    s.topology = Topology::torus;
    s.period = 2;  // below the minimum torus side
    CHECK_THROWS_AS(CoefficientField{s}, ValidationError);
}
