#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "homolab/homogenize.hpp"
#include "homolab/rng.hpp"
#include "homolab/sde.hpp"
#include "oracles.hpp"

using namespace homolab;

TEST_CASE("diffusion square root satisfies sigma sigma^T = 2 A") {
    // pinned examples
    Mat2 s = matrix_sqrt_spd(Mat2{1.0, 1.0, 0.0}, 2);
    CHECK(s.a11 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(s.a22 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(s.a12 == doctest::Approx(0.0));
    Mat2 d = matrix_sqrt_spd(Mat2{2.0, 0.5, 0.0}, 2);
    CHECK(d.a11 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(d.a22 == doctest::Approx(1.0).epsilon(1e-14));

    for (int k = 0; k < 40; ++k) {
        const double a11 = 1.0 + u01(counter_hash(5, k, 0, 0));
        const double a22 = 1.0 + u01(counter_hash(5, k, 1, 0));
        const double a12 = (2.0 * u01(counter_hash(5, k, 2, 0)) - 1.0) * 0.8 *
                           std::min(a11, a22);
        Mat2 r = matrix_sqrt_spd(Mat2{a11, a22, a12}, 2);
        CHECK(r.a11 * r.a11 + r.a12 * r.a12 ==
              doctest::Approx(2.0 * a11).epsilon(1e-12));
        CHECK(r.a22 * r.a22 + r.a12 * r.a12 ==
              doctest::Approx(2.0 * a22).epsilon(1e-12));
        CHECK(r.a12 * (r.a11 + r.a22) ==
              doctest::Approx(2.0 * a12).epsilon(1e-12));
        CHECK(r.eig_min() > 0.0);
    }
    CHECK(matrix_sqrt_spd(Mat2{1.7, 0.0, 0.0}, 1).a11 ==
          doctest::Approx(std::sqrt(3.4)).epsilon(1e-14));
}

TEST_CASE("paths are deterministic functions of the seed") {
    CoefficientField f = sample_field(8, EllipticityParams{}, 2,
                                      Topology::torus, 9);
    PathFunctionals a = simulate_path(f, 0.01, 2.0, 1234);
    PathFunctionals b = simulate_path(f, 0.01, 2.0, 1234);
    CHECK(a.endpoint[0] == b.endpoint[0]);
    CHECK(a.endpoint[1] == b.endpoint[1]);
    CHECK(a.avg_A.a11 == b.avg_A.a11);
    CHECK(a.max_abs == b.max_abs);
    CHECK(a.steps == 200);
    PathFunctionals c = simulate_path(f, 0.01, 2.0, 1235);
    CHECK(a.endpoint[0] != c.endpoint[0]);
    // occupation average stays in the coefficient range
    CHECK(a.avg_A.eig_min() >= f.params().lambda - 1e-12);
    CHECK(a.avg_A.eig_max() <= f.params().Lambda_ + 1e-12);
    CHECK(a.max_abs >=
          std::hypot(a.endpoint[0], a.endpoint[1]) - 1e-12);
}

TEST_CASE("identity medium gives exactly gaussian endpoints") {
    CoefficientField f = constant_field(2, 1.0, 1.0, 0.0);
    const long n = 2000;
    const double T = 1.0;
    double s1 = 0, s2 = 0, q1 = 0, q2 = 0, cross = 0;
    for (long p = 0; p < n; ++p) {
        PathFunctionals pf =
            simulate_path(f, 0.05, T, counter_hash(99, p, 0, 0));
        CHECK(pf.avg_A.a11 == 1.0);
        CHECK(pf.avg_A.a22 == 1.0);
        CHECK(pf.avg_A.a12 == 0.0);
        s1 += pf.endpoint[0];
        s2 += pf.endpoint[1];
        q1 += pf.endpoint[0] * pf.endpoint[0];
        q2 += pf.endpoint[1] * pf.endpoint[1];
        cross += pf.endpoint[0] * pf.endpoint[1];
    }
    const double nn = static_cast<double>(n);
    // var X_T = 2T per coordinate; sd of the mean = sqrt(2T/n)
    CHECK(std::fabs(s1 / nn) < 4.0 * std::sqrt(2.0 * T / nn));
    CHECK(std::fabs(s2 / nn) < 4.0 * std::sqrt(2.0 * T / nn));
    // var of the second moment of a gaussian: 2 (2T)^2 / n
    CHECK(std::fabs(q1 / nn - 2.0 * T) <
          4.0 * std::sqrt(2.0) * 2.0 * T / std::sqrt(nn));
    CHECK(std::fabs(q2 / nn - 2.0 * T) <
          4.0 * std::sqrt(2.0) * 2.0 * T / std::sqrt(nn));
    CHECK(std::fabs(cross / nn) < 4.0 * 2.0 * T / std::sqrt(nn));
}

TEST_CASE("frozen anisotropic medium reproduces its covariance") {
    const Mat2 a0{1.6, 1.1, 0.35};
    CoefficientField f = constant_field(2, a0.a11, a0.a22, a0.a12);
    InvarianceReport rep = invariance_principle_check(f, 4000, 1.0, a0, 0.05);
    CHECK(rep.target.a11 == doctest::Approx(2.0 * a0.a11));
    CHECK(std::fabs(rep.z.a11) < 4.0);
    CHECK(std::fabs(rep.z.a22) < 4.0);
    CHECK(std::fabs(rep.z.a12) < 4.0);
    CHECK(rep.ks_stat < 0.05);
    CHECK(std::fabs(rep.mean_endpoint[0]) < 4.0 * rep.se_endpoint[0]);
    CHECK(std::fabs(rep.mean_endpoint[1]) < 4.0 * rep.se_endpoint[1]);
}

TEST_CASE("ergodicity experiment on a constant medium has zero deviations") {
    CoefficientField f = constant_field(2, 1.4, 1.2, 0.1);
    ErgodicityReport rep = ergodicity_experiment(
        f, 50, {1.0, 2.0}, {0.01, 0.1}, Mat2{1.4, 1.2, 0.1}, 0.05);
    CHECK(rep.n_paths == 50);
    CHECK(rep.low_n_paths);
    for (const auto& row : rep.tails)
        for (double t : row) CHECK(t == 0.0);
    // quadrature rounding only
    for (double m : rep.median_dev) CHECK(m <= 1e-14);
    CHECK(rep.tails_eta_monotone);
    CHECK(rep.tails_T_monotone);
}

TEST_CASE("occupation averages concentrate on the homogenized matrix") {
    const long P = 9;
    CoefficientField f = laminar_field_2d(20, 1.0, 2.0, Topology::torus, P);
    Grid g = Grid::torus_grid(2, P, 2);
    const Mat2 abar = estimate_abar(f, g, "measure-average").abar;
    ErgodicityReport rep = ergodicity_experiment(
        f, 400, {4.0, 16.0, 64.0}, {0.02, 0.05, 0.1, 0.2}, abar, 0.02);
    CHECK(rep.medians_decreasing);
    CHECK(rep.tails_eta_monotone);
    CHECK(rep.median_dev.front() > rep.median_dev.back());
    // concentration fit: tails shrink in eta^2 T^{1-xi}
    if (rep.n_fit >= 3) CHECK(rep.slope < 0.0);
    for (std::size_t iT = 0; iT < rep.T.size(); ++iT) {
        CHECK(std::fabs(rep.mean_endpoint[iT][0]) <
              5.0 * rep.se_endpoint[iT][0]);
        CHECK(std::fabs(rep.mean_endpoint[iT][1]) <
              5.0 * rep.se_endpoint[iT][1]);
    }
}

TEST_CASE("sde inputs are validated") {
    CoefficientField f = constant_field(2, 1.0, 1.0, 0.0);
    CHECK_THROWS_AS(simulate_path(f, 0.2, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(simulate_path(f, -0.01, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(
        ergodicity_experiment(f, 0, {1.0}, {0.1}, Mat2{}, 0.01),
        ValidationError);
    CHECK_THROWS_AS(
        ergodicity_experiment(f, 10, {2.0, 1.0}, {0.1}, Mat2{}, 0.01),
        ValidationError);
    CHECK_THROWS_AS(
        ergodicity_experiment(f, 10, {1.0}, {0.1, 0.05}, Mat2{}, 0.01),
        ValidationError);
    CHECK_THROWS_AS(
        ergodicity_experiment(f, 10, {1.05}, {0.1}, Mat2{}, 0.1, 0.5),
        ValidationError);  // horizon not a step multiple
    CHECK_THROWS_AS(invariance_principle_check(f, 0, 1.0, Mat2{}),
                    ValidationError);
}
