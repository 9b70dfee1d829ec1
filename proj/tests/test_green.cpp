#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "homolab/green.hpp"
#include "homolab/parallel.hpp"
#include "oracles.hpp"

using namespace homolab;

namespace {

GridOperator identity_coeff_op(const Grid& g) {
    FieldFn f = [](double, double) { return Mat2{1.0, 1.0, 0.0}; };
    return assemble_generator_fn(f, g, 1.0, 1.0);
}

}  // namespace

TEST_CASE("kernel for A = I matches the heat kernel in 2D") {
    Grid g = Grid::box(2, {-10.0, -10.0}, {10.0, 10.0}, 1.0 / 16.0);
    GridOperator op = identity_coeff_op(g);
    auto snaps = green_evolve(op, {0.0, 0.0}, {1.0, 2.0, 4.0});
    for (const auto& s : snaps) {
        double sup = 0.0, peak = 0.0;
        for (long j = 0; j < g.n[1]; ++j)
            for (long i = 0; i < g.n[0]; ++i) {
                const double k = oracle::heat_kernel_2d(s.t, g.x(i), g.y(j));
                sup = std::max(sup, std::fabs(s.P.at(i, j) - k));
                peak = std::max(peak, k);
            }
        CHECK(sup / peak < 0.02);
        CHECK(s.mass == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("kernel positivity and exact torus mass conservation for A = I") {
    Grid g = Grid::torus_grid(2, 9, 2);
    GridOperator op = identity_coeff_op(g);
    auto snaps = green_evolve(op, {4.5, 4.5}, {0.5, 1.0, 2.0, 4.0});
    for (const auto& s : snaps) {
        CHECK(s.mass == doctest::Approx(1.0).epsilon(1e-12));
        for (double v : s.P.v) CHECK(v >= 0.0);
    }
}

TEST_CASE("invariant density of the identity medium is one") {
    Grid g = Grid::torus_grid(2, 9, 2);
    GridOperator op = identity_coeff_op(g);
    auto val = invariant_density_at(op, {2.0, 3.0}, 1e-5);
    CHECK(val.converged);
    CHECK(val.m_y == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(!val.times.empty());
    CHECK(val.tail.back() < 1e-5);
}

TEST_CASE("invariant density evaluation rejects free grids and bad rtol") {
    Grid free_g = Grid::box(2, {0.0, 0.0}, {2.0, 2.0}, 0.5);
    GridOperator op_free = identity_coeff_op(free_g);
    CHECK_THROWS_AS(invariant_density_at(op_free, {1.0, 1.0}, 1e-4),
                    ValidationError);
    Grid tg = Grid::torus_grid(2, 5, 1);
    GridOperator op_t = identity_coeff_op(tg);
    CHECK_THROWS_AS(invariant_density_at(op_t, {1.0, 1.0}, 0.5),
                    ValidationError);
}

TEST_CASE("gaussian comparison kernel matches the closed form") {
    Grid g = Grid::box(2, {-6.0, -6.0}, {6.0, 6.0}, 0.5);
    const Mat2 abar{1.4, 0.9, 0.2};
    for (double t : {1.0, 3.0})
        for (double dx : {0.0, 0.7, -1.3})
            for (double dy : {0.4, -2.1}) {
                const double mine = gaussian_kernel(g, abar, t, dx, dy);
                const double ref = oracle::gaussian_kernel_2d(
                    abar.a11, abar.a22, abar.a12, t, dx, dy);
                CHECK(mine == doctest::Approx(ref).epsilon(1e-12));
            }
    // integrates to one on the lattice when well resolved; the box must hold
    // ~4 standard deviations (sigma ~ sqrt(4 Lambda) at t = 2)
    Grid gs = Grid::box(2, {-10.0, -10.0}, {10.0, 10.0}, 0.5);
    double sum = 0.0;
    for (long j = 0; j < gs.n[1]; ++j)
        for (long i = 0; i < gs.n[0]; ++i)
            sum += gaussian_kernel(gs, abar, 2.0, gs.x(i), gs.y(j));
    sum *= gs.h * gs.h;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("envelope fit brackets exact heat-kernel snapshots with zero violations") {
    Grid g = Grid::box(2, {-10.0, -10.0}, {10.0, 10.0}, 0.25);
    std::vector<KernelSnapshot> snaps;
    for (double t : {4.0, 8.0, 16.0}) {
        KernelSnapshot s;
        s.t = t;
        s.y = {0.0, 0.0};
        s.P = GridFunction(g);
        for (long j = 0; j < g.n[1]; ++j)
            for (long i = 0; i < g.n[0]; ++i)
                s.P.at(i, j) = oracle::heat_kernel_2d(t, g.x(i), g.y(j));
        s.mass = 1.0;
        snaps.push_back(std::move(s));
    }
    EnvelopeFit fit = nash_aronson_fit(snaps, 1.0, 4.0);
    CHECK(fit.violations == 0);
    CHECK(fit.checked > 0);
    CHECK(fit.C >= fit.c);
    // the scaled peak is (4 pi)^-1: the lower constant cannot beat it and
    // the upper constant must reach it; C = 4 matches the tail exactly
    CHECK(fit.c > 0.05);
    CHECK(fit.c <= 1.0 / (4.0 * M_PI) + 1e-9);
    CHECK(fit.C >= 1.0 / (4.0 * M_PI) - 1e-9);
    CHECK(fit.C <= 4.1);
}

TEST_CASE("deviation from the matched gaussian vanishes on exact data") {
    Grid g = Grid::box(2, {-8.0, -8.0}, {8.0, 8.0}, 0.25);
    KernelSnapshot s;
    s.t = 4.0;
    s.y = {0.0, 0.0};
    s.P = GridFunction(g);
    for (long j = 0; j < g.n[1]; ++j)
        for (long i = 0; i < g.n[0]; ++i)
            s.P.at(i, j) = oracle::heat_kernel_2d(s.t, g.x(i), g.y(j));
    s.mass = 1.0;
    DeviationResult dev = clt_deviation(s, 1.0, Mat2{1.0, 1.0, 0.0});
    CHECK(dev.sup_scaled < 1e-10);
    // wrong prefactor shows up at the kernel scale
    DeviationResult off = clt_deviation(s, 1.1, Mat2{1.0, 1.0, 0.0});
    CHECK(off.sup_scaled > 1e-3);
}

TEST_CASE("kernel mass converges to the invariant density value") {
    // random torus medium: mass(t) from source y approaches m(y)
    CoefficientField f = sample_field(2, EllipticityParams{}, 2,
                                      Topology::torus, 9);
    Grid g = Grid::torus_grid(2, 9, 2);
    GridOperator op = assemble_generator(f, g);
    auto val = invariant_density_at(op, {4.0, 4.0}, 1e-4);
    CHECK(val.converged);
    auto snaps = green_evolve(op, {4.0, 4.0}, {val.t_star});
    CHECK(snaps[0].mass == doctest::Approx(val.m_y).epsilon(1e-3));
    CHECK(val.m_y > 0.1);
    CHECK(val.m_y < 10.0);
}
