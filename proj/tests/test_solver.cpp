#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "homolab/operator.hpp"
#include "homolab/parallel.hpp"
#include "oracles.hpp"

using namespace homolab;

namespace {

GridOperator constant_op(const Grid& g, double a11, double a22, double a12,
                         bool all_rows = false) {
    FieldFn f = [=](double, double) { return Mat2{a11, a22, a12}; };
    const Mat2 m{a11, a22, a12};
    const bool one_d = a22 == 0.0 && a12 == 0.0;
    const double lo = one_d ? a11 : m.eig_min();
    const double hi = one_d ? a11 : m.eig_max();
    return assemble_generator_fn(f, g, lo, hi, all_rows);
}

}  // namespace

TEST_CASE("elliptic Dirichlet solve is exact for constant a in 1D") {
    // -a u'' = 1 on (0, L), u(0) = u(L) = 0: u = x (L - x) / (2 a)
    const double a = 2.0, L = 8.0, h = 0.25;
    Grid g = Grid::box(1, {0.0, 0.0}, {L, 0.0}, h);
    GridOperator op = constant_op(g, a, 0.0, 0.0);
    GridFunction f(g, 1.0);
    GridFunction u = solve_elliptic_dirichlet(op, f, BoundaryFn{}, 1e-12);
    for (long i = 0; i < g.n[0]; ++i) {
        const double x = g.x(i);
        CHECK(u.at(i, 0) ==
              doctest::Approx(x * (L - x) / (2.0 * a)).epsilon(1e-9));
    }
}

TEST_CASE("elliptic Dirichlet solve tracks a piecewise medium") {
    const double L = 9.0, h = 1.0 / 16.0;
    CoefficientField fld = two_point_field_1d(13, 1.0, 2.0,
                                              Topology::free_space);
    Grid g = Grid::box(1, {0.0, 0.0}, {L, 0.0}, h);
    GridOperator op = assemble_generator(fld, g);
    GridFunction f(g, 1.0);
    GridFunction u = solve_elliptic_dirichlet(op, f, BoundaryFn{}, 1e-12);

    // reference: exact cellwise solution of the unblended two-valued medium
    std::vector<double> cells;
    for (long c = 0; c < static_cast<long>(L); ++c)
        cells.push_back(fld.cell_matrix(c, 0).a11);
    std::vector<double> ref =
        oracle::ode_dirichlet_1d(cells, L, static_cast<int>(g.n[0]) - 1);
    double sup = 0.0, scale = 0.0;
    for (long i = 0; i < g.n[0]; ++i) {
        sup = std::max(sup, std::fabs(u.at(i, 0) - ref[static_cast<size_t>(i)]));
        scale = std::max(scale, std::fabs(ref[static_cast<size_t>(i)]));
    }
    // blend zones (width rho) and the h-discretization both perturb at O(h)
    CHECK(sup / scale < 0.05);
}

TEST_CASE("solver is linear to near machine precision") {
    Grid g = Grid::box(2, {0.0, 0.0}, {1.0, 1.0}, 0.125);
    CoefficientField fld = sample_field(19, EllipticityParams{}, 2,
                                        Topology::free_space);
    GridOperator op = assemble_generator(fld, g);
    GridFunction f1(g), f2(g), fc(g);
    for (long j = 0; j < g.n[1]; ++j)
        for (long i = 0; i < g.n[0]; ++i) {
            f1.at(i, j) = std::sin(2.1 * g.x(i)) + 0.3;
            f2.at(i, j) = std::cos(1.7 * g.y(j));
            fc.at(i, j) = 2.0 * f1.at(i, j) - 3.0 * f2.at(i, j);
        }
    GridFunction u1 = solve_elliptic_dirichlet(op, f1, BoundaryFn{}, 1e-13);
    GridFunction u2 = solve_elliptic_dirichlet(op, f2, BoundaryFn{}, 1e-13);
    GridFunction uc = solve_elliptic_dirichlet(op, fc, BoundaryFn{}, 1e-13);
    double sup = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < uc.v.size(); ++k) {
        sup = std::max(sup,
                       std::fabs(uc.v[k] - (2.0 * u1.v[k] - 3.0 * u2.v[k])));
        scale = std::max(scale, std::fabs(uc.v[k]));
    }
    CHECK(sup <= 1e-12 * std::max(scale, 1.0));
}

TEST_CASE("shifted solve inverts (sigma - L) exactly on torus eigenfunctions") {
    const long P = 8;
    Grid g = Grid::torus_grid(1, P, 4);
    const double a = 1.5, sigma = 0.7;
    GridOperator op = constant_op(g, a, 0.0, 0.0);
    const double k = 2.0 * M_PI / static_cast<double>(P);
    GridFunction f(g);
    for (long i = 0; i < g.n[0]; ++i) f.at(i, 0) = std::cos(k * g.x(i));
    GridFunction u = solve_shifted(op, sigma, f, 1e-13);
    // L cos(kx) = -a (4/h^2) sin^2(kh/2) cos(kx) on the lattice
    const double mu =
        a * 4.0 / (g.h * g.h) * std::pow(std::sin(0.5 * k * g.h), 2);
    for (long i = 0; i < g.n[0]; ++i)
        CHECK(u.at(i, 0) ==
              doctest::Approx(f.at(i, 0) / (sigma + mu)).epsilon(1e-10));
}

TEST_CASE("shifted solve requires a positive shift off the torus kernel") {
    Grid g = Grid::torus_grid(1, 8, 2);
    GridOperator op = constant_op(g, 1.0, 0.0, 0.0);
    GridFunction f(g, 1.0);
    CHECK_THROWS_AS(solve_shifted(op, 0.0, f), ValidationError);
}

TEST_CASE("explicit and implicit schemes agree at small dt") {
    Grid g = Grid::box(2, {-1.0, -1.0}, {1.0, 1.0}, 0.125);
    CoefficientField fld = sample_field(23, EllipticityParams{}, 2,
                                        Topology::free_space);
    GridOperator op = assemble_generator(fld, g);
    GridFunction u0(g);
    for (long j = 0; j < g.n[1]; ++j)
        for (long i = 0; i < g.n[0]; ++i) {
            const double x = g.x(i), y = g.y(j);
            u0.at(i, j) = std::exp(-4.0 * (x * x + y * y));
        }
    const std::vector<double> times{0.05, 0.1};
    auto ex = solve_cauchy_dirichlet(op, u0, BoundaryFn{}, times,
                                     Scheme::explicit_euler);
    auto im = solve_cauchy_dirichlet(op, u0, BoundaryFn{}, times,
                                     Scheme::implicit_euler, ex.dt);
    CHECK(ex.snapshots.size() == 2);
    CHECK(im.snapshots.size() == 2);
    for (std::size_t s = 0; s < times.size(); ++s) {
        CHECK(ex.snapshots[s].first == doctest::Approx(times[s]));
        double sup = 0.0;
        const auto& a = ex.snapshots[s].second.v;
        const auto& b = im.snapshots[s].second.v;
        for (std::size_t kk = 0; kk < a.size(); ++kk)
            sup = std::max(sup, std::fabs(a[kk] - b[kk]));
        // both schemes are first order in dt; difference is O(dt)
        CHECK(sup < 20.0 * ex.dt);
    }
}

TEST_CASE("time-dependent boundary data is honored at snapshot times") {
    Grid g = Grid::box(1, {0.0, 0.0}, {1.0, 0.0}, 0.125);
    GridOperator op = constant_op(g, 1.0, 0.0, 0.0);
    GridFunction u0(g, 0.0);
    BoundaryFn bc = [](double t, double x, double) {
        return x < 0.5 ? t : 0.0;
    };
    auto run = solve_cauchy_dirichlet(op, u0, bc, {0.25});
    CHECK(run.snapshots[0].second.at(0, 0) == doctest::Approx(0.25));
    CHECK(run.snapshots[0].second.at(g.n[0] - 1, 0) == 0.0);
    // interior has relaxed toward the linear-in-x steady profile direction
    CHECK(run.snapshots[0].second.at(1, 0) > 0.0);
}

TEST_CASE("cauchy solver validates snapshot times") {
    Grid g = Grid::box(1, {0.0, 0.0}, {1.0, 0.0}, 0.25);
    GridOperator op = constant_op(g, 1.0, 0.0, 0.0);
    GridFunction u0(g, 0.0);
    CHECK_THROWS_AS(
        solve_cauchy_dirichlet(op, u0, BoundaryFn{}, {0.2, 0.1}),
        ValidationError);
    CHECK_THROWS_AS(solve_cauchy_dirichlet(op, u0, BoundaryFn{}, {-1.0}),
                    ValidationError);
    CHECK(solve_cauchy_dirichlet(op, u0, BoundaryFn{}, {}).snapshots.empty());
}
