#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "homolab/error.hpp"

namespace homolab {

// Rectangular node lattice. Torus grids cover [0, period)^d with n = period/h
// nodes per axis; free grids cover a closed box whose outermost node ring is
// the Dirichlet boundary. Storage is x-fastest row-major.
struct Grid {
    int dim = 2;
    std::array<long, 2> n{1, 1};
    double h = 1.0;
    bool torus = false;
    double period = 0.0;
    std::array<double, 2> origin{0.0, 0.0};

    long node_count() const { return dim == 2 ? n[0] * n[1] : n[0]; }
    long idx(long i, long j) const { return i + n[0] * j; }
    double x(long i) const { return origin[0] + h * static_cast<double>(i); }
    double y(long j) const { return origin[1] + h * static_cast<double>(j); }

    bool on_boundary(long i, long j) const {
        if (torus) return false;
        if (i == 0 || i == n[0] - 1) return true;
        return dim == 2 && (j == 0 || j == n[1] - 1);
    }

    static Grid torus_grid(int dim, long period, long nodes_per_unit) {
        if (period < 3) throw ValidationError("torus period must be >= 3");
        if (nodes_per_unit < 1)
            throw ValidationError("nodes_per_unit must be >= 1");
        Grid g;
        g.dim = dim;
        g.torus = true;
        g.period = static_cast<double>(period);
        g.h = 1.0 / static_cast<double>(nodes_per_unit);
        g.n[0] = period * nodes_per_unit;
        g.n[1] = dim == 2 ? period * nodes_per_unit : 1;
        return g;
    }

    static Grid box(int dim, std::array<double, 2> lo, std::array<double, 2> hi,
                    double h) {
        if (h <= 0.0) throw ValidationError("mesh size must be positive");
        Grid g;
        g.dim = dim;
        g.h = h;
        g.origin = lo;
        for (int a = 0; a < dim; ++a) {
            double len = hi[static_cast<std::size_t>(a)] -
                         lo[static_cast<std::size_t>(a)];
            if (len <= 0.0) throw ValidationError("box extent must be positive");
            g.n[static_cast<std::size_t>(a)] =
                static_cast<long>(std::lround(len / h)) + 1;
            if (g.n[static_cast<std::size_t>(a)] < 3)
                throw ValidationError("box too small for the mesh size");
        }
        if (dim == 1) g.n[1] = 1;
        return g;
    }
};

inline bool same_layout(const Grid& a, const Grid& b) {
    return a.dim == b.dim && a.n == b.n && a.torus == b.torus &&
           std::fabs(a.h - b.h) < 1e-15;
}

struct GridFunction {
    Grid grid;
    std::vector<double> v;

    GridFunction() = default;
    explicit GridFunction(const Grid& g, double fill = 0.0)
        : grid(g), v(static_cast<std::size_t>(g.node_count()), fill) {}

    double& at(long i, long j) { return v[static_cast<std::size_t>(grid.idx(i, j))]; }
    double at(long i, long j) const {
        return v[static_cast<std::size_t>(grid.idx(i, j))];
    }
};

}  // namespace homolab
