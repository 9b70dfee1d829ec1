#include "homolab/operator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "homolab/solver.hpp"

namespace homolab {
namespace {

long wrap(long i, long n) {
    long r = i % n;
    return r < 0 ? r + n : r;
}

struct BoundaryNode {
    long idx;
    double x, y;
};

std::vector<BoundaryNode> boundary_nodes(const Grid& g) {
    std::vector<BoundaryNode> out;
    if (g.torus) return out;
    long nj = g.dim == 2 ? g.n[1] : 1;
    for (long j = 0; j < nj; ++j)
        for (long i = 0; i < g.n[0]; ++i)
            if (g.on_boundary(i, j)) out.push_back({g.idx(i, j), g.x(i), g.y(j)});
    return out;
}

GridOperator assemble_impl(const FieldFn& field, const Grid& grid,
                           double lambda, double Lambda, bool all_rows) {
    GridOperator op;
    op.grid = grid;
    op.stride = grid.dim == 2 ? 9 : 3;
    op.lambda = lambda;
    op.Lambda = Lambda;
    const long rows = grid.node_count();
    const std::size_t stride = static_cast<std::size_t>(op.stride);
    op.w.assign(static_cast<std::size_t>(rows) * stride, 0.0);
    op.nbr.assign(static_cast<std::size_t>(rows) * stride, -1);
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    const long nj = grid.dim == 2 ? grid.n[1] : 1;

    for (long j = 0; j < nj; ++j) {
        for (long i = 0; i < grid.n[0]; ++i) {
            const long r = grid.idx(i, j);
            const std::size_t base = static_cast<std::size_t>(r) * stride;
            // resolve neighbors first (needed even for zeroed boundary rows,
            // so the transpose gather sees a consistent pattern)
            for (int k = 0; k < op.stride; ++k) {
                long di = grid.dim == 2 ? kOff2[k][0] : kOff1[k];
                long dj = grid.dim == 2 ? kOff2[k][1] : 0;
                long ii = i + di, jj = j + dj;
                if (grid.torus) {
                    ii = wrap(ii, grid.n[0]);
                    jj = grid.dim == 2 ? wrap(jj, grid.n[1]) : 0;
                } else if (ii < 0 || ii >= grid.n[0] || jj < 0 || jj >= nj) {
                    continue;  // off-lattice: nbr stays -1
                }
                op.nbr[base + static_cast<std::size_t>(k)] = grid.idx(ii, jj);
            }
            if (!all_rows && grid.on_boundary(i, j)) continue;

            const Mat2 a = field(grid.x(i), grid.y(j));
            if (!std::isfinite(a.a11) || !std::isfinite(a.a22) ||
                !std::isfinite(a.a12))
                throw ValidationError("non-finite coefficient at node (" +
                                      std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
            if (grid.dim == 1) {
                if (a.a11 <= 0.0)
                    throw ValidationError("coefficient not positive at node (" +
                                          std::to_string(i) + ")");
                op.w[base + 0] = -2.0 * a.a11 * inv_h2;
                op.w[base + 1] = a.a11 * inv_h2;
                op.w[base + 2] = a.a11 * inv_h2;
                continue;
            }
            const double c = std::fabs(a.a12);
            if (a.a11 - c < 0.0 || a.a22 - c < 0.0)
                throw ValidationError(
                    "coefficient breaks the positive-type stencil at node (" +
                    std::to_string(i) + ", " + std::to_string(j) +
                    "): |a12| > min(a11, a22)");
            op.w[base + 0] = -2.0 * (a.a11 + a.a22 - c) * inv_h2;
            op.w[base + 1] = (a.a11 - c) * inv_h2;
            op.w[base + 2] = (a.a11 - c) * inv_h2;
            op.w[base + 3] = (a.a22 - c) * inv_h2;
            op.w[base + 4] = (a.a22 - c) * inv_h2;
            if (a.a12 >= 0.0) {
                op.w[base + 5] = c * inv_h2;  // (1,1)
                op.w[base + 6] = c * inv_h2;  // (-1,-1)
            } else {
                op.w[base + 7] = c * inv_h2;  // (1,-1)
                op.w[base + 8] = c * inv_h2;  // (-1,1)
            }
        }
    }
    return op;
}

// shared inner kernels; the omp pragma is a no-op in the serial call path
// because each row's sum has a fixed association regardless of threading.
inline double row_apply(const GridOperator& op, const std::vector<double>& u,
                        long r) {
    const std::size_t base =
        static_cast<std::size_t>(r) * static_cast<std::size_t>(op.stride);
    double acc = 0.0;
    for (int k = 0; k < op.stride; ++k) {
        const long nb = op.nbr[base + static_cast<std::size_t>(k)];
        if (nb < 0) continue;
        acc += op.w[base + static_cast<std::size_t>(k)] *
               u[static_cast<std::size_t>(nb)];
    }
    return acc;
}

inline double row_apply_transpose(const GridOperator& op,
                                  const std::vector<double>& m, long r) {
    const std::size_t stride = static_cast<std::size_t>(op.stride);
    const std::size_t base = static_cast<std::size_t>(r) * stride;
    double acc = 0.0;
    for (int k = 0; k < op.stride; ++k) {
        const long nb = op.nbr[base + static_cast<std::size_t>(k)];
        if (nb < 0) continue;
        const int ko = op.stride == 9 ? kOpp2[k] : kOpp1[k];
        acc += op.w[static_cast<std::size_t>(nb) * stride +
                    static_cast<std::size_t>(ko)] *
               m[static_cast<std::size_t>(nb)];
    }
    return acc;
}

}  // namespace

GridOperator assemble_generator(const CoefficientField& field, const Grid& grid,
                                bool all_rows) {
    if (field.dimension() != grid.dim)
        throw ValidationError("field and grid dimensions differ");
    // free grids may sample any field (a periodic field is just a periodic
    // medium), but a torus grid needs matching periodicity; constant fields
    // are periodic with every period
    if (grid.torus && field.spec().law != FieldLaw::constant) {
        if (field.spec().topology != Topology::torus)
            throw ValidationError("torus grid needs a periodic field");
        if (std::fabs(static_cast<double>(field.spec().period) - grid.period) >
            1e-12)
            throw ValidationError("field and grid periods differ");
    }
    FieldFn fn = [&field](double x, double y) { return field(x, y); };
    return assemble_impl(fn, grid, field.params().lambda,
                         field.params().Lambda_, all_rows);
}

GridOperator assemble_generator_fn(const FieldFn& field, const Grid& grid,
                                   double lambda, double Lambda,
                                   bool all_rows) {
    if (lambda <= 0.0 || Lambda < lambda)
        throw ValidationError("need 0 < lambda <= Lambda");
    return assemble_impl(field, grid, lambda, Lambda, all_rows);
}

void apply_serial(const GridOperator& op, const std::vector<double>& u,
                  std::vector<double>& out) {
    const long rows = op.rows();
    out.resize(static_cast<std::size_t>(rows));
    for (long r = 0; r < rows; ++r)
        out[static_cast<std::size_t>(r)] = row_apply(op, u, r);
}

void apply(const GridOperator& op, const std::vector<double>& u,
           std::vector<double>& out) {
    const long rows = op.rows();
    out.resize(static_cast<std::size_t>(rows));
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < rows; ++r)
        out[static_cast<std::size_t>(r)] = row_apply(op, u, static_cast<long>(r));
}

void apply_transpose_serial(const GridOperator& op,
                            const std::vector<double>& m,
                            std::vector<double>& out) {
    const long rows = op.rows();
    out.resize(static_cast<std::size_t>(rows));
    for (long r = 0; r < rows; ++r)
        out[static_cast<std::size_t>(r)] = row_apply_transpose(op, m, r);
}

void apply_transpose(const GridOperator& op, const std::vector<double>& m,
                     std::vector<double>& out) {
    const long rows = op.rows();
    out.resize(static_cast<std::size_t>(rows));
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < rows; ++r)
        out[static_cast<std::size_t>(r)] =
            row_apply_transpose(op, m, static_cast<long>(r));
}

double cfl_limit(const GridOperator& op) {
    return op.grid.h * op.grid.h /
           (2.0 * static_cast<double>(op.grid.dim) * op.Lambda);
}

double default_dt(const GridOperator& op) { return 0.9 * cfl_limit(op); }

void parabolic_step(const GridOperator& op, std::vector<double>& u, double dt,
                    std::vector<double>& scratch) {
    if (dt <= 0.0 || dt > cfl_limit(op) * (1.0 + 1e-9))
        throw ValidationError("explicit step violates the stability bound");
    apply(op, u, scratch);
    const long rows = op.rows();
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < rows; ++r)
        u[static_cast<std::size_t>(r)] += dt * scratch[static_cast<std::size_t>(r)];
}

void parabolic_step_serial(const GridOperator& op, std::vector<double>& u,
                           double dt, std::vector<double>& scratch) {
    if (dt <= 0.0 || dt > cfl_limit(op) * (1.0 + 1e-9))
        throw ValidationError("explicit step violates the stability bound");
    apply_serial(op, u, scratch);
    const long rows = op.rows();
    for (long r = 0; r < rows; ++r)
        u[static_cast<std::size_t>(r)] += dt * scratch[static_cast<std::size_t>(r)];
}

void adjoint_step(const GridOperator& op, std::vector<double>& m, double dt,
                  std::vector<double>& scratch) {
    if (dt <= 0.0 || dt > cfl_limit(op) * (1.0 + 1e-9))
        throw ValidationError("explicit step violates the stability bound");
    apply_transpose(op, m, scratch);
    const long rows = op.rows();
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < rows; ++r)
        m[static_cast<std::size_t>(r)] += dt * scratch[static_cast<std::size_t>(r)];
}

ParabolicRun solve_cauchy_dirichlet(const GridOperator& op,
                                    const GridFunction& u0, const BoundaryFn& g,
                                    const std::vector<double>& snapshot_times,
                                    Scheme scheme, double dt_request) {
    if (!same_layout(op.grid, u0.grid))
        throw ValidationError("initial data lives on a different grid");
    for (std::size_t s = 0; s < snapshot_times.size(); ++s) {
        if (snapshot_times[s] < 0.0 ||
            (s > 0 && snapshot_times[s] <= snapshot_times[s - 1]))
            throw ValidationError("snapshot times must be increasing and >= 0");
    }
    const double cfl = cfl_limit(op);
    double dt_base = dt_request > 0.0 ? dt_request : default_dt(op);
    if (scheme == Scheme::explicit_euler && dt_base > cfl * (1.0 + 1e-9))
        throw ValidationError("requested step violates the stability bound");

    const auto bnodes = boundary_nodes(op.grid);
    GridFunction u = u0;
    auto set_boundary = [&](double t) {
        for (const auto& b : bnodes)
            u.v[static_cast<std::size_t>(b.idx)] = g ? g(t, b.x, b.y) : 0.0;
    };
    set_boundary(0.0);

    ParabolicRun run;
    run.dt = 0.0;
    std::vector<double> scratch(u.v.size());
    std::vector<double> inv_diag;
    const std::size_t stride = static_cast<std::size_t>(op.stride);

    double t = 0.0;
    for (double ts : snapshot_times) {
        double len = ts - t;
        if (len > 1e-14) {
            long steps = static_cast<long>(std::ceil(len / dt_base - 1e-12));
            if (steps < 1) steps = 1;
            const double dt = len / static_cast<double>(steps);
            run.dt = std::max(run.dt, dt);
            if (scheme == Scheme::explicit_euler) {
                for (long s = 0; s < steps; ++s) {
                    parabolic_step(op, u.v, dt, scratch);
                    t += dt;
                    set_boundary(t);
                }
            } else {
                inv_diag.resize(u.v.size());
                for (long r = 0; r < op.rows(); ++r)
                    inv_diag[static_cast<std::size_t>(r)] =
                        1.0 /
                        (1.0 - dt * op.w[static_cast<std::size_t>(r) * stride]);
                auto A = [&](const std::vector<double>& in,
                             std::vector<double>& out) {
                    apply(op, in, out);
                    const long rows = op.rows();
#pragma omp parallel for schedule(static)
                    for (long long r = 0; r < rows; ++r) {
                        std::size_t k = static_cast<std::size_t>(r);
                        out[k] = in[k] - dt * out[k];
                    }
                    for (const auto& b : bnodes)
                        out[static_cast<std::size_t>(b.idx)] =
                            in[static_cast<std::size_t>(b.idx)];
                };
                for (long s = 0; s < steps; ++s) {
                    t += dt;
                    set_boundary(t);  // identity rows keep the new data
                    std::vector<double> rhs = u.v;
                    auto rep = bicgstab(A, rhs, u.v, inv_diag, 1e-11, 100000);
                    if (!rep.converged)
                        throw NumericalError("implicit step failed to converge");
                }
            }
            run.steps += steps;
        }
        t = ts;
        run.snapshots.emplace_back(ts, u);
    }
    run.cfl_ratio = cfl > 0.0 ? run.dt / cfl : 0.0;
    return run;
}

GridFunction solve_elliptic_dirichlet(const GridOperator& op,
                                      const GridFunction& f, const BoundaryFn& g,
                                      double rtol, long cap) {
    if (op.grid.torus)
        throw ValidationError("Dirichlet solve needs a free grid");
    if (!same_layout(op.grid, f.grid))
        throw ValidationError("right-hand side lives on a different grid");
    const auto bnodes = boundary_nodes(op.grid);
    std::vector<char> is_b(static_cast<std::size_t>(op.rows()), 0);
    for (const auto& b : bnodes) is_b[static_cast<std::size_t>(b.idx)] = 1;

    auto A = [&](const std::vector<double>& in, std::vector<double>& out) {
        apply(op, in, out);
        const long rows = op.rows();
#pragma omp parallel for schedule(static)
        for (long long r = 0; r < rows; ++r) {
            std::size_t k = static_cast<std::size_t>(r);
            out[k] = is_b[k] ? in[k] : -out[k];
        }
    };
    std::vector<double> rhs = f.v;
    GridFunction u(op.grid, 0.0);
    for (const auto& b : bnodes) {
        double gv = g ? g(0.0, b.x, b.y) : 0.0;
        rhs[static_cast<std::size_t>(b.idx)] = gv;
        u.v[static_cast<std::size_t>(b.idx)] = gv;
    }
    std::vector<double> inv_diag(static_cast<std::size_t>(op.rows()), 1.0);
    const std::size_t stride = static_cast<std::size_t>(op.stride);
    for (long r = 0; r < op.rows(); ++r) {
        if (is_b[static_cast<std::size_t>(r)]) continue;
        double d = -op.w[static_cast<std::size_t>(r) * stride];
        inv_diag[static_cast<std::size_t>(r)] = d > 0.0 ? 1.0 / d : 1.0;
    }
    auto rep = bicgstab(A, rhs, u.v, inv_diag, rtol, cap);
    if (!rep.converged)
        throw NumericalError("elliptic solve stalled at relative residual " +
                             std::to_string(rep.rel_residual));
    return u;
}

GridFunction solve_shifted(const GridOperator& op, double sigma,
                           const GridFunction& f, double rtol, long cap) {
    if (!same_layout(op.grid, f.grid))
        throw ValidationError("right-hand side lives on a different grid");
    if (op.grid.torus && sigma <= 0.0)
        throw ValidationError("shift must be positive on a torus");
    if (sigma < 0.0) throw ValidationError("shift must be nonnegative");
    const auto bnodes = boundary_nodes(op.grid);
    std::vector<char> is_b(static_cast<std::size_t>(op.rows()), 0);
    for (const auto& b : bnodes) is_b[static_cast<std::size_t>(b.idx)] = 1;

    auto A = [&](const std::vector<double>& in, std::vector<double>& out) {
        apply(op, in, out);
        const long rows = op.rows();
#pragma omp parallel for schedule(static)
        for (long long r = 0; r < rows; ++r) {
            std::size_t k = static_cast<std::size_t>(r);
            out[k] = is_b[k] ? in[k] : sigma * in[k] - out[k];
        }
    };
    std::vector<double> rhs = f.v;
    for (const auto& b : bnodes) rhs[static_cast<std::size_t>(b.idx)] = 0.0;
    std::vector<double> inv_diag(static_cast<std::size_t>(op.rows()), 1.0);
    const std::size_t stride = static_cast<std::size_t>(op.stride);
    for (long r = 0; r < op.rows(); ++r) {
        if (is_b[static_cast<std::size_t>(r)]) continue;
        double d = sigma - op.w[static_cast<std::size_t>(r) * stride];
        inv_diag[static_cast<std::size_t>(r)] = d > 0.0 ? 1.0 / d : 1.0;
    }
    GridFunction u(op.grid, 0.0);
    auto rep = bicgstab(A, rhs, u.v, inv_diag, rtol, cap);
    if (!rep.converged)
        throw NumericalError("shifted solve stalled at relative residual " +
                             std::to_string(rep.rel_residual));
    return u;
}

double supersolution_envelope(double kappa, double theta, double t, double r2) {
    if (t <= 0.0 || theta <= 0.0)
        throw ValidationError("envelope needs t > 0 and theta > 0");
    return std::pow(t, -kappa) * std::exp(-r2 / (theta * t));
}

bool supersolution_params_ok(double kappa, double theta, double lambda,
                             double Lambda, int d) {
    return theta >= 4.0 * Lambda &&
           kappa <= 2.0 * lambda * static_cast<double>(d) / theta;
}

bool subsolution_params_ok(double kappa, double theta, double lambda,
                           double Lambda, int d) {
    return theta <= 4.0 * lambda &&
           kappa >= 2.0 * Lambda * static_cast<double>(d) / theta;
}

double holder_seminorm(const GridFunction& u, std::array<long, 2> lo,
                       std::array<long, 2> hi, double sigma) {
    if (sigma <= 0.0 || sigma > 1.0)
        throw ValidationError("exponent must lie in (0, 1]");
    const Grid& g = u.grid;
    long jlo = g.dim == 2 ? lo[1] : 0;
    long jhi = g.dim == 2 ? hi[1] : 1;
    if (lo[0] < 0 || hi[0] > g.n[0] || jlo < 0 ||
        (g.dim == 2 && jhi > g.n[1]) || lo[0] >= hi[0] || jlo >= jhi)
        throw ValidationError("index box out of range");
    double best = 0.0;
    const double h = g.h;
    for (long j = jlo; j < jhi; ++j) {
        for (long i = lo[0]; i < hi[0]; ++i) {
            const double u0 = u.at(i, j);
            for (long s = 1; i + s < hi[0] || j + s < jhi; s *= 2) {
                if (i + s < hi[0]) {
                    double r = std::fabs(u.at(i + s, j) - u0) /
                               std::pow(h * static_cast<double>(s), sigma);
                    best = std::max(best, r);
                }
                if (g.dim == 2 && j + s < jhi) {
                    double r = std::fabs(u.at(i, j + s) - u0) /
                               std::pow(h * static_cast<double>(s), sigma);
                    best = std::max(best, r);
                }
                if (g.dim == 2 && i + s < hi[0] && j + s < jhi) {
                    double dist = h * static_cast<double>(s) * std::sqrt(2.0);
                    double r = std::fabs(u.at(i + s, j + s) - u0) /
                               std::pow(dist, sigma);
                    best = std::max(best, r);
                }
            }
        }
    }
    return best;
}

}  // namespace homolab
