#include "homolab/adjoint.hpp"

#include <algorithm>
#include <cmath>

#include "homolab/parallel.hpp"
#include "homolab/rng.hpp"
#include "homolab/solver.hpp"

namespace homolab {
namespace {

double mean_of(const std::vector<double>& v) {
    return pairwise_sum(v) / static_cast<double>(v.size());
}

double norm2_of(const std::vector<double>& v) {
    return std::sqrt(pairwise_dot(v, v));
}

double transpose_residual(const GridOperator& op, const std::vector<double>& m,
                          std::vector<double>& scratch) {
    apply_transpose(op, m, scratch);
    return norm2_of(scratch);
}

long wrap(long i, long n) {
    long r = i % n;
    return r < 0 ? r + n : r;
}

double min_image_dist2(const Grid& g, std::array<double, 2> a,
                       std::array<double, 2> b) {
    double dx = a[0] - b[0];
    double dy = g.dim == 2 ? a[1] - b[1] : 0.0;
    if (g.torus) {
        dx = std::remainder(dx, g.period);
        dy = g.dim == 2 ? std::remainder(dy, g.period) : 0.0;
    }
    return dx * dx + dy * dy;
}

// copy the sub-box of half-width nr nodes around the node nearest c,
// wrapping on the torus; the result is a free grid carrying the same h
GridFunction gather_box(const GridFunction& f, std::array<double, 2> c,
                        long nr) {
    const Grid& g = f.grid;
    const long ci = wrap(std::lround((c[0] - g.origin[0]) / g.h), g.n[0]);
    const long cj =
        g.dim == 2 ? wrap(std::lround((c[1] - g.origin[1]) / g.h), g.n[1]) : 0;
    Grid sub;
    sub.dim = g.dim;
    sub.h = g.h;
    sub.n[0] = 2 * nr + 1;
    sub.n[1] = g.dim == 2 ? 2 * nr + 1 : 1;
    sub.origin[0] = -g.h * static_cast<double>(nr);
    sub.origin[1] = g.dim == 2 ? -g.h * static_cast<double>(nr) : 0.0;
    GridFunction out(sub, 0.0);
    const long nj = g.dim == 2 ? sub.n[1] : 1;
    for (long j = 0; j < nj; ++j)
        for (long i = 0; i < sub.n[0]; ++i) {
            long gi = ci + i - nr, gj = g.dim == 2 ? cj + j - nr : 0;
            if (g.torus) {
                gi = wrap(gi, g.n[0]);
                gj = g.dim == 2 ? wrap(gj, g.n[1]) : 0;
            } else if (gi < 0 || gi >= g.n[0] || gj < 0 ||
                       (g.dim == 2 && gj >= g.n[1])) {
                throw ValidationError("ball leaves the free grid");
            }
            out.at(i, j) = f.at(gi, gj);
        }
    return out;
}

InvariantDensity finalize_measure(const GridOperator& op,
                                  std::vector<double>&& m_raw,
                                  const StationaryOptions& opt,
                                  InvariantDensity&& d) {
    const double mean = mean_of(m_raw);
    if (!(mean > 0.0))
        throw NumericalError("stationary measure lost positivity (mean)");
    for (double& v : m_raw) v /= mean;
    double mn = m_raw[0];
    for (double v : m_raw) mn = std::min(mn, v);
    if (!(mn > 0.0))
        throw NumericalError("stationary measure is not strictly positive");
    d.m = GridFunction(op.grid, 0.0);
    d.m.v = std::move(m_raw);
    std::vector<double> scratch(d.m.v.size());
    d.residual = transpose_residual(op, d.m.v, scratch);
    d.m_norm = norm2_of(d.m.v);
    if (d.residual > opt.residual_tol * d.m_norm)
        throw NumericalError("stationary measure residual above tolerance");
    return std::move(d);
}

}  // namespace

GridOperator adjoint_operator(const GridOperator& op) {
    if (!op.grid.torus)
        throw ValidationError("adjoint oracle needs a torus operator");
    GridOperator out = op;
    const std::size_t stride = static_cast<std::size_t>(op.stride);
    const long rows = op.rows();
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * stride;
        for (int k = 0; k < op.stride; ++k) {
            const long nb = op.nbr[base + static_cast<std::size_t>(k)];
            const int ko = op.stride == 9 ? kOpp2[k] : kOpp1[k];
            out.w[base + static_cast<std::size_t>(k)] =
                op.w[static_cast<std::size_t>(nb) * stride +
                     static_cast<std::size_t>(ko)];
        }
    }
    return out;
}

InvariantDensity stationary_measure(const GridOperator& op,
                                    const StationaryOptions& opt) {
    if (!op.grid.torus)
        throw ValidationError("stationary measure needs a torus operator");
    if (opt.force_power && opt.force_solver)
        throw ValidationError("conflicting engine selection");
    InvariantDensity d;
    const std::size_t n = static_cast<std::size_t>(op.rows());
    std::vector<double> m(n, 1.0), scratch(n);
    const double dt = default_dt(op);
    const long check_every = 500;

    if (!opt.force_solver) {
        double mnorm = norm2_of(m);
        while (d.power_sweeps < opt.power_cap) {
            for (long s = 0; s < check_every && d.power_sweeps < opt.power_cap;
                 ++s) {
                adjoint_step(op, m, dt, scratch);
                ++d.power_sweeps;
            }
            const double mean = mean_of(m);
            for (double& v : m) v /= mean;  // mass is conserved up to rounding
            mnorm = norm2_of(m);
            if (transpose_residual(op, m, scratch) <=
                opt.residual_tol * mnorm) {
                d.method = "power";
                return finalize_measure(op, std::move(m), opt, std::move(d));
            }
        }
        if (opt.force_power)
            throw NumericalError(
                "power iteration missed the residual tolerance within its cap");
    }

    // one exact inverse-iteration step at shift 0: the rank-one augmented
    // system (L^T + c 11^T/N) m = c 1 has the mean-1 null vector of L^T as
    // its unique solution (left-multiplying by 1^T forces mean(m) = 1).
    // c = 1 keeps the solver's relative-residual threshold on the same scale
    // as the final ||L^T m|| <= tol ||m|| check (both rhs and m have norm
    // ~ sqrt(N)); a c of operator-norm size would make the stop criterion
    // h^-2 times looser than the check it must satisfy
    const double c0 = 1.0;
    const double cn = c0 / static_cast<double>(n);
    auto A = [&](const std::vector<double>& in, std::vector<double>& out) {
        apply_transpose(op, in, out);
        const double shift = cn * pairwise_sum(in);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            out[static_cast<std::size_t>(i)] += shift;
    };
    std::vector<double> rhs(n, c0), inv_diag(n);
    const std::size_t stride = static_cast<std::size_t>(op.stride);
    for (std::size_t r = 0; r < n; ++r) {
        const double dg = op.w[r * stride] + cn;
        inv_diag[r] = dg != 0.0 ? 1.0 / dg : 1.0;
    }
    auto rep = bicgstab(A, rhs, m, inv_diag, 1e-12, opt.solver_cap);
    d.solver_iters = rep.iters;
    if (!rep.converged)
        throw NumericalError("stationary-measure solve failed to converge");
    d.method = d.power_sweeps > 0 ? "power+solve" : "solve";
    return finalize_measure(op, std::move(m), opt, std::move(d));
}

InvariantDensity stationary_measure_torus(const CoefficientField& field,
                                          long period, double h,
                                          const StationaryOptions& opt) {
    // constant fields are periodic with every period
    if (field.spec().law != FieldLaw::constant) {
        if (field.spec().topology != Topology::torus)
            throw ValidationError("field must be periodic");
        if (field.spec().period != period)
            throw ValidationError("field period does not match the request");
    }
    const long npu = std::lround(1.0 / h);
    if (npu < 1 || std::fabs(h * static_cast<double>(npu) - 1.0) > 1e-12)
        throw ValidationError("mesh size must divide the unit cell");
    Grid g = Grid::torus_grid(field.dimension(), period, npu);
    return stationary_measure(assemble_generator(field, g), opt);
}

double operator_norm_bound(const GridOperator& op) {
    const std::size_t stride = static_cast<std::size_t>(op.stride);
    double best = 0.0;
    for (long r = 0; r < op.rows(); ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < stride; ++k)
            s += std::fabs(op.w[static_cast<std::size_t>(r) * stride + k]);
        best = std::max(best, s);
    }
    return best;
}

double second_singular_value(const GridOperator& op, double rtol, long cap) {
    if (!op.grid.torus)
        throw ValidationError("singular-value probe needs a torus operator");
    const std::size_t n = static_cast<std::size_t>(op.rows());
    const double nb = operator_norm_bound(op);
    const double c = nb * nb;  // pushes the trivial direction above sigma_2^2
    std::vector<double> t1(n);
    auto M = [&](const std::vector<double>& in, std::vector<double>& out) {
        apply(op, in, t1);
        apply_transpose(op, t1, out);
        const double shift = c * pairwise_sum(in) / static_cast<double>(n);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            out[static_cast<std::size_t>(i)] += shift;
    };
    std::vector<double> x(n), y(n), My(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = u01(counter_hash(0x5157u, static_cast<std::uint64_t>(i), 0, 0)) -
               0.5;
    double xn = norm2_of(x);
    for (double& v : x) v /= xn;

    double rho_prev = 0.0;
    for (long it = 0; it < cap; ++it) {
        std::fill(y.begin(), y.end(), 0.0);
        auto rep = conjugate_gradient(M, x, y, 1e-12, 200000);
        if (!rep.converged)
            throw NumericalError("singular-value solve failed to converge");
        const double yn = norm2_of(y);
        for (double& v : y) v /= yn;
        M(y, My);
        const double rho = pairwise_dot(y, My);
        if (it > 0 && std::fabs(rho - rho_prev) <= rtol * rho) {
            rho_prev = rho;
            break;
        }
        rho_prev = rho;
        x = y;
    }
    if (!(rho_prev > 0.0))
        throw NumericalError("singular-value estimate degenerated");
    return std::sqrt(rho_prev);
}

Mat2 radial_matrix(double lambda, double Lambda, double x, double y) {
    const double r2 = x * x + y * y;
    if (r2 == 0.0) return Mat2{lambda, lambda, 0.0};
    const double s = (Lambda - lambda) / r2;
    return Mat2{lambda + s * x * x, lambda + s * y * y, s * x * y};
}

RadialReport radial_example_check(double lambda, double Lambda, double r_in,
                                  double r_out, double h) {
    if (!(lambda > 0.0 && Lambda >= lambda))
        throw ValidationError("need 0 < lambda <= Lambda");
    if (!(0.0 < r_in && r_in < r_out))
        throw ValidationError("need 0 < r_in < r_out");
    if (h <= 0.0 || r_in <= 2.0 * h)
        throw ValidationError("annulus touches the origin at this mesh size");
    // positive type needs |a12| <= min(a11,a22) on every direction:
    // (Lambda-lambda)(sqrt(2)-1)/2 <= lambda
    if ((Lambda - lambda) * (std::sqrt(2.0) - 1.0) * 0.5 >
        lambda * (1.0 + 1e-12))
        throw ValidationError(
            "contrast too large for the positive-type stencil on an annulus");

    const double gamma = (Lambda - lambda) / Lambda;  // (d-1)(L-l)/L, d = 2
    const long K = std::lround(r_out / h) + 2;
    Grid g = Grid::box(2, {-h * static_cast<double>(K), -h * static_cast<double>(K)},
                       {h * static_cast<double>(K), h * static_cast<double>(K)}, h);
    FieldFn fn = [&](double x, double y) {
        return radial_matrix(lambda, Lambda, x, y);
    };
    GridOperator op = assemble_generator_fn(fn, g, lambda, Lambda, true);

    const std::size_t n = static_cast<std::size_t>(g.node_count());
    std::vector<char> unknown(n, 0);
    std::vector<double> exact(n, 0.0);
    for (long j = 0; j < g.n[1]; ++j)
        for (long i = 0; i < g.n[0]; ++i) {
            const double r = std::hypot(g.x(i), g.y(j));
            const std::size_t id = static_cast<std::size_t>(g.idx(i, j));
            exact[id] = r > 0.0 ? std::pow(r, -gamma) : 0.0;
            if (r > r_in && r < r_out) unknown[id] = 1;
        }

    auto A = [&](const std::vector<double>& in, std::vector<double>& out) {
        apply_transpose(op, in, out);
        const long rows = op.rows();
#pragma omp parallel for schedule(static)
        for (long long r = 0; r < rows; ++r) {
            const std::size_t k = static_cast<std::size_t>(r);
            if (!unknown[k]) out[k] = in[k];
        }
    };
    std::vector<double> rhs(n), x0 = exact, inv_diag(n, 1.0);
    const std::size_t stride = static_cast<std::size_t>(op.stride);
    for (std::size_t k = 0; k < n; ++k) {
        rhs[k] = unknown[k] ? 0.0 : exact[k];
        if (unknown[k] && op.w[k * stride] != 0.0)
            inv_diag[k] = 1.0 / op.w[k * stride];
    }
    auto rep = bicgstab(A, rhs, x0, inv_diag, 1e-10, 300000);
    if (!rep.converged)
        throw NumericalError("annulus solve stalled at relative residual " +
                             std::to_string(rep.rel_residual));

    RadialReport out;
    out.gamma = gamma;
    out.h = h;
    out.solver_iters = rep.iters;
    for (std::size_t k = 0; k < n; ++k) {
        if (!unknown[k]) continue;
        ++out.unknowns;
        out.rel_linf =
            std::max(out.rel_linf, std::fabs(x0[k] - exact[k]) / exact[k]);
    }
    return out;
}

IntegrabilityTable integrability_ratio(const GridFunction& m, double q,
                                       const std::vector<double>& r_ladder,
                                       std::array<double, 2> center) {
    if (!(q > 1.0)) throw ValidationError("integrability exponent needs q > 1");
    const Grid& g = m.grid;
    IntegrabilityTable tbl;
    tbl.q = q;
    for (double r : r_ladder) {
        if (r <= 0.0 || (g.torus && 2.0 * r > g.period))
            throw ValidationError("ball does not fit in the domain");
        double sum_q = 0.0, sum_1 = 0.0;
        long n_q = 0, n_1 = 0;
        const long nj = g.dim == 2 ? g.n[1] : 1;
        for (long j = 0; j < nj; ++j)
            for (long i = 0; i < g.n[0]; ++i) {
                const double d2 = min_image_dist2(
                    g, {g.x(i), g.dim == 2 ? g.y(j) : 0.0}, center);
                const double v = m.at(i, j);
                if (v < 0.0)
                    throw ValidationError("density must be nonnegative");
                if (d2 <= r * r) {
                    sum_1 += v;
                    ++n_1;
                }
                if (d2 <= 0.25 * r * r) {
                    sum_q += std::pow(v, q);
                    ++n_q;
                }
            }
        if (n_q == 0 || n_1 == 0)
            throw ValidationError("ball contains no grid nodes");
        const double lq = std::pow(sum_q / static_cast<double>(n_q), 1.0 / q);
        const double l1 = sum_1 / static_cast<double>(n_1);
        if (!(l1 > 0.0)) throw NumericalError("density vanishes on the ball");
        tbl.r.push_back(r);
        tbl.ratio.push_back(lq / l1);
    }
    return tbl;
}

HolderReport holder_bound_check(const GridFunction& m,
                                const CoefficientField& field, double r,
                                std::array<double, 2> center) {
    const Grid& g = m.grid;
    if (r <= 0.0) throw ValidationError("radius must be positive");
    if (g.torus && 4.0 * r > g.period)
        throw ValidationError("radius must be at most a quarter period");
    const double alpha = field.params().alpha0;
    const long nr = std::lround(r / g.h);
    if (nr < 1) throw ValidationError("radius below the mesh size");

    GridFunction inner = gather_box(m, center, nr);
    GridFunction outer = gather_box(m, center, 2 * nr);

    HolderReport rep;
    rep.r = r;
    rep.alpha = alpha;
    const long nj_in = g.dim == 2 ? inner.grid.n[1] : 1;
    for (long j = 0; j < nj_in; ++j)
        for (long i = 0; i < inner.grid.n[0]; ++i) {
            const double dx = inner.grid.x(i);
            const double dy = g.dim == 2 ? inner.grid.y(j) : 0.0;
            if (dx * dx + dy * dy <= r * r)
                rep.sup_inner = std::max(rep.sup_inner, std::fabs(inner.at(i, j)));
        }
    rep.seminorm = holder_seminorm(
        inner, {0, 0}, {inner.grid.n[0], g.dim == 2 ? inner.grid.n[1] : 1},
        alpha);
    double sum = 0.0;
    long cnt = 0;
    const long nj_out = g.dim == 2 ? outer.grid.n[1] : 1;
    for (long j = 0; j < nj_out; ++j)
        for (long i = 0; i < outer.grid.n[0]; ++i) {
            const double dx = outer.grid.x(i);
            const double dy = g.dim == 2 ? outer.grid.y(j) : 0.0;
            if (dx * dx + dy * dy <= 4.0 * r * r) {
                sum += std::fabs(outer.at(i, j));
                ++cnt;
            }
        }
    rep.l1_outer = sum / static_cast<double>(cnt);
    const double ra = std::pow(r, alpha);
    rep.lhs = rep.sup_inner + ra * rep.seminorm;
    rep.rhs = ra * field.params().K0 * rep.l1_outer;
    rep.fitted_C = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

}  // namespace homolab
