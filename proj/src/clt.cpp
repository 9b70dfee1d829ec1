#include "homolab/clt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "homolab/parallel.hpp"

namespace homolab {
namespace {

double min_image(double d, double period) {
    d = std::fmod(d, period);
    if (d > 0.5 * period) d -= period;
    if (d < -0.5 * period) d += period;
    return d;
}

bool is_power_of_three(long n, int& p) {
    p = 0;
    while (n > 1 && n % 3 == 0) {
        n /= 3;
        ++p;
    }
    return n == 1;
}

}  // namespace

CltRun run_local_clt(const GridOperator& op, const Mat2& abar,
                     const CltConfig& cfg) {
    const Grid& g = op.grid;
    const int d = g.dim;
    if (!(cfg.R >= 1.0)) throw ValidationError("data scale R must be >= 1");
    if (!(cfg.M > 0.0)) throw ValidationError("amplitude M must be positive");
    if (cfg.times.empty()) throw ValidationError("no times given");
    if (cfg.times.front() < cfg.R * cfg.R * (1.0 - 1e-9))
        throw ValidationError("times must start at R^2");
    for (std::size_t k = 1; k < cfg.times.size(); ++k) {
        const double ratio = cfg.times[k] / cfg.times[k - 1];
        if (std::fabs(ratio - 2.0) > 1e-9)
            throw ValidationError("times must be dyadic");
    }

    const double R2 = cfg.R * cfg.R;
    const double Lambda = op.Lambda;
    GridFunction v0(g, 0.0);
    const long nj = d == 2 ? g.n[1] : 1;
    auto disp = [&](long i, long j, double& dx, double& dy) {
        dx = g.x(i) - cfg.center[0];
        dy = d == 2 ? g.y(j) - cfg.center[1] : 0.0;
        if (g.torus) {
            dx = min_image(dx, g.period);
            if (d == 2) dy = min_image(dy, g.period);
        }
    };
    const double amp = cfg.M * std::pow(cfg.R, -static_cast<double>(d));
    for (long j = 0; j < nj; ++j)
        for (long i = 0; i < g.n[0]; ++i) {
            double dx, dy;
            disp(i, j, dx, dy);
            v0.at(i, j) = amp * std::exp(-(dx * dx + dy * dy) / R2);
        }

    if (!g.torus) {
        // crude-envelope budget at the final time: the Dirichlet truncation
        // must sit below the Gaussian tail the data can reach
        const double T = cfg.times.back();
        double edge2 = 1e300;
        for (long i : {0L, g.n[0] - 1}) {
            double dx, dy;
            disp(i, 0, dx, dy);
            edge2 = std::min(edge2, dx * dx);
            (void)dy;
        }
        if (d == 2)
            for (long j : {0L, g.n[1] - 1}) {
                double dx, dy;
                disp(0, j, dx, dy);
                edge2 = std::min(edge2, dy * dy);
                (void)dx;
            }
        const double tail = std::exp(-edge2 / (4.0 * Lambda * (T + R2)));
        if (tail > cfg.truncation_budget)
            throw ValidationError(
                "truncation box too small for the requested horizon");
    }

    auto run = solve_cauchy_dirichlet(op, v0, BoundaryFn{}, cfg.times);

    CltRun out;
    out.cfg = cfg;
    out.abar = abar;
    const double hd = d == 2 ? g.h * g.h : g.h;
    for (auto& [t, v] : run.snapshots) {
        const double ct = hd * pairwise_sum(v.v);
        double sup = 0.0;
#pragma omp parallel for schedule(static) reduction(max : sup)
        for (long long j = 0; j < nj; ++j) {
            for (long i = 0; i < g.n[0]; ++i) {
                double dx, dy;
                disp(i, static_cast<long>(j), dx, dy);
                const double pb = gaussian_kernel(g, abar, t, dx, dy);
                const double w =
                    std::exp((dx * dx + dy * dy) / (4.0 * Lambda * (t + R2)));
                const double dev =
                    std::fabs(v.at(i, static_cast<long>(j)) - ct * pb) * w;
                sup = std::max(sup, dev);
            }
        }
        out.t.push_back(t);
        out.c_t.push_back(ct);
        out.error.push_back(sup * std::pow(t, 0.5 * static_cast<double>(d)) /
                            cfg.M);
    }
    out.rate = fit_rate_tail(out.t, out.error);
    out.gamma_fit = out.rate.exponent;
    out.r2 = out.rate.r2;
    return out;
}

double c_limit(const CltRun& run, double rtol) {
    const auto& c = run.c_t;
    if (c.size() < 3) throw ValidationError("c_t ladder too short");
    const std::size_t n = c.size();
    const double d_last = std::fabs(c[n - 1] - c[n - 2]);
    const double d_prev = std::fabs(c[n - 2] - c[n - 3]);
    if (d_last > rtol * std::fabs(c[n - 1]) || d_last > d_prev) {
        std::ostringstream msg;
        msg << "c_t tail is not Cauchy at rtol " << rtol
            << " (last increments " << d_prev << ", " << d_last << ")";
        throw NumericalError(msg.str());
    }
    return c[n - 1];
}

double c_from_measure(const GridFunction& v0, const GridFunction& m) {
    if (!same_layout(v0.grid, m.grid))
        throw ValidationError("data and density live on different grids");
    const double hd =
        v0.grid.dim == 2 ? v0.grid.h * v0.grid.h : v0.grid.h;
    return hd * pairwise_dot(v0.v, m.v);
}

FlatnessProfile multiscale_flatness(const GridFunction& f, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ValidationError("flatness exponent must lie in (0, 1]");
    const Grid& g = f.grid;
    int p = 0;
    if (!is_power_of_three(g.n[0], p) ||
        (g.dim == 2 && g.n[1] != g.n[0]))
        throw ValidationError("grid does not align with the triadic partition");

    FlatnessProfile prof;
    prof.alpha = alpha;
    std::vector<double> cells = f.v;  // node values as unit-cube cell values
    long n = g.n[0];
    const double mean =
        pairwise_sum(cells) / static_cast<double>(cells.size());

    std::vector<std::pair<double, double>> terms;  // (scale 3^-l, term)
    for (int l = p; l >= 0; --l) {
        double dev = 0.0;
        for (double v : cells) dev += std::fabs(v - mean);
        dev /= static_cast<double>(cells.size());
        terms.emplace_back(std::pow(3.0, -l), std::pow(3.0, -l * alpha) * dev);
        if (l == 0) break;
        // coarsen by 3 per axis
        const long nc = n / 3;
        std::vector<double> coarse(
            static_cast<std::size_t>(g.dim == 2 ? nc * nc : nc), 0.0);
        if (g.dim == 2) {
            for (long j = 0; j < n; ++j)
                for (long i = 0; i < n; ++i)
                    coarse[static_cast<std::size_t>((i / 3) + nc * (j / 3))] +=
                        cells[static_cast<std::size_t>(i + n * j)];
            for (double& v : coarse) v /= 9.0;
        } else {
            for (long i = 0; i < n; ++i)
                coarse[static_cast<std::size_t>(i / 3)] +=
                    cells[static_cast<std::size_t>(i)];
            for (double& v : coarse) v /= 3.0;
        }
        cells = std::move(coarse);
        n = nc;
    }
    std::sort(terms.begin(), terms.end());
    for (const auto& [s, t] : terms) {
        prof.scale.push_back(s);
        prof.term.push_back(t);
        prof.total += t;
    }
    return prof;
}

double weak_norm_value(const GridFunction& f, double target, double alpha) {
    const double mean =
        pairwise_sum(f.v) / static_cast<double>(f.v.size());
    return std::fabs(mean - target) + multiscale_flatness(f, alpha).total;
}

WeakNormLadder weak_norm_decay(
    const std::function<double(double, double, double)>& f_eps, double target,
    const std::vector<double>& eps_ladder, double alpha, int p, int dim) {
    if (eps_ladder.empty()) throw ValidationError("empty epsilon ladder");
    if (p < 1 || p > 12) throw ValidationError("cell exponent out of range");
    const long n = std::lround(std::pow(3.0, p));
    Grid g;
    g.dim = dim;
    g.n[0] = n;
    g.n[1] = dim == 2 ? n : 1;
    g.h = 1.0 / static_cast<double>(n);

    WeakNormLadder out;
    std::vector<std::pair<double, double>> rows;
    for (double eps : eps_ladder) {
        if (!(eps > 0.0 && eps <= 1.0))
            throw ValidationError("epsilon must lie in (0, 1]");
        GridFunction f(g, 0.0);
        for (long j = 0; j < (dim == 2 ? n : 1); ++j)
            for (long i = 0; i < n; ++i) {
                const double x = (static_cast<double>(i) + 0.5) * g.h;
                const double y =
                    dim == 2 ? (static_cast<double>(j) + 0.5) * g.h : 0.0;
                f.at(i, j) = f_eps(eps, x, y);
            }
        rows.emplace_back(eps, weak_norm_value(f, target, alpha));
    }
    std::sort(rows.begin(), rows.end(), std::greater<>());
    std::vector<double> inv_eps, vals;
    for (const auto& [e, v] : rows) {
        out.eps.push_back(e);
        out.value.push_back(v);
        inv_eps.push_back(1.0 / e);
        vals.push_back(v);
    }
    out.rate = fit_rate(inv_eps, vals, 0, inv_eps.size());
    return out;
}

}  // namespace homolab
