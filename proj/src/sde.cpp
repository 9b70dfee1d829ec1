#include "homolab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "homolab/error.hpp"
#include "homolab/parallel.hpp"
#include "homolab/rng.hpp"

namespace homolab {
namespace {

constexpr std::uint64_t kErgodicTag = 0x736465ULL;
constexpr std::uint64_t kInvarianceTag = 0x696e76ULL;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

// one path of dX = sigma(X) dW from the origin, functionals snapshotted at
// the given step counts (strictly increasing)
std::vector<PathFunctionals> simulate_multi(const CoefficientField& field,
                                            double dt,
                                            const std::vector<long>& marks,
                                            std::uint64_t path_seed) {
    const int d = field.dimension();
    const long n_max = marks.back();
    const double sqdt = std::sqrt(dt);
    double x = 0.0, y = 0.0;
    double s11 = 0.0, s22 = 0.0, s12 = 0.0;
    double max_abs = 0.0;
    std::vector<PathFunctionals> out;
    out.reserve(marks.size());
    std::size_t mark = 0;
    for (long k = 0; k < n_max; ++k) {
        const Mat2 a = field(x, y);
        s11 += a.a11;
        s22 += a.a22;
        s12 += a.a12;
        const Mat2 sig = matrix_sqrt_spd(a, d);
        const NormalPair xi =
            normal_pair(path_seed, static_cast<std::uint64_t>(k), 0);
        x += sqdt * (sig.a11 * xi.n0 + sig.a12 * xi.n1);
        if (d == 2) y += sqdt * (sig.a12 * xi.n0 + sig.a22 * xi.n1);
        if (!std::isfinite(x) || !std::isfinite(y))
            throw NumericalError("path state became non-finite");
        max_abs = std::max(max_abs, std::sqrt(x * x + y * y));
        if (mark < marks.size() && k + 1 == marks[mark]) {
            PathFunctionals f;
            const double inv = 1.0 / static_cast<double>(k + 1);
            f.avg_A = Mat2{s11 * inv, d == 2 ? s22 * inv : 0.0,
                           d == 2 ? s12 * inv : 0.0};
            f.endpoint = {x, y};
            f.max_abs = max_abs;
            f.T = dt * static_cast<double>(k + 1);
            f.steps = k + 1;
            out.push_back(f);
            ++mark;
        }
    }
    return out;
}

void check_dt(double dt) {
    if (!(dt > 0.0) || dt > 0.1 * (1.0 + 1e-12))
        throw ValidationError("time step must lie in (0, 0.1]");
}

double mean_of(const std::vector<double>& v) {
    return pairwise_sum(v) / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        sq[i] = (v[i] - mean) * (v[i] - mean);
    const double var =
        pairwise_sum(sq) / static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double ks_distance(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double f = normal_cdf(v[k]);
        d = std::max(d, std::fabs((static_cast<double>(k) + 1.0) / n - f));
        d = std::max(d, std::fabs(f - static_cast<double>(k) / n));
    }
    return d;
}

}  // namespace

Mat2 matrix_sqrt_spd(const Mat2& a, int dim) {
    if (dim != 1 && dim != 2) throw ValidationError("dimension must be 1 or 2");
    if (dim == 1) {
        if (!std::isfinite(a.a11) || !(a.a11 > 0.0))
            throw ValidationError("square root needs a positive coefficient");
        return Mat2{std::sqrt(2.0 * a.a11), 0.0, 0.0};
    }
    const double b11 = 2.0 * a.a11, b22 = 2.0 * a.a22, b12 = 2.0 * a.a12;
    const double det = b11 * b22 - b12 * b12;
    const double tr = b11 + b22;
    if (!std::isfinite(det) || !(det > 0.0) || !(tr > 0.0))
        throw ValidationError("square root needs an SPD matrix");
    const double s = std::sqrt(det);
    const double t = std::sqrt(tr + 2.0 * s);
    return Mat2{(b11 + s) / t, (b22 + s) / t, b12 / t};
}

PathFunctionals simulate_path(const CoefficientField& field, double dt,
                              double T, std::uint64_t path_seed) {
    check_dt(dt);
    if (!(T > 0.0)) throw ValidationError("horizon must be positive");
    const long n = static_cast<long>(std::ceil(T / dt - 1e-12));
    return simulate_multi(field, T / static_cast<double>(n), {n},
                          path_seed)[0];
}

ErgodicityReport ergodicity_experiment(const CoefficientField& field,
                                       long n_paths,
                                       const std::vector<double>& T_ladder,
                                       const std::vector<double>& eta_grid,
                                       const Mat2& abar, double dt,
                                       double xi) {
    check_dt(dt);
    if (n_paths < 1) throw ValidationError("need at least one path");
    if (T_ladder.empty()) throw ValidationError("empty horizon ladder");
    if (eta_grid.empty()) throw ValidationError("empty eta grid");
    if (!(xi > 0.0 && xi < 1.0))
        throw ValidationError("concentration exponent must lie in (0, 1)");
    for (std::size_t i = 0; i < eta_grid.size(); ++i) {
        if (!(eta_grid[i] > 0.0)) throw ValidationError("eta must be positive");
        if (i > 0 && eta_grid[i] <= eta_grid[i - 1])
            throw ValidationError("eta grid must be strictly increasing");
    }
    std::vector<long> marks;
    for (std::size_t i = 0; i < T_ladder.size(); ++i) {
        const double T = T_ladder[i];
        if (i > 0 && T <= T_ladder[i - 1])
            throw ValidationError("horizon ladder must be strictly increasing");
        const long n = std::lround(T / dt);
        if (n < 1 || std::fabs(static_cast<double>(n) * dt - T) > 1e-9 * T)
            throw ValidationError("ladder horizons must be multiples of dt");
        marks.push_back(n);
    }

    const int d = field.dimension();
    const std::size_t nT = T_ladder.size();
    const std::size_t np = static_cast<std::size_t>(n_paths);
    std::vector<std::vector<double>> dev(nT, std::vector<double>(np)),
        end_x(nT, std::vector<double>(np)), end_y(nT, std::vector<double>(np));

    const std::uint64_t base = field.spec().seed;
#pragma omp parallel for schedule(dynamic)
    for (long long p = 0; p < n_paths; ++p) {
        const std::uint64_t seed = counter_hash(
            base, kErgodicTag, static_cast<std::uint64_t>(p), 0);
        const auto funs = simulate_multi(field, dt, marks, seed);
        for (std::size_t i = 0; i < nT; ++i) {
            const Mat2 diff = funs[i].avg_A - abar;
            dev[i][static_cast<std::size_t>(p)] =
                d == 2 ? diff.norm2() : std::fabs(diff.a11);
            end_x[i][static_cast<std::size_t>(p)] = funs[i].endpoint[0];
            end_y[i][static_cast<std::size_t>(p)] = funs[i].endpoint[1];
        }
    }

    ErgodicityReport rep;
    rep.T = T_ladder;
    rep.eta = eta_grid;
    rep.xi = xi;
    rep.n_paths = n_paths;
    rep.low_n_paths = n_paths < 1000;
    rep.tails.assign(nT, std::vector<double>(eta_grid.size(), 0.0));
    for (std::size_t i = 0; i < nT; ++i) {
        for (std::size_t e = 0; e < eta_grid.size(); ++e) {
            long cnt = 0;
            for (double v : dev[i])
                if (v >= eta_grid[e]) ++cnt;
            rep.tails[i][e] =
                static_cast<double>(cnt) / static_cast<double>(n_paths);
        }
        rep.median_dev.push_back(median_of(dev[i]));
        const double mx = mean_of(end_x[i]);
        const double my = d == 2 ? mean_of(end_y[i]) : 0.0;
        rep.mean_endpoint.push_back({mx, my});
        rep.se_endpoint.push_back(
            {n_paths > 1 ? se_of(end_x[i], mx) : 0.0,
             d == 2 && n_paths > 1 ? se_of(end_y[i], my) : 0.0});
    }

    rep.medians_decreasing = true;
    for (std::size_t i = 1; i < nT; ++i)
        if (!(rep.median_dev[i] < rep.median_dev[i - 1]))
            rep.medians_decreasing = false;
    rep.tails_eta_monotone = true;
    for (std::size_t i = 0; i < nT; ++i)
        for (std::size_t e = 1; e < eta_grid.size(); ++e)
            if (rep.tails[i][e] > rep.tails[i][e - 1])
                rep.tails_eta_monotone = false;
    rep.tails_T_monotone = true;
    for (std::size_t e = 0; e < eta_grid.size(); ++e)
        for (std::size_t i = 1; i < nT; ++i)
            if (rep.tails[i][e] > rep.tails[i - 1][e])
                rep.tails_T_monotone = false;

    // concentration shape: log tail against eta^2 T^{1-xi}
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    long n_fit = 0;
    for (std::size_t i = 0; i < nT; ++i)
        for (std::size_t e = 0; e < eta_grid.size(); ++e) {
            const double tail = rep.tails[i][e];
            if (tail <= 0.0 || tail >= 1.0) continue;
            const double xf =
                eta_grid[e] * eta_grid[e] * std::pow(T_ladder[i], 1.0 - xi);
            const double yf = std::log(tail);
            sx += xf;
            sy += yf;
            sxx += xf * xf;
            sxy += xf * yf;
            ++n_fit;
        }
    rep.n_fit = n_fit;
    if (n_fit >= 2) {
        const double nf = static_cast<double>(n_fit);
        const double den = nf * sxx - sx * sx;
        if (std::fabs(den) > 1e-300) {
            rep.slope = (nf * sxy - sx * sy) / den;
            rep.intercept = (sy - rep.slope * sx) / nf;
        }
    }
    return rep;
}

InvarianceReport invariance_principle_check(const CoefficientField& field,
                                            long n_paths, double T,
                                            const Mat2& abar, double dt) {
    check_dt(dt);
    if (n_paths < 2) throw ValidationError("need at least two paths");
    if (!(T > 0.0)) throw ValidationError("horizon must be positive");
    const long n_steps = static_cast<long>(std::ceil(T / dt - 1e-12));
    const double dt_eff = T / static_cast<double>(n_steps);

    const int d = field.dimension();
    const std::size_t np = static_cast<std::size_t>(n_paths);
    std::vector<double> ex(np), ey(np);
    const std::uint64_t base = field.spec().seed;
#pragma omp parallel for schedule(dynamic)
    for (long long p = 0; p < n_paths; ++p) {
        const std::uint64_t seed = counter_hash(
            base, kInvarianceTag, static_cast<std::uint64_t>(p), 0);
        const auto f = simulate_multi(field, dt_eff, {n_steps}, seed)[0];
        ex[static_cast<std::size_t>(p)] = f.endpoint[0];
        ey[static_cast<std::size_t>(p)] = f.endpoint[1];
    }

    InvarianceReport rep;
    rep.n_paths = n_paths;
    rep.T = T;
    rep.target = d == 2 ? Mat2{2.0 * abar.a11, 2.0 * abar.a22, 2.0 * abar.a12}
                        : Mat2{2.0 * abar.a11, 0.0, 0.0};

    const double rt = std::sqrt(T);
    std::vector<double> u(np), v(np);
    for (std::size_t p = 0; p < np; ++p) {
        u[p] = ex[p] / rt;
        v[p] = d == 2 ? ey[p] / rt : 0.0;
    }
    const double mu = mean_of(u), mv = mean_of(v);
    auto cov_entry = [&](const std::vector<double>& a, double ma,
                         const std::vector<double>& b, double mb, double& c,
                         double& se) {
        std::vector<double> prod(np);
        for (std::size_t p = 0; p < np; ++p)
            prod[p] = (a[p] - ma) * (b[p] - mb);
        c = pairwise_sum(prod) / static_cast<double>(np - 1);
        se = se_of(prod, c * static_cast<double>(np - 1) /
                             static_cast<double>(np));
    };
    cov_entry(u, mu, u, mu, rep.cov.a11, rep.se.a11);
    if (d == 2) {
        cov_entry(v, mv, v, mv, rep.cov.a22, rep.se.a22);
        cov_entry(u, mu, v, mv, rep.cov.a12, rep.se.a12);
    } else {
        rep.cov.a22 = rep.cov.a12 = 0.0;
        rep.se.a22 = rep.se.a12 = 0.0;
    }
    auto zscore = [](double c, double t, double se) {
        return (c - t) / std::max(se, 1e-300);
    };
    rep.z.a11 = zscore(rep.cov.a11, rep.target.a11, rep.se.a11);
    rep.z.a22 = d == 2 ? zscore(rep.cov.a22, rep.target.a22, rep.se.a22) : 0.0;
    rep.z.a12 = d == 2 ? zscore(rep.cov.a12, rep.target.a12, rep.se.a12) : 0.0;

    const double mx = mean_of(ex), my = d == 2 ? mean_of(ey) : 0.0;
    rep.mean_endpoint = {mx, my};
    rep.se_endpoint = {se_of(ex, mx), d == 2 ? se_of(ey, my) : 0.0};

    std::vector<double> w(np);
    for (std::size_t p = 0; p < np; ++p)
        w[p] = u[p] / std::sqrt(rep.target.a11);
    rep.ks_stat = ks_distance(w);
    if (d == 2) {
        for (std::size_t p = 0; p < np; ++p)
            w[p] = v[p] / std::sqrt(rep.target.a22);
        rep.ks_stat = std::max(rep.ks_stat, ks_distance(w));
    }
    return rep;
}

}  // namespace homolab
