#include "homolab/green.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "homolab/parallel.hpp"

namespace homolab {
namespace {

long nearest_node(const Grid& g, double coord, int axis) {
    long i = std::lround((coord - g.origin[static_cast<std::size_t>(axis)]) / g.h);
    if (g.torus) {
        long n = g.n[static_cast<std::size_t>(axis)];
        i %= n;
        if (i < 0) i += n;
    } else if (i < 1 || i > g.n[static_cast<std::size_t>(axis)] - 2) {
        throw ValidationError("source point is not an interior grid node");
    }
    return i;
}

double min_image(double d, double period) {
    d = std::fmod(d, period);
    if (d > 0.5 * period) d -= period;
    if (d < -0.5 * period) d += period;
    return d;
}

}  // namespace

std::vector<KernelSnapshot> green_evolve(const GridOperator& op,
                                         std::array<double, 2> y,
                                         const std::vector<double>& times,
                                         double dt_request) {
    if (times.empty()) throw ValidationError("no snapshot times given");
    const Grid& g = op.grid;
    const long iy = nearest_node(g, y[0], 0);
    const long jy = g.dim == 2 ? nearest_node(g, y[1], 1) : 0;
    GridFunction u0(g, 0.0);
    const double hd = g.dim == 2 ? g.h * g.h : g.h;
    u0.at(iy, jy) = 1.0 / hd;
    const std::array<double, 2> y_node{g.x(iy), g.dim == 2 ? g.y(jy) : 0.0};

    auto run = solve_cauchy_dirichlet(op, u0, BoundaryFn{}, times,
                                      Scheme::explicit_euler, dt_request);
    std::vector<KernelSnapshot> out;
    out.reserve(run.snapshots.size());
    for (auto& [t, P] : run.snapshots) {
        KernelSnapshot s;
        s.t = t;
        s.y = y_node;
        s.mass = hd * pairwise_sum(P.v);
        s.P = std::move(P);
        if (!(s.mass > 0.0) || !std::isfinite(s.mass))
            throw NumericalError("kernel mass degenerated during evolution");
        out.push_back(std::move(s));
    }
    return out;
}

double kernel_mass(const KernelSnapshot& s) {
    const double hd =
        s.P.grid.dim == 2 ? s.P.grid.h * s.P.grid.h : s.P.grid.h;
    return hd * pairwise_sum(s.P.v);
}

InvariantDensityValue invariant_density_at(const GridOperator& op,
                                           std::array<double, 2> y, double rtol,
                                           double t_max) {
    if (!(rtol > 1e-8 && rtol < 1e-2))
        throw ValidationError("mass-limit rtol must lie in (1e-8, 1e-2)");
    if (!op.grid.torus)
        throw ValidationError("invariant density needs a torus grid");

    const Grid& g = op.grid;
    const long iy = nearest_node(g, y[0], 0);
    const long jy = g.dim == 2 ? nearest_node(g, y[1], 1) : 0;
    const double hd = g.dim == 2 ? g.h * g.h : g.h;
    std::vector<double> u(static_cast<std::size_t>(g.node_count()), 0.0);
    u[static_cast<std::size_t>(g.idx(iy, jy))] = 1.0 / hd;
    std::vector<double> scratch(u.size());
    const double dt_base = default_dt(op);

    InvariantDensityValue v;
    v.y = {g.x(iy), g.dim == 2 ? g.y(jy) : 0.0};
    double t = 0.0;
    for (double ts = 1.0; ts <= t_max * (1.0 + 1e-12); ts *= 2.0) {
        const double len = ts - t;
        const long steps = static_cast<long>(std::ceil(len / dt_base - 1e-12));
        const double dt = len / static_cast<double>(steps);
        for (long s = 0; s < steps; ++s) parabolic_step(op, u, dt, scratch);
        t = ts;
        const double mass = hd * pairwise_sum(u);
        if (!(mass > 0.0) || !std::isfinite(mass))
            throw NumericalError("kernel mass degenerated during evolution");
        v.times.push_back(t);
        v.mass.push_back(mass);
        const std::size_t n = v.mass.size();
        if (n < 2) continue;
        const double d = std::fabs(v.mass[n - 1] - v.mass[n - 2]);
        v.tail.push_back(d);
        // remaining-error bound: increments between doublings decay at least
        // geometrically once past the mixing time, so the outstanding sum is
        // controlled by d * q / (1 - q). Two consecutive shrinking ratios are
        // required so a single anomalously small increment (a turning point
        // of mass(t)) cannot fire the criterion early.
        if (d <= 1e-14 * mass) {
            v.converged = true;
        } else if (v.tail.size() >= 3) {
            const std::size_t m = v.tail.size();
            const double q1 = v.tail[m - 2] / v.tail[m - 3];
            const double q2 = v.tail[m - 1] / v.tail[m - 2];
            const double q = std::max(q1, q2);
            if (q < 1.0 && d * q / (1.0 - q) <= rtol * mass)
                v.converged = true;
        }
        if (v.converged) {
            v.m_y = mass;
            v.t_star = t;
            if (!(v.m_y > 0.0))
                throw NumericalError("mass limit is not positive");
            return v;
        }
    }
    std::ostringstream msg;
    msg << "mass limit did not meet rtol " << rtol << " before t = " << t_max
        << "; tail:";
    for (double d : v.tail) msg << ' ' << d;
    throw NumericalError(msg.str());
}

double gaussian_kernel(const Grid& g, const Mat2& abar, double t, double dx,
                       double dy) {
    if (t <= 0.0) throw ValidationError("Gaussian kernel needs t > 0");
    if (g.dim == 1) {
        if (!(abar.a11 > 0.0)) throw ValidationError("abar must be SPD");
        auto one = [&](double z) {
            return std::exp(-z * z / (4.0 * abar.a11 * t)) /
                   std::sqrt(4.0 * M_PI * abar.a11 * t);
        };
        if (!g.torus) return one(dx);
        double dm = min_image(dx, g.period);
        double acc = 0.0;
        for (long ring = 0;; ++ring) {
            double add = ring == 0 ? one(dm)
                                   : one(dm + g.period * static_cast<double>(ring)) +
                                         one(dm - g.period * static_cast<double>(ring));
            acc += add;
            if (ring > 0 && add <= 1e-18 * acc) break;
            if (ring > 64) break;
        }
        return acc;
    }
    const double det = abar.a11 * abar.a22 - abar.a12 * abar.a12;
    if (!(abar.a11 > 0.0 && det > 0.0))
        throw ValidationError("abar must be SPD");
    // inverse quadratic form xi . abar^{-1} xi
    auto quad = [&](double ux, double uy) {
        return (abar.a22 * ux * ux - 2.0 * abar.a12 * ux * uy +
                abar.a11 * uy * uy) /
               det;
    };
    const double norm = 1.0 / (4.0 * M_PI * t * std::sqrt(det));
    auto one = [&](double ux, double uy) {
        return norm * std::exp(-quad(ux, uy) / (4.0 * t));
    };
    if (!g.torus) return one(dx, dy);
    const double dmx = min_image(dx, g.period);
    const double dmy = min_image(dy, g.period);
    double acc = one(dmx, dmy);
    for (long ring = 1; ring <= 64; ++ring) {
        double add = 0.0;
        for (long zx = -ring; zx <= ring; ++zx)
            for (long zy = -ring; zy <= ring; ++zy) {
                if (std::max(std::labs(zx), std::labs(zy)) != ring) continue;
                add += one(dmx + g.period * static_cast<double>(zx),
                           dmy + g.period * static_cast<double>(zy));
            }
        acc += add;
        if (add <= 1e-18 * acc) break;
    }
    return acc;
}

DeviationResult clt_deviation(const KernelSnapshot& snap, double c_v0,
                              const Mat2& abar) {
    const Grid& g = snap.P.grid;
    if ((g.dim == 2 &&
         !(abar.a11 > 0.0 && abar.a11 * abar.a22 - abar.a12 * abar.a12 > 0.0)) ||
        (g.dim == 1 && !(abar.a11 > 0.0)))
        throw ValidationError("abar must be SPD");
    DeviationResult r;
    r.dev = GridFunction(g, 0.0);
    const long nj = g.dim == 2 ? g.n[1] : 1;
#pragma omp parallel for schedule(static)
    for (long long j = 0; j < nj; ++j) {
        for (long i = 0; i < g.n[0]; ++i) {
            const double pb = gaussian_kernel(g, abar, snap.t, g.x(i) - snap.y[0],
                                              g.dim == 2 ? g.y(static_cast<long>(j)) - snap.y[1]
                                                         : 0.0);
            r.dev.at(i, static_cast<long>(j)) =
                std::fabs(snap.P.at(i, static_cast<long>(j)) - c_v0 * pb);
        }
    }
    double m = 0.0;
    for (double v : r.dev.v) m = std::max(m, v);
    r.sup_scaled =
        m * std::pow(snap.t, 0.5 * static_cast<double>(g.dim));
    return r;
}

EnvelopeFit nash_aronson_fit(const std::vector<KernelSnapshot>& snaps,
                             double m_y, double t0, double floor_rel) {
    if (snaps.empty()) throw ValidationError("no snapshots to fit");
    if (!(m_y > 0.0)) throw ValidationError("m_y must be positive");

    struct Sample {
        double t;
        double p;                   // kernel value
        double r2min;               // min-image squared distance
        std::vector<double> img2;   // squared distances of the image ring
        bool in_window;
    };
    std::vector<Sample> samples;
    double fit_t_min = 0.0, fit_t_max = 0.0;
    bool have_window = false;

    for (const auto& s : snaps) {
        const Grid& g = s.P.grid;
        const bool in_window = s.t >= t0 * (1.0 - 1e-12);
        if (in_window) {
            if (!have_window) {
                fit_t_min = fit_t_max = s.t;
                have_window = true;
            }
            fit_t_min = std::min(fit_t_min, s.t);
            fit_t_max = std::max(fit_t_max, s.t);
        }
        double peak = 0.0;
        for (double v : s.P.v) peak = std::max(peak, v);
        const double floor = floor_rel * peak;
        const long nj = g.dim == 2 ? g.n[1] : 1;
        for (long j = 0; j < nj; ++j) {
            for (long i = 0; i < g.n[0]; ++i) {
                const double p = s.P.at(i, j);
                if (p < floor) continue;
                double dx = g.x(i) - s.y[0];
                double dy = g.dim == 2 ? g.y(j) - s.y[1] : 0.0;
                Sample smp;
                smp.t = s.t;
                smp.p = p;
                smp.in_window = in_window;
                if (g.torus) {
                    dx = min_image(dx, g.period);
                    dy = g.dim == 2 ? min_image(dy, g.period) : 0.0;
                    for (long zx = -1; zx <= 1; ++zx) {
                        const double ux = dx + g.period * static_cast<double>(zx);
                        if (g.dim == 1) {
                            smp.img2.push_back(ux * ux);
                            continue;
                        }
                        for (long zy = -1; zy <= 1; ++zy) {
                            const double uy =
                                dy + g.period * static_cast<double>(zy);
                            smp.img2.push_back(ux * ux + uy * uy);
                        }
                    }
                } else {
                    smp.img2.push_back(dx * dx + dy * dy);
                }
                smp.r2min = *std::min_element(smp.img2.begin(), smp.img2.end());
                samples.push_back(std::move(smp));
            }
        }
    }
    if (!have_window)
        throw ValidationError("no snapshot at or after the envelope onset time");

    const int d = snaps.front().P.grid.dim;
    auto upper_ok = [&](double C) {
        for (const auto& s : samples) {
            if (!s.in_window) continue;
            double env = 0.0;
            for (double r2 : s.img2) env += std::exp(-r2 / (C * s.t));
            env *= C * m_y * std::pow(s.t, -0.5 * static_cast<double>(d));
            if (s.p > env) return false;
        }
        return true;
    };
    auto lower_ok = [&](double c) {
        for (const auto& s : samples) {
            if (!s.in_window) continue;
            const double env = c * m_y *
                               std::pow(s.t, -0.5 * static_cast<double>(d)) *
                               std::exp(-s.r2min / (c * s.t));
            if (env > s.p) return false;
        }
        return true;
    };

    // the upper envelope grows monotonically in C, the lower in c
    double C_hi = 1.0;
    while (!upper_ok(C_hi)) {
        C_hi *= 2.0;
        if (C_hi > 1e12) throw NumericalError("upper envelope fit diverged");
    }
    double C_lo = 0.5 * C_hi;
    while (C_lo > 1e-12 && upper_ok(C_lo)) {
        C_hi = C_lo;
        C_lo *= 0.5;
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (C_lo + C_hi);
        (upper_ok(mid) ? C_hi : C_lo) = mid;
    }

    double c_lo = 1e-12;
    if (!lower_ok(c_lo)) throw NumericalError("lower envelope fit degenerated");
    double c_hi = c_lo;
    while (lower_ok(c_hi * 2.0)) {
        c_hi *= 2.0;
        if (c_hi > 1e12) break;
    }
    if (c_hi > c_lo) {
        double bad = c_hi * 2.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (c_hi + bad);
            (lower_ok(mid) ? c_hi : bad) = mid;
        }
    }

    EnvelopeFit fit;
    fit.C = C_hi;
    fit.c = c_hi;
    fit.fit_t_min = fit_t_min;
    fit.fit_t_max = fit_t_max;
    fit.floor_rel = floor_rel;
    for (const auto& s : samples) {
        ++fit.checked;
        double up = 0.0;
        for (double r2 : s.img2) up += std::exp(-r2 / (fit.C * s.t));
        up *= fit.C * m_y * std::pow(s.t, -0.5 * static_cast<double>(d));
        const double lo = fit.c * m_y *
                          std::pow(s.t, -0.5 * static_cast<double>(d)) *
                          std::exp(-s.r2min / (fit.c * s.t));
        if (s.p > up * (1.0 + 1e-9) || lo > s.p * (1.0 + 1e-9)) ++fit.violations;
    }
    if (!(fit.c > 0.0) || fit.c > fit.C)
        throw NumericalError("envelope fit produced an inverted band");
    return fit;
}

}  // namespace homolab
