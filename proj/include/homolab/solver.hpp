#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "homolab/error.hpp"
#include "homolab/parallel.hpp"

namespace homolab {

struct SolveReport {
    long iters = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

// Diagonally preconditioned BiCGStab, matrix-free. Op is a callable
// void(const vector<double>&, vector<double>&). inv_diag may be empty for an
// unpreconditioned solve. All reductions use the fixed-order pairwise tree,
// so iterates are identical for every worker count.
template <class Op>
SolveReport bicgstab(const Op& A, const std::vector<double>& b,
                     std::vector<double>& x,
                     const std::vector<double>& inv_diag, double rtol,
                     long cap) {
    const std::size_t n = b.size();
    std::vector<double> r(n), r0(n), p(n), v(n), s(n), t(n), y(n), z(n);

    auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
        if (inv_diag.empty()) {
            out = in;
        } else {
#pragma omp parallel for schedule(static)
            for (long long i = 0; i < static_cast<long long>(n); ++i)
                out[static_cast<std::size_t>(i)] =
                    inv_diag[static_cast<std::size_t>(i)] *
                    in[static_cast<std::size_t>(i)];
        }
    };

    A(x, v);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        r[static_cast<std::size_t>(i)] =
            b[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i)];
    r0 = r;
    double bnorm = std::sqrt(pairwise_dot(b, b));
    if (bnorm == 0.0) bnorm = 1.0;
    double rnorm = std::sqrt(pairwise_dot(r, r));
    if (rnorm / bnorm <= rtol) return {0, rnorm / bnorm, true};

    double rho_prev = 1.0, alpha = 1.0, omega = 1.0;
    std::fill(p.begin(), p.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);

    for (long it = 1; it <= cap; ++it) {
        double rho = pairwise_dot(r0, r);
        if (rho == 0.0) return {it, rnorm / bnorm, false};
        double beta = (rho / rho_prev) * (alpha / omega);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            std::size_t k = static_cast<std::size_t>(i);
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        precond(p, y);
        A(y, v);
        double r0v = pairwise_dot(r0, v);
        if (r0v == 0.0) return {it, rnorm / bnorm, false};
        alpha = rho / r0v;
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            std::size_t k = static_cast<std::size_t>(i);
            s[k] = r[k] - alpha * v[k];
        }
        double snorm = std::sqrt(pairwise_dot(s, s));
        if (snorm / bnorm <= rtol) {
#pragma omp parallel for schedule(static)
            for (long long i = 0; i < static_cast<long long>(n); ++i) {
                std::size_t k = static_cast<std::size_t>(i);
                x[k] += alpha * y[k];
            }
            return {it, snorm / bnorm, true};
        }
        precond(s, z);
        A(z, t);
        double tt = pairwise_dot(t, t);
        if (tt == 0.0) return {it, snorm / bnorm, false};
        omega = pairwise_dot(t, s) / tt;
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            std::size_t k = static_cast<std::size_t>(i);
            x[k] += alpha * y[k] + omega * z[k];
            r[k] = s[k] - omega * t[k];
        }
        rnorm = std::sqrt(pairwise_dot(r, r));
        if (rnorm / bnorm <= rtol) return {it, rnorm / bnorm, true};
        if (omega == 0.0) return {it, rnorm / bnorm, false};
        rho_prev = rho;
    }
    return {cap, rnorm / bnorm, false};
}

// Plain conjugate gradient for symmetric positive definite operators
// (used by spectral diagnostics).
template <class Op>
SolveReport conjugate_gradient(const Op& A, const std::vector<double>& b,
                               std::vector<double>& x, double rtol, long cap) {
    const std::size_t n = b.size();
    std::vector<double> r(n), p(n), Ap(n);
    A(x, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
    p = r;
    double bnorm = std::sqrt(pairwise_dot(b, b));
    if (bnorm == 0.0) bnorm = 1.0;
    double rr = pairwise_dot(r, r);
    for (long it = 1; it <= cap; ++it) {
        if (std::sqrt(rr) / bnorm <= rtol) return {it - 1, std::sqrt(rr) / bnorm, true};
        A(p, Ap);
        double pAp = pairwise_dot(p, Ap);
        if (pAp <= 0.0) return {it, std::sqrt(rr) / bnorm, false};
        double alpha = rr / pAp;
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            std::size_t k = static_cast<std::size_t>(i);
            x[k] += alpha * p[k];
            r[k] -= alpha * Ap[k];
        }
        double rr_new = pairwise_dot(r, r);
        double beta = rr_new / rr;
        rr = rr_new;
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            std::size_t k = static_cast<std::size_t>(i);
            p[k] = r[k] + beta * p[k];
        }
    }
    return {cap, std::sqrt(rr) / bnorm, false};
}

}  // namespace homolab
