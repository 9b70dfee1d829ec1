#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "homolab/field.hpp"
#include "homolab/rate.hpp"

namespace homolab {

// diffusion coefficient sigma(x) with sigma sigma^T = 2 a(x); closed-form
// SPD square root for the 2x2 case
Mat2 matrix_sqrt_spd(const Mat2& a, int dim);

// per-path functionals of dX = sigma(X) dW started at 0; only these are
// stored, never the trajectory
struct PathFunctionals {
    Mat2 avg_A;  // (1/T) int_0^T A(X_s) ds, left-endpoint quadrature
    std::array<double, 2> endpoint{0.0, 0.0};
    double max_abs = 0.0;  // running max |X|
    double T = 0.0;
    long steps = 0;
};

PathFunctionals simulate_path(const CoefficientField& field, double dt,
                              double T, std::uint64_t path_seed);

// Quantitative ergodicity of the environmental process: empirical tails
// P[|avg - abar| >= eta] per (T, eta), medians per T, and the concentration
// shape fit log tail ~ intercept + slope * eta^2 T^{1-xi}.
struct ErgodicityReport {
    std::vector<double> T;
    std::vector<double> eta;
    std::vector<std::vector<double>> tails;  // tails[iT][iEta]
    std::vector<double> median_dev;          // per T
    std::vector<std::array<double, 2>> mean_endpoint;  // per T
    std::vector<std::array<double, 2>> se_endpoint;    // per T
    double xi = 0.5;
    double slope = 0.0;
    double intercept = 0.0;
    long n_fit = 0;  // (T, eta) points with tail in (0, 1)
    long n_paths = 0;
    bool medians_decreasing = false;
    bool tails_eta_monotone = false;  // nonincreasing in eta for every T
    bool tails_T_monotone = false;    // nonincreasing in T for every eta
    bool low_n_paths = false;         // fewer than 1000 paths
};

ErgodicityReport ergodicity_experiment(const CoefficientField& field,
                                       long n_paths,
                                       const std::vector<double>& T_ladder,
                                       const std::vector<double>& eta_grid,
                                       const Mat2& abar, double dt = 0.01,
                                       double xi = 0.5);

// Empirical covariance of X_T / sqrt(T) against the homogenized target 2
// abar, with entrywise Monte Carlo z-scores and a marginal Gaussian
// distribution-distance diagnostic (reported, never asserted).
struct InvarianceReport {
    long n_paths = 0;
    double T = 0.0;
    Mat2 cov;
    Mat2 target;  // 2 abar
    Mat2 se;      // entrywise standard errors
    Mat2 z;       // (cov - target) / se
    double ks_stat = 0.0;  // worst marginal sup-distance to the normal CDF
    std::array<double, 2> mean_endpoint{0.0, 0.0};
    std::array<double, 2> se_endpoint{0.0, 0.0};
};

InvarianceReport invariance_principle_check(const CoefficientField& field,
                                            long n_paths, double T,
                                            const Mat2& abar, double dt = 0.01);

}  // namespace homolab
