#pragma once

#include <string>
#include <vector>

#include "homolab/adjoint.hpp"
#include "homolab/operator.hpp"
#include "homolab/rate.hpp"

namespace homolab {

// Approximate corrector for the (i,j) slot. Stationary route: solution of
// delta^2 w - tr(a (S + D^2 w)) = 0 with S = sym(e_i x e_j); the plateau of
// delta^2 w estimates abar_ij. Dirichlet route: cube corrector phi with zero
// boundary data; normalized_sup = 3^{-2m} sup|phi| must decay in m.
struct CorrectorSolution {
    int i = 0, j = 0;
    double delta = 0.0;  // regularization (stationary) or cube side (Dirichlet)
    GridFunction w;
    double abar_ij_estimate = 0.0;  // delta^2 w at the domain center
    double abar_ij_average = 0.0;   // domain average of delta^2 w
    double normalized_sup = 0.0;    // Dirichlet route only
    long solver_iters = 0;
};

CorrectorSolution delta_corrector(const CoefficientField& field, int i, int j,
                                  double delta, const Grid& domain);

struct HomogenizedMatrix {
    Mat2 abar;
    std::string method;  // "delta-corrector" | "measure-average" | "closed-form"
    std::vector<double> ladder_scale;  // deltas or cube sides R
    std::vector<Mat2> ladder_abar;
    double spread = 0.0;  // max entrywise deviation across the ladder tail
    bool low_confidence = false;
};

// methods: "delta-corrector" (ladder of deltas, averaged-plateau estimates)
// and "measure-average" (ladder of cube sides R, averages of m A over R-cubes
// using the torus stationary measure). Empty ladder picks the default
// {2^-1..2^-5} deltas or {P/9, P/3, P} cube sides.
HomogenizedMatrix estimate_abar(const CoefficientField& field,
                                const Grid& domain, const std::string& method,
                                std::vector<double> ladder = {},
                                double spread_bound = 0.05);

// cube corrector on side 3^m with mesh h: -tr(a(M + D^2 phi)) = -tr(abar M)
CorrectorSolution dirichlet_corrector(const CoefficientField& field,
                                      const Mat2& M, const Mat2& abar,
                                      int m_exponent, double h);

// Cauchy-Dirichlet homogenization error: for each eps solve with A(./eps) and
// with abar on the same unit-cube grid (h = eps * h_over_eps), boundary and
// initial data g; rows record (1/eps, sup error over the recorded time
// slices), so the fitted exponent is the decay rate in 1/eps.
RateTable cd_error_experiment(const CoefficientField& field,
                              const BoundaryFn& g, const Mat2& abar,
                              const std::vector<double>& eps_ladder,
                              double h_over_eps = 0.125, double t_final = 0.25);

}  // namespace homolab
