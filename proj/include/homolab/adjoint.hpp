#pragma once

#include <array>
#include <string>
#include <vector>

#include "homolab/operator.hpp"

namespace homolab {

// exact transpose of a torus operator, as a standalone GridOperator
GridOperator adjoint_operator(const GridOperator& op);

// m >= 0 with mean 1 solving L^T m = 0 on the torus
struct InvariantDensity {
    GridFunction m;
    double residual = 0.0;  // ||L^T m||_2
    double m_norm = 0.0;    // ||m||_2
    long power_sweeps = 0;
    long solver_iters = 0;
    std::string method;  // "power" | "solve" | "power+solve"
};

struct StationaryOptions {
    double residual_tol = 1e-10;  // relative to ||m||_2
    long power_cap = 20000;       // sweeps before switching engines
    long solver_cap = 200000;
    bool force_power = false;
    bool force_solver = false;
};

InvariantDensity stationary_measure(const GridOperator& op,
                                    const StationaryOptions& opt = {});
InvariantDensity stationary_measure_torus(const CoefficientField& field,
                                          long period, double h,
                                          const StationaryOptions& opt = {});

// max absolute row sum — a computable upper bound for the operator norm
double operator_norm_bound(const GridOperator& op);

// second-smallest singular value of L (== of L^T): the uniqueness margin of
// the stationary measure. Inverse iteration on L^T L with the trivial
// direction deflated; torus only.
double second_singular_value(const GridOperator& op, double rtol = 1e-6,
                             long cap = 60);

// analytic radial coefficient field lambda*(I - rhat rhat) + Lambda rhat rhat
Mat2 radial_matrix(double lambda, double Lambda, double x, double y);

// Dirichlet problem for the transposed stencil on the annulus
// r_in < |x| < r_out with exact data |x|^{-gamma} on the discrete boundary
// layer; reports the relative sup error against |x|^{-gamma}.
struct RadialReport {
    double gamma = 0.0;
    double h = 0.0;
    double rel_linf = 0.0;
    long unknowns = 0;
    long solver_iters = 0;
};

RadialReport radial_example_check(double lambda, double Lambda, double r_in,
                                  double r_out, double h);

// volume-normalized ||m||_{L^q(B_{r/2})} / ||m||_{L^1(B_r)} across radii;
// balls use min-image distance on the torus
struct IntegrabilityTable {
    double q = 0.0;
    std::vector<double> r;
    std::vector<double> ratio;
};

IntegrabilityTable integrability_ratio(const GridFunction& m, double q,
                                       const std::vector<double>& r_ladder,
                                       std::array<double, 2> center);

// sup_{B_r} m + r^alpha [m]_{C^alpha(B_r)} against r^alpha K0 avg_{B_2r} m
struct HolderReport {
    double r = 0.0, alpha = 0.0;
    double sup_inner = 0.0, seminorm = 0.0, l1_outer = 0.0;
    double lhs = 0.0, rhs = 0.0, fitted_C = 0.0;
};

HolderReport holder_bound_check(const GridFunction& m,
                                const CoefficientField& field, double r,
                                std::array<double, 2> center);

}  // namespace homolab
