#pragma once

#include <array>
#include <vector>

#include "homolab/operator.hpp"

namespace homolab {

// P(t,·,y): forward Cauchy evolution of a single-node h^{-d} spike at the
// node nearest y. Positivity comes from the monotone update; mass is NOT
// conserved (nondivergence form) and its long-time limit defines m(y).
struct KernelSnapshot {
    double t = 0.0;
    std::array<double, 2> y{0.0, 0.0};
    GridFunction P;
    double mass = 0.0;
};

std::vector<KernelSnapshot> green_evolve(const GridOperator& op,
                                         std::array<double, 2> y,
                                         const std::vector<double>& times,
                                         double dt_request = 0.0);

double kernel_mass(const KernelSnapshot& s);

struct InvariantDensityValue {
    std::array<double, 2> y{0.0, 0.0};
    double m_y = 0.0;
    double t_star = 0.0;  // time at which the Cauchy criterion fired
    std::vector<double> times;  // dyadic checkpoints
    std::vector<double> mass;   // mass(t) at each checkpoint
    std::vector<double> tail;   // |mass(2t) - mass(t)| history
    bool converged = false;
};

// dyadic mass-limit evaluation of m(y); torus only. Throws a diagnostic
// NumericalError carrying the tail history on non-convergence before t_max.
InvariantDensityValue invariant_density_at(const GridOperator& op,
                                           std::array<double, 2> y, double rtol,
                                           double t_max = 65536.0);

// Two-sided Gaussian envelope constants for the kernel family
//   c m_y t^{-d/2} exp(-|x-y|^2/(c t)) <= P <= C m_y t^{-d/2} exp(-|x-y|^2/(C t)).
// Constants are fitted by bisection on snapshots with t >= t0; violations are
// then counted over ALL supplied snapshots (early times may violate — that is
// reported, not an error). Nodes below floor_rel * peak are ignored. On a
// torus the upper envelope is periodized over the +-1 image ring; the lower
// bound keeps the single min-image term.
struct EnvelopeFit {
    double c = 0.0, C = 0.0;
    long checked = 0;
    long violations = 0;
    double fit_t_min = 0.0, fit_t_max = 0.0;
    double floor_rel = 1e-12;
};

EnvelopeFit nash_aronson_fit(const std::vector<KernelSnapshot>& snaps,
                             double m_y, double t0 = 4.0,
                             double floor_rel = 1e-12);

// constant-coefficient Gaussian for tr(abar D^2) evaluated at displacement
// (dx, dy); periodized over lattice images when the grid is a torus
double gaussian_kernel(const Grid& g, const Mat2& abar, double t, double dx,
                       double dy);

// |P(t,·,y) - c_v0 * Pbar(t, ·-y)| and its sup norm scaled by t^{d/2}
struct DeviationResult {
    GridFunction dev;
    double sup_scaled = 0.0;
};

DeviationResult clt_deviation(const KernelSnapshot& snap, double c_v0,
                              const Mat2& abar);

}  // namespace homolab
