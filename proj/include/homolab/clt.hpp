#pragma once

#include <functional>
#include <vector>

#include "homolab/green.hpp"
#include "homolab/operator.hpp"
#include "homolab/rate.hpp"

namespace homolab {

// Quenched local-CLT experiment: Gaussian initial data of scale R and
// amplitude M, dyadic times from R^2; per time t the conserved-candidate
// functional c_t = sum v h^d and the weighted deviation
//   sup_x |v(t,x) - c_t Pbar(t, x - x0)| * exp(+|x-x0|^2/(4 Lambda (t+R^2)))
// normalized by M t^{-d/2}. The decay rate of the deviation is fitted on the
// tail of the ladder.
struct CltConfig {
    double R = 1.0;
    double M = 1.0;
    std::array<double, 2> center{0.0, 0.0};
    std::vector<double> times;          // dyadic, times[0] >= R^2
    double truncation_budget = 1e-8;    // free-space boxes only
};

struct CltRun {
    CltConfig cfg;
    Mat2 abar;
    std::vector<double> t;
    std::vector<double> c_t;
    std::vector<double> error;
    RateTable rate;  // fitted on the ladder tail
    double gamma_fit = 0.0;
    double r2 = 0.0;
};

CltRun run_local_clt(const GridOperator& op, const Mat2& abar,
                     const CltConfig& cfg);

// tail value of the c_t ladder once its increments are Cauchy within rtol
double c_limit(const CltRun& run, double rtol);

// c[v0] = sum v0 m h^d (m the mean-1 invariant density)
double c_from_measure(const GridFunction& v0, const GridFunction& m);

// Triadic multiscale surrogate for the negative-norm flatness of f on the
// unit cube: sum over scales 3^-l of 3^{-l alpha} avg_z |cell mean - global
// mean|. The grid must carry 3^p cells per axis.
struct FlatnessProfile {
    double alpha = 0.0;
    std::vector<double> scale;  // 3^-l
    std::vector<double> term;
    double total = 0.0;
};

FlatnessProfile multiscale_flatness(const GridFunction& f, double alpha);

// |cube mean of (f - target)| + multiscale flatness of f: the weak-norm
// surrogate (the mean term keeps constant offsets visible)
double weak_norm_value(const GridFunction& f, double target, double alpha);

// weak-norm surrogate of x -> f(eps, x) - target across an epsilon ladder,
// sampled on 3^p unit-cube cells; rows record (1/eps, value)
struct WeakNormLadder {
    std::vector<double> eps;
    std::vector<double> value;
    RateTable rate;
};

WeakNormLadder weak_norm_decay(
    const std::function<double(double, double, double)>& f_eps, double target,
    const std::vector<double>& eps_ladder, double alpha, int p, int dim);

}  // namespace homolab
