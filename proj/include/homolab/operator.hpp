#pragma once

#include <functional>
#include <vector>

#include "homolab/field.hpp"
#include "homolab/grid.hpp"

namespace homolab {

// Monotone finite-difference discretization of u -> tr(A(x) D^2 u):
// second differences for the diagonal entries plus a sign-adapted diagonal
// second difference for the cross term. Positive type (off-diagonal weights
// >= 0, center <= 0, zero row sums) requires |a12| <= min(a11, a22), which
// the field construction guarantees with a margin.
//
// Weight layout per node, fixed offset order:
//   d=2: (0,0) (1,0) (-1,0) (0,1) (0,-1) (1,1) (-1,-1) (1,-1) (-1,1)
//   d=1: (0) (1) (-1)
// On free (Dirichlet) grids, rows of boundary nodes are all zero unless the
// operator is assembled with all_rows = true (used by adjoint solves, which
// need coefficient rows on the closure).
struct GridOperator {
    Grid grid;
    int stride = 9;
    std::vector<double> w;     // node_count * stride
    std::vector<long> nbr;     // node_count * stride, resolved neighbor indices
    double lambda = 1.0;       // ellipticity range of the sampled coefficients
    double Lambda = 1.0;

    long rows() const { return grid.node_count(); }
};

// offset tables and the transpose permutation (opposite offsets)
inline constexpr int kOff2[9][2] = {{0, 0}, {1, 0},  {-1, 0}, {0, 1}, {0, -1},
                                    {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
inline constexpr int kOpp2[9] = {0, 2, 1, 4, 3, 6, 5, 8, 7};
inline constexpr int kOff1[3] = {0, 1, -1};
inline constexpr int kOpp1[3] = {0, 2, 1};

using FieldFn = std::function<Mat2(double, double)>;

GridOperator assemble_generator(const CoefficientField& field, const Grid& grid,
                                bool all_rows = false);
GridOperator assemble_generator_fn(const FieldFn& field, const Grid& grid,
                                   double lambda, double Lambda,
                                   bool all_rows = false);

// out = L u (boundary rows produce 0); serial variant is the reference
// implementation for the parallel kernel.
void apply(const GridOperator& op, const std::vector<double>& u,
           std::vector<double>& out);
void apply_serial(const GridOperator& op, const std::vector<double>& u,
                  std::vector<double>& out);

// out = L^T m (exact transpose; meaningful on torus grids where every node
// is a row)
void apply_transpose(const GridOperator& op, const std::vector<double>& m,
                     std::vector<double>& out);
void apply_transpose_serial(const GridOperator& op,
                            const std::vector<double>& m,
                            std::vector<double>& out);

// largest stable explicit step h^2/(2 d Lambda), and the 0.9-safety default
double cfl_limit(const GridOperator& op);
double default_dt(const GridOperator& op);

// u <- u + dt * L u on interior nodes; boundary nodes are left untouched.
// Throws if dt violates the explicit stability bound.
void parabolic_step(const GridOperator& op, std::vector<double>& u, double dt,
                    std::vector<double>& scratch);
void parabolic_step_serial(const GridOperator& op, std::vector<double>& u,
                           double dt, std::vector<double>& scratch);

// measure evolution m <- (I + dt L)^T m; conserves sum(m) exactly on a torus
void adjoint_step(const GridOperator& op, std::vector<double>& m, double dt,
                  std::vector<double>& scratch);

struct ParabolicRun {
    double dt = 0.0;  // largest step used
    long steps = 0;
    double cfl_ratio = 0.0;
    std::vector<std::pair<double, GridFunction>> snapshots;
};

using BoundaryFn = std::function<double(double t, double x, double y)>;

enum class Scheme { explicit_euler, implicit_euler };

// Cauchy-Dirichlet evolution: boundary nodes carry g(t,x), interior evolves
// from u0. Snapshot times are hit exactly (the step subdivides each
// interval). dt_request = 0 picks the CFL default; implicit runs may use a
// larger step.
ParabolicRun solve_cauchy_dirichlet(const GridOperator& op,
                                    const GridFunction& u0, const BoundaryFn& g,
                                    const std::vector<double>& snapshot_times,
                                    Scheme scheme = Scheme::explicit_euler,
                                    double dt_request = 0.0);

// -L u = f with u = g on the boundary (free grids only); diagonally
// preconditioned BiCGStab to relative residual rtol, iteration cap.
GridFunction solve_elliptic_dirichlet(const GridOperator& op,
                                      const GridFunction& f, const BoundaryFn& g,
                                      double rtol = 1e-10, long cap = 100000);

// (sigma I - L) u = f on a torus (sigma > 0) or with zero Dirichlet data
GridFunction solve_shifted(const GridOperator& op, double sigma,
                           const GridFunction& f, double rtol = 1e-10,
                           long cap = 100000);

// profile t^-kappa exp(-|x|^2/(theta t)); a supersolution of the evolution
// for theta >= 4 Lambda, kappa <= 2 lambda d / theta, a subsolution for
// theta <= 4 lambda, kappa >= 2 Lambda d / theta
double supersolution_envelope(double kappa, double theta, double t, double r2);
bool supersolution_params_ok(double kappa, double theta, double lambda,
                             double Lambda, int d);
bool subsolution_params_ok(double kappa, double theta, double lambda,
                           double Lambda, int d);

// max over a deterministic pair pattern of |u(x)-u(y)| / |x-y|^sigma inside
// the index box [lo, hi) per axis
double holder_seminorm(const GridFunction& u, std::array<long, 2> lo,
                       std::array<long, 2> hi, double sigma);

}  // namespace homolab
