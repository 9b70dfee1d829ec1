#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "homolab/error.hpp"

namespace homolab {

// Symmetric coefficient matrix; d=1 uses a11 only (a22 = a12 = 0).
struct Mat2 {
    double a11 = 1.0, a22 = 1.0, a12 = 0.0;

    double eig_min() const;
    double eig_max() const;
    double norm2() const;  // spectral norm
};

Mat2 operator-(const Mat2& a, const Mat2& b);

struct EllipticityParams {
    double lambda = 1.0;        // lower eigenvalue bound
    double Lambda_ = 2.0;       // upper eigenvalue bound
    double alpha0 = 1.0;        // smoothness exponent in (0,1]
    double K0 = 16.0;           // smoothness seminorm budget, >= 1
    double cross_margin = 0.2;  // |a12| stays below (1-margin)*min(a11,a22)

    void validate() const;  // throws ValidationError
};

enum class Topology { free_space, torus };

enum class FieldLaw {
    uniform,    // full admissible matrix per cell (default ensemble)
    two_point,  // d=1 scalar a in {law_a, law_b} per unit cell
    laminar,    // d=2 diag(a(x1), b(x1)), layer values in {law_a, law_b}
    constant,   // A(x) == {law_a, law_b, law_c}
};

struct FieldSpec {
    std::uint64_t seed = 1;
    int dimension = 2;
    Topology topology = Topology::free_space;
    long period = 0;  // torus side in unit cells, >= 3
    EllipticityParams params;
    double rho = 0.25;      // blend transition width; 0 = piecewise constant
    FieldLaw law = FieldLaw::uniform;
    double law_a = 0.0, law_b = 0.0, law_c = 0.0;
    double cell_size = 0.5;  // spacing of iid draws (0.5 default, 1.0 for
                             // unit-cell laws)
    std::array<long, 2> offset = {0, 0};  // integer translation
};

struct FieldStatistics {
    int n_seeds = 0;
    Mat2 empirical_mean_A;
    double cross_set_correlation = 0.0;
    double translation_mismatch = 0.0;
    bool degenerate = false;  // zero variance, correlation meaningless
};

struct Box {
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};
};

// Stationary random coefficient field: iid admissible matrices per cell of a
// sub-lattice, blended by an exact partition of unity so any two evaluation
// sets at distance >= 1 read disjoint cell draws. Evaluation is a pure
// function of (seed, x).
class CoefficientField {
  public:
    explicit CoefficientField(FieldSpec spec);

    const FieldSpec& spec() const { return spec_; }
    const EllipticityParams& params() const { return spec_.params; }
    int dimension() const { return spec_.dimension; }
    double shrink() const { return shrink_; }

    Mat2 operator()(double x, double y = 0.0) const;
    Mat2 cell_matrix(long cx, long cy) const;  // raw per-cell draw
    CoefficientField translated(long zx, long zy) const;

  private:
    FieldSpec spec_;
    double shrink_ = 1.0;   // factor pulling draws toward the midpoint so the
                            // smoothness budget K0 holds
    long cells_axis_ = 0;   // cells per period (torus only)

    Mat2 eval_blend(double x, double y) const;
};

CoefficientField sample_field(std::uint64_t seed,
                              const EllipticityParams& params, int dimension,
                              Topology topology, long period = 0);

// Convenience constructors for the closed-form media.
CoefficientField two_point_field_1d(std::uint64_t seed, double a, double b,
                                    Topology topology, long period = 0);
CoefficientField laminar_field_2d(std::uint64_t seed, double a, double b,
                                  Topology topology, long period = 0);
CoefficientField constant_field(int dimension, double a11, double a22 = 0.0,
                                double a12 = 0.0);

// Empirical independence of the draws feeding two boxes, over fresh seeds.
// Correlation of box-averaged a11; also reports the empirical-mean mismatch
// between A(center U) and A(center V) as a shift-invariance diagnostic.
FieldStatistics decorrelation_probe(const EllipticityParams& params,
                                    int n_seeds, const Box& U, const Box& V,
                                    int dimension = 2);

}  // namespace homolab
