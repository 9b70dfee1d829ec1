#include "homolab/field.hpp"

#include <algorithm>
#include <cmath>

#include "homolab/rng.hpp"

namespace homolab {

double Mat2::eig_min() const {
    double m = 0.5 * (a11 + a22);
    double r = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    return m - r;
}

double Mat2::eig_max() const {
    double m = 0.5 * (a11 + a22);
    double r = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    return m + r;
}

double Mat2::norm2() const {
    return std::max(std::fabs(eig_min()), std::fabs(eig_max()));
}

Mat2 operator-(const Mat2& a, const Mat2& b) {
    return {a.a11 - b.a11, a.a22 - b.a22, a.a12 - b.a12};
}

void EllipticityParams::validate() const {
    if (!(lambda > 0.0) || !(Lambda_ >= lambda) || !std::isfinite(Lambda_))
        throw ValidationError("ellipticity bounds need 0 < lambda <= Lambda");
    if (!(alpha0 > 0.0) || !(alpha0 <= 1.0))
        throw ValidationError("alpha0 must lie in (0,1]");
    if (!(K0 >= 1.0)) throw ValidationError("K0 must be >= 1");
    if (!(cross_margin > 0.0) || !(cross_margin < 1.0))
        throw ValidationError("cross_margin must lie in (0,1)");
}

namespace {

// quintic smoothstep, S(t) + S(1-t) = 1
double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return ((6.0 * t - 15.0) * t + 10.0) * t * t * t;
}

// 1D cell weight: 1 on the cell plateau, 0 beyond, smooth transition of
// width rho centered on the cell edge. q is the cell halfwidth.
double cell_weight(double s, double q, double rho) {
    double a = std::fabs(s);
    if (rho <= 0.0) return a < q ? 1.0 : 0.0;
    return smoothstep((q + 0.5 * rho - a) / rho);
}

long positive_mod(long v, long m) {
    long r = v % m;
    return r < 0 ? r + m : r;
}

}  // namespace

CoefficientField::CoefficientField(FieldSpec spec) : spec_(std::move(spec)) {
    spec_.params.validate();
    if (spec_.dimension != 1 && spec_.dimension != 2)
        throw ValidationError("dimension must be 1 or 2");
    if (spec_.topology == Topology::torus && spec_.period < 3)
        throw ValidationError("torus period must be >= 3");
    if (!(spec_.rho >= 0.0) || spec_.rho >= 0.5)
        throw ValidationError("blend width rho must lie in [0, 1/2)");
    if (spec_.cell_size != 0.5 && spec_.cell_size != 1.0)
        throw ValidationError("cell_size must be 0.5 or 1.0");
    if (spec_.rho > 0.0 && spec_.rho >= spec_.cell_size)
        throw ValidationError("rho must be smaller than the cell size");
    if (spec_.topology == Topology::torus) {
        cells_axis_ = static_cast<long>(
            std::lround(static_cast<double>(spec_.period) / spec_.cell_size));
    }

    // Shrink uniform draws toward the midpoint matrix so the sampled-pair
    // smoothness bound |A(x)-A(y)| <= K0 |x-y|^alpha0 holds by construction.
    // Spread S bounds ||M - midpoint|| and L bounds |grad A|; the seminorm is
    // at most (2S)^(1-alpha0) * L^alpha0.
    if (spec_.law == FieldLaw::uniform && spec_.rho > 0.0) {
        const auto& p = spec_.params;
        double S = 0.5 * (p.Lambda_ - p.lambda);
        if (S > 0.0) {
            double L = std::sqrt(static_cast<double>(spec_.dimension)) *
                       (15.0 / 4.0) * S / spec_.rho;
            double raw = std::pow(2.0 * S, 1.0 - p.alpha0) * std::pow(L, p.alpha0);
            shrink_ = std::min(1.0, p.K0 / raw);
        }
    }
}

Mat2 CoefficientField::cell_matrix(long cx, long cy) const {
    const auto& p = spec_.params;
    long kx = cx, ky = cy;
    if (spec_.topology == Topology::torus) {
        kx = positive_mod(kx, cells_axis_);
        ky = spec_.dimension == 2 ? positive_mod(ky, cells_axis_) : 0;
    }
    std::uint64_t zx = zigzag(kx), zy = zigzag(ky);

    switch (spec_.law) {
        case FieldLaw::constant:
            return {spec_.law_a, spec_.law_b, spec_.law_c};
        case FieldLaw::two_point: {
            double u = u01(counter_hash(spec_.seed, zx, zy, 1));
            double a = u < 0.5 ? spec_.law_a : spec_.law_b;
            return {a, 0.0, 0.0};
        }
        case FieldLaw::laminar: {
            // layer values keyed by x1 cell only
            double ua = u01(counter_hash(spec_.seed, zx, 0, 1));
            double ub = u01(counter_hash(spec_.seed, zx, 0, 2));
            return {ua < 0.5 ? spec_.law_a : spec_.law_b,
                    ub < 0.5 ? spec_.law_a : spec_.law_b, 0.0};
        }
        case FieldLaw::uniform:
            break;
    }

    double u1 = u01(counter_hash(spec_.seed, zx, zy, 1));
    Mat2 m;
    m.a11 = p.lambda + (p.Lambda_ - p.lambda) * u1;
    if (spec_.dimension == 1) {
        m.a22 = 0.0;
        m.a12 = 0.0;
        double c = 0.5 * (p.lambda + p.Lambda_);
        m.a11 = c + shrink_ * (m.a11 - c);
        return m;
    }
    double u2 = u01(counter_hash(spec_.seed, zx, zy, 2));
    double u3 = u01(counter_hash(spec_.seed, zx, zy, 3));
    m.a22 = p.lambda + (p.Lambda_ - p.lambda) * u2;
    // off-diagonal band: keep the cross-margin slack AND both eigenvalues
    // inside [lambda, Lambda]
    double band = std::min(std::min(m.a11, m.a22),
                           std::min(std::sqrt((p.Lambda_ - m.a11) * (p.Lambda_ - m.a22)),
                                    std::sqrt((m.a11 - p.lambda) * (m.a22 - p.lambda))));
    m.a12 = (1.0 - p.cross_margin) * band * (2.0 * u3 - 1.0);

    double c = 0.5 * (p.lambda + p.Lambda_);
    m.a11 = c + shrink_ * (m.a11 - c);
    m.a22 = c + shrink_ * (m.a22 - c);
    m.a12 = shrink_ * m.a12;
    return m;
}

Mat2 CoefficientField::eval_blend(double x, double y) const {
    const double cs = spec_.cell_size;
    const double q = 0.5 * cs;
    const double H = q + 0.5 * spec_.rho;  // support halfwidth

    long kx_lo = static_cast<long>(std::ceil((x - H) / cs));
    long kx_hi = static_cast<long>(std::floor((x + H) / cs));
    long ky_lo = 0, ky_hi = 0;
    bool layered = spec_.law == FieldLaw::laminar;
    if (spec_.dimension == 2 && !layered) {
        ky_lo = static_cast<long>(std::ceil((y - H) / cs));
        ky_hi = static_cast<long>(std::floor((y + H) / cs));
    }

    Mat2 out{0.0, 0.0, 0.0};
    double wsum = 0.0;
    for (long kx = kx_lo; kx <= kx_hi; ++kx) {
        double wx = cell_weight(x - static_cast<double>(kx) * cs, q, spec_.rho);
        if (wx <= 0.0) continue;
        for (long ky = ky_lo; ky <= ky_hi; ++ky) {
            double w = wx;
            if (spec_.dimension == 2 && !layered) {
                double wy =
                    cell_weight(y - static_cast<double>(ky) * cs, q, spec_.rho);
                if (wy <= 0.0) continue;
                w *= wy;
            }
            Mat2 m = cell_matrix(kx, ky);
            out.a11 += w * m.a11;
            out.a22 += w * m.a22;
            out.a12 += w * m.a12;
            wsum += w;
        }
    }
    // the weights are an exact partition of unity; guard against the
    // degenerate rho=0 edge where a point sits on a cell face
    if (wsum <= 0.0) {
        long kx = static_cast<long>(std::floor(x / cs + 0.5));
        long ky = static_cast<long>(std::floor(y / cs + 0.5));
        return cell_matrix(kx, layered ? 0 : ky);
    }
    out.a11 /= wsum;
    out.a22 /= wsum;
    out.a12 /= wsum;
    return out;
}

Mat2 CoefficientField::operator()(double x, double y) const {
    if (!std::isfinite(x) || !std::isfinite(y))
        throw ValidationError("field evaluated at non-finite point");
    x += static_cast<double>(spec_.offset[0]);
    y += static_cast<double>(spec_.offset[1]);
    if (spec_.topology == Topology::torus) {
        double P = static_cast<double>(spec_.period);
        x -= P * std::floor(x / P);
        y -= P * std::floor(y / P);
    }
    if (spec_.rho <= 0.0) {
        const double cs = spec_.cell_size;
        long kx = static_cast<long>(std::floor(x / cs + 0.5));
        long ky = spec_.dimension == 2 ? static_cast<long>(std::floor(y / cs + 0.5))
                                       : 0;
        if (spec_.law == FieldLaw::laminar) ky = 0;
        return cell_matrix(kx, ky);
    }
    return eval_blend(x, spec_.dimension == 2 ? y : 0.0);
}

CoefficientField CoefficientField::translated(long zx, long zy) const {
    FieldSpec s = spec_;
    s.offset[0] += zx;
    s.offset[1] += zy;
    return CoefficientField(s);
}

CoefficientField sample_field(std::uint64_t seed,
                              const EllipticityParams& params, int dimension,
                              Topology topology, long period) {
    FieldSpec s;
    s.seed = seed;
    s.params = params;
    s.dimension = dimension;
    s.topology = topology;
    s.period = period;
    return CoefficientField(s);
}

CoefficientField two_point_field_1d(std::uint64_t seed, double a, double b,
                                    Topology topology, long period) {
    FieldSpec s;
    s.seed = seed;
    s.dimension = 1;
    s.topology = topology;
    s.period = period;
    s.params.lambda = std::min(a, b);
    s.params.Lambda_ = std::max(a, b);
    s.law = FieldLaw::two_point;
    s.law_a = a;
    s.law_b = b;
    s.rho = 0.0;
    s.cell_size = 1.0;
    return CoefficientField(s);
}

CoefficientField laminar_field_2d(std::uint64_t seed, double a, double b,
                                  Topology topology, long period) {
    FieldSpec s;
    s.seed = seed;
    s.dimension = 2;
    s.topology = topology;
    s.period = period;
    s.params.lambda = std::min(a, b);
    s.params.Lambda_ = std::max(a, b);
    s.law = FieldLaw::laminar;
    s.law_a = a;
    s.law_b = b;
    s.rho = 0.0;
    s.cell_size = 1.0;
    return CoefficientField(s);
}

CoefficientField constant_field(int dimension, double a11, double a22,
                                double a12) {
    FieldSpec s;
    s.dimension = dimension;
    s.law = FieldLaw::constant;
    s.law_a = a11;
    s.law_b = dimension == 2 ? (a22 > 0.0 ? a22 : a11) : 0.0;
    s.law_c = dimension == 2 ? a12 : 0.0;
    s.rho = 0.0;
    s.cell_size = 1.0;
    Mat2 m{s.law_a, s.law_b, s.law_c};
    if (dimension == 2) {
        s.params.lambda = m.eig_min();
        s.params.Lambda_ = m.eig_max();
    } else {
        s.params.lambda = a11;
        s.params.Lambda_ = a11;
    }
    if (s.params.lambda <= 0.0)
        throw ValidationError("constant_field: matrix not positive definite");
    return CoefficientField(s);
}

FieldStatistics decorrelation_probe(const EllipticityParams& params,
                                    int n_seeds, const Box& U, const Box& V,
                                    int dimension) {
    if (n_seeds < 100)
        throw ValidationError("decorrelation_probe needs n_seeds >= 100");
    FieldStatistics st;
    st.n_seeds = n_seeds;

    auto box_avg = [&](const CoefficientField& f, const Box& B) {
        // fixed 4x4 sample lattice
        const int k = 4;
        double s = 0.0;
        for (int i = 0; i < k; ++i) {
            double x = B.lo[0] + (B.hi[0] - B.lo[0]) * (i + 0.5) / k;
            for (int j = 0; j < k; ++j) {
                double y = B.lo[1] + (B.hi[1] - B.lo[1]) * (j + 0.5) / k;
                s += f(x, dimension == 2 ? y : 0.0).a11;
            }
        }
        return s / (k * k);
    };

    std::vector<double> fu(static_cast<std::size_t>(n_seeds));
    std::vector<double> fv(static_cast<std::size_t>(n_seeds));
    double mean11 = 0.0, mean22 = 0.0, mean12 = 0.0;
    double cu0 = 0.5 * (U.lo[0] + U.hi[0]), cu1 = 0.5 * (U.lo[1] + U.hi[1]);
    double cv0 = 0.5 * (V.lo[0] + V.hi[0]), cv1 = 0.5 * (V.lo[1] + V.hi[1]);
    long zx = std::lround(cv0 - cu0), zy = std::lround(cv1 - cu1);
    double tmis11 = 0.0, tmis22 = 0.0, tmis12 = 0.0;

    for (int s = 0; s < n_seeds; ++s) {
        CoefficientField f = sample_field(static_cast<std::uint64_t>(s) + 1,
                                          params, dimension,
                                          Topology::free_space);
        fu[static_cast<std::size_t>(s)] = box_avg(f, U);
        fv[static_cast<std::size_t>(s)] = box_avg(f, V);
        Mat2 a0 = f(cu0, dimension == 2 ? cu1 : 0.0);
        Mat2 az = f(cu0 + static_cast<double>(zx),
                    dimension == 2 ? cu1 + static_cast<double>(zy) : 0.0);
        mean11 += a0.a11;
        mean22 += a0.a22;
        mean12 += a0.a12;
        tmis11 += a0.a11 - az.a11;
        tmis22 += a0.a22 - az.a22;
        tmis12 += a0.a12 - az.a12;
    }
    st.empirical_mean_A = {mean11 / n_seeds, mean22 / n_seeds, mean12 / n_seeds};
    Mat2 tm{tmis11 / n_seeds, tmis22 / n_seeds, tmis12 / n_seeds};
    st.translation_mismatch = tm.norm2();

    double mu = 0.0, mv = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
        mu += fu[static_cast<std::size_t>(s)];
        mv += fv[static_cast<std::size_t>(s)];
    }
    mu /= n_seeds;
    mv /= n_seeds;
    double suv = 0.0, su = 0.0, sv = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
        double du = fu[static_cast<std::size_t>(s)] - mu;
        double dv = fv[static_cast<std::size_t>(s)] - mv;
        suv += du * dv;
        su += du * du;
        sv += dv * dv;
    }
    if (su <= 0.0 || sv <= 0.0) {
        st.degenerate = true;
        st.cross_set_correlation = 0.0;
    } else {
        st.cross_set_correlation = suv / std::sqrt(su * sv);
    }
    return st;
}

}  // namespace homolab
