#include "homolab/rate.hpp"

#include <cmath>

#include "homolab/error.hpp"

namespace homolab {

RateTable fit_rate(const std::vector<double>& scale,
                   const std::vector<double>& value, std::size_t window_begin,
                   std::size_t window_end) {
    if (scale.size() != value.size())
        throw ValidationError("scale and value columns differ in length");
    if (window_end > scale.size() || window_begin >= window_end)
        throw ValidationError("regression window out of range");
    const std::size_t n = window_end - window_begin;
    if (n < 3) throw ValidationError("regression window needs >= 3 rows");
    for (std::size_t k = 1; k < scale.size(); ++k)
        if (scale[k] <= scale[k - 1])
            throw ValidationError("scales must be strictly increasing");
    for (std::size_t k = window_begin; k < window_end; ++k)
        if (!(value[k] > 0.0))
            throw ValidationError("rate fit needs positive values in window");

    double sx = 0, sy = 0;
    for (std::size_t k = window_begin; k < window_end; ++k) {
        sx += std::log(scale[k]);
        sy += std::log(value[k]);
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = window_begin; k < window_end; ++k) {
        const double dx = std::log(scale[k]) - mx;
        const double dy = std::log(value[k]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    RateTable t;
    t.scale = scale;
    t.value = value;
    t.window_begin = window_begin;
    t.window_end = window_end;
    const double slope = sxy / sxx;
    t.exponent = -slope;
    if (syy <= 1e-300) {
        t.r2 = 1.0;  // constant data: the flat fit is exact
    } else {
        const double ss_res = syy - slope * sxy;
        t.r2 = 1.0 - ss_res / syy;
        if (t.r2 < 0.0) t.r2 = 0.0;
        if (t.r2 > 1.0) t.r2 = 1.0;
    }
    return t;
}

RateTable fit_rate_tail(const std::vector<double>& scale,
                        const std::vector<double>& value) {
    const std::size_t n = scale.size();
    std::size_t w = (n + 1) / 2;
    if (w < 3) w = n < 3 ? n : 3;
    return fit_rate(scale, value, n - w, n);
}

}  // namespace homolab
