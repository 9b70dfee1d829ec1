#pragma once

#include <cstddef>
#include <vector>

namespace homolab {

// Log-log regression table for algebraic-rate measurements. exponent is the
// decay rate of value against growing scale (value ~ scale^-exponent);
// ladders indexed by a shrinking parameter fit against its inverse.
struct RateTable {
    std::vector<double> scale;
    std::vector<double> value;
    double exponent = 0.0;
    double r2 = 0.0;
    std::size_t window_begin = 0, window_end = 0;  // [begin, end) rows fitted
};

RateTable fit_rate(const std::vector<double>& scale,
                   const std::vector<double>& value, std::size_t window_begin,
                   std::size_t window_end);

// window = the last ceil(n/2) rows (pre-asymptotic rungs pollute rate fits)
RateTable fit_rate_tail(const std::vector<double>& scale,
                        const std::vector<double>& value);

}  // namespace homolab
