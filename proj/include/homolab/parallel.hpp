#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace homolab {

// Worker policy. HOMOLAB_THREADS caps the OpenMP team size; 0/unset means
// "whatever OpenMP picks". All kernels are written so results are
// bit-identical for every worker count: outputs are written node-wise and
// reductions use a fixed blocked pairwise tree.
int max_workers();
void apply_worker_cap();

// Deterministic sums: fixed block size, serial pairwise combine of block
// sums. The block sums themselves may be computed in parallel.
double pairwise_sum(std::span<const double> v);
double pairwise_sum_serial(std::span<const double> v);
double pairwise_dot(std::span<const double> a, std::span<const double> b);
double pairwise_dot_serial(std::span<const double> a,
                           std::span<const double> b);

}  // namespace homolab
