#include "homolab/parallel.hpp"

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace homolab {

namespace {

int read_cap() {
    const char* env = std::getenv("HOMOLAB_THREADS");
    if (!env || !*env) return 0;
    int v = std::atoi(env);
    return v > 0 ? v : 0;
}

constexpr std::size_t kBlock = 4096;

double block_sum(const double* p, std::size_t n) {
    // pairwise within a block, recursion depth ~ log2(n)
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += p[i];
        return s;
    }
    std::size_t half = n / 2;
    return block_sum(p, half) + block_sum(p + half, n - half);
}

double block_dot(const double* a, const double* b, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s;
    }
    std::size_t half = n / 2;
    return block_dot(a, b, half) + block_dot(a + half, b + half, n - half);
}

double combine(std::vector<double>& parts) {
    // pairwise tree over block sums, fixed order
    std::size_t n = parts.size();
    while (n > 1) {
        std::size_t m = 0;
        for (std::size_t i = 0; i + 1 < n; i += 2) parts[m++] = parts[i] + parts[i + 1];
        if (n % 2) parts[m++] = parts[n - 1];
        n = m;
    }
    return n ? parts[0] : 0.0;
}

}  // namespace

int max_workers() {
    static int cap = read_cap();
#ifdef _OPENMP
    return cap > 0 ? cap : omp_get_max_threads();
#else
    return cap > 0 ? cap : 1;
#endif
}

void apply_worker_cap() {
#ifdef _OPENMP
    int cap = read_cap();
    if (cap > 0) omp_set_num_threads(cap);
#endif
}

double pairwise_sum_serial(std::span<const double> v) {
    std::size_t nblocks = (v.size() + kBlock - 1) / kBlock;
    if (nblocks == 0) return 0.0;
    std::vector<double> parts(nblocks);
    for (std::size_t ib = 0; ib < nblocks; ++ib) {
        std::size_t lo = ib * kBlock;
        parts[ib] = block_sum(v.data() + lo, std::min(kBlock, v.size() - lo));
    }
    return combine(parts);
}

double pairwise_sum(std::span<const double> v) {
    std::size_t nblocks = (v.size() + kBlock - 1) / kBlock;
    if (nblocks == 0) return 0.0;
    std::vector<double> parts(nblocks);
#pragma omp parallel for schedule(static)
    for (long long ib = 0; ib < static_cast<long long>(nblocks); ++ib) {
        std::size_t lo = static_cast<std::size_t>(ib) * kBlock;
        parts[static_cast<std::size_t>(ib)] =
            block_sum(v.data() + lo, std::min(kBlock, v.size() - lo));
    }
    return combine(parts);
}

double pairwise_dot_serial(std::span<const double> a,
                           std::span<const double> b) {
    std::size_t nblocks = (a.size() + kBlock - 1) / kBlock;
    if (nblocks == 0) return 0.0;
    std::vector<double> parts(nblocks);
    for (std::size_t ib = 0; ib < nblocks; ++ib) {
        std::size_t lo = ib * kBlock;
        parts[ib] =
            block_dot(a.data() + lo, b.data() + lo, std::min(kBlock, a.size() - lo));
    }
    return combine(parts);
}

double pairwise_dot(std::span<const double> a, std::span<const double> b) {
    std::size_t nblocks = (a.size() + kBlock - 1) / kBlock;
    if (nblocks == 0) return 0.0;
    std::vector<double> parts(nblocks);
#pragma omp parallel for schedule(static)
    for (long long ib = 0; ib < static_cast<long long>(nblocks); ++ib) {
        std::size_t lo = static_cast<std::size_t>(ib) * kBlock;
        parts[static_cast<std::size_t>(ib)] =
            block_dot(a.data() + lo, b.data() + lo, std::min(kBlock, a.size() - lo));
    }
    return combine(parts);
}

}  // namespace homolab
