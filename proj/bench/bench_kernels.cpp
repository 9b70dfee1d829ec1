#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "homolab/field.hpp"
#include "homolab/operator.hpp"
#include "homolab/parallel.hpp"

using namespace homolab;

namespace {

// one shared 108x108 torus operator (period 27, h = 1/4)
struct Setup {
    CoefficientField field;
    Grid grid;
    GridOperator op;
    std::vector<double> u;

    Setup()
        : field(sample_field(7, EllipticityParams{}, 2, Topology::torus, 27)),
          grid(Grid::torus_grid(2, 27, 4)),
          op(assemble_generator(field, grid)),
          u(static_cast<std::size_t>(grid.node_count())) {
        for (std::size_t i = 0; i < u.size(); ++i)
            u[i] = std::sin(0.1 * static_cast<double>(i));
    }
};

Setup& setup() {
    static Setup s;
    return s;
}

}  // namespace

static void BM_apply(benchmark::State& state) {
    auto& s = setup();
    std::vector<double> out(s.u.size());
    for (auto _ : state) {
        apply(s.op, s.u, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_apply);

static void BM_apply_serial(benchmark::State& state) {
    auto& s = setup();
    std::vector<double> out(s.u.size());
    for (auto _ : state) {
        apply_serial(s.op, s.u, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_apply_serial);

static void BM_apply_transpose(benchmark::State& state) {
    auto& s = setup();
    std::vector<double> out(s.u.size());
    for (auto _ : state) {
        apply_transpose(s.op, s.u, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_apply_transpose);

static void BM_apply_transpose_serial(benchmark::State& state) {
    auto& s = setup();
    std::vector<double> out(s.u.size());
    for (auto _ : state) {
        apply_transpose_serial(s.op, s.u, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_apply_transpose_serial);

static void BM_parabolic_step(benchmark::State& state) {
    auto& s = setup();
    std::vector<double> u = s.u, scratch(u.size());
    const double dt = default_dt(s.op);
    for (auto _ : state) {
        parabolic_step(s.op, u, dt, scratch);
        benchmark::DoNotOptimize(u.data());
    }
}
BENCHMARK(BM_parabolic_step);

static void BM_parabolic_step_serial(benchmark::State& state) {
    auto& s = setup();
    std::vector<double> u = s.u, scratch(u.size());
    const double dt = default_dt(s.op);
    for (auto _ : state) {
        parabolic_step_serial(s.op, u, dt, scratch);
        benchmark::DoNotOptimize(u.data());
    }
}
BENCHMARK(BM_parabolic_step_serial);

static void BM_pairwise_sum(benchmark::State& state) {
    std::vector<double> v(1 << 20);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::cos(0.01 * static_cast<double>(i));
    for (auto _ : state) {
        double s = pairwise_sum(v);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_pairwise_sum);

static void BM_pairwise_sum_serial(benchmark::State& state) {
    std::vector<double> v(1 << 20);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::cos(0.01 * static_cast<double>(i));
    for (auto _ : state) {
        double s = pairwise_sum_serial(v);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_pairwise_sum_serial);

BENCHMARK_MAIN();
