#include <benchmark/benchmark.h>

#include <vector>

#include "tride/kernels.hpp"
#include "tride/rng.hpp"

namespace {

using tride::Matrix;
namespace kernels = tride::kernels;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    tride::Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.values())
        v = rng.uniform(-1.0, 1.0);
    return m;
}

// Batch of `rows` inputs through a 256 -> 256 layer.
template <Matrix (*Forward)(const Matrix&, const Matrix&, std::span<const double>)>
void affine_forward(benchmark::State& state)
{
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Matrix x = random_matrix(rows, 256, 1), w = random_matrix(256, 256, 2);
    const std::vector<double> b(256, 0.1);
    for (auto _ : state)
        benchmark::DoNotOptimize(Forward(x, w, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

template <void (*Backward)(const Matrix&, const Matrix&, Matrix&, std::span<double>)>
void affine_backward_params(benchmark::State& state)
{
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Matrix x = random_matrix(rows, 256, 1), dz = random_matrix(rows, 256, 2);
    Matrix dw(256, 256);
    std::vector<double> db(256);
    for (auto _ : state) {
        Backward(x, dz, dw, db);
        benchmark::DoNotOptimize(dw.values().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

// Query-by-gallery distances in a 16-dimensional embedding space.
template <Matrix (*Distances)(const Matrix&, const Matrix&)>
void distance_matrix(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix q = random_matrix(n, 16, 3), g = random_matrix(n, 16, 4);
    for (auto _ : state)
        benchmark::DoNotOptimize(Distances(q, g));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

BENCHMARK(affine_forward<kernels::serial::affine_forward>)->Name("affine_forward/serial")->Arg(112)->Arg(1024);
BENCHMARK(affine_forward<kernels::omp::affine_forward>)->Name("affine_forward/omp")->Arg(112)->Arg(1024)->UseRealTime();
BENCHMARK(affine_backward_params<kernels::serial::affine_backward_params>)
    ->Name("affine_backward_params/serial")
    ->Arg(112)
    ->Arg(1024);
BENCHMARK(affine_backward_params<kernels::omp::affine_backward_params>)
    ->Name("affine_backward_params/omp")
    ->Arg(112)
    ->Arg(1024)
    ->UseRealTime();
BENCHMARK(distance_matrix<kernels::serial::distance_matrix>)->Name("distance_matrix/serial")->Arg(320)->Arg(2000);
BENCHMARK(distance_matrix<kernels::omp::distance_matrix>)->Name("distance_matrix/omp")->Arg(320)->Arg(2000)->UseRealTime();

} // namespace

BENCHMARK_MAIN();
