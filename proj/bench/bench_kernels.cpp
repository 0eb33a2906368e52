// Serial reference vs OpenMP kernels at the sizes a training step sees.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <vector>

#include "mdaforge/kernels.hpp"
#include "mdaforge/rng.hpp"

namespace {

using mdaforge::Matrix;
namespace k = mdaforge::kernels;

Matrix filled(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  mdaforge::Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

// Batch of 32 hashed feature rows times the first encoder layer.
template <void (*Gemm)(const Matrix&, const Matrix&, Matrix&)>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = filled(32, n, 1), b = filled(n, 256, 2);
  Matrix out(32, 256);
  for (auto _ : state) {
    out.fill(0.0);
    Gemm(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * 32 * static_cast<std::int64_t>(n) * 256);
}

// Weight gradient: x^T * upstream.
template <void (*Gemm)(const Matrix&, const Matrix&, Matrix&)>
void BM_GemmAtB(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = filled(32, n, 3), b = filled(32, 256, 4);
  Matrix out(n, 256);
  for (auto _ : state) {
    out.fill(0.0);
    Gemm(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
}

template <void (*Dist)(const Matrix&, const Matrix&, Matrix&)>
void BM_PairwiseDist(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = filled(n, 128, 5), b = filled(n, 128, 6);
  Matrix out(n, n);
  for (auto _ : state) {
    Dist(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
}

template <void (*Update)(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                         const k::AdamWCoefficients&)>
void BM_AdamW(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> theta(n, 0.1), grad(n, 0.01), m(n, 0.0), v(n, 0.0);
  const k::AdamWCoefficients c{5e-5, 0.9, 0.999, 1e-8, 0.01, 0.1, 0.001};
  for (auto _ : state) {
    Update(theta, grad, m, v, c);
    benchmark::DoNotOptimize(theta.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_Gemm<k::serial::gemm_acc>)->Name("gemm/serial")->Arg(512)->Arg(2048);
BENCHMARK(BM_Gemm<k::omp::gemm_acc>)->Name("gemm/omp")->Arg(512)->Arg(2048);
BENCHMARK(BM_GemmAtB<k::serial::gemm_at_b_acc>)->Name("gemm_at_b/serial")->Arg(512)->Arg(2048);
BENCHMARK(BM_GemmAtB<k::omp::gemm_at_b_acc>)->Name("gemm_at_b/omp")->Arg(512)->Arg(2048);
BENCHMARK(BM_PairwiseDist<k::serial::pairwise_sq_dist>)->Name("pairwise_sq_dist/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_PairwiseDist<k::omp::pairwise_sq_dist>)->Name("pairwise_sq_dist/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_AdamW<k::serial::adamw_update>)->Name("adamw/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_AdamW<k::omp::adamw_update>)->Name("adamw/omp")->Arg(1 << 16)->Arg(1 << 20);

BENCHMARK_MAIN();
