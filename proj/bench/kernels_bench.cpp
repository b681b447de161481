// Serial reference vs OpenMP kernels at the shapes training actually hits:
// a batch of ~400 context-stacked frames through 48->64 and 64->64 layers,
// and mask intersection counts at d = 1e4 and 1e6.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "parp/kernels.hpp"

namespace {

using namespace parp;

std::vector<double> random_vec(std::size_t n) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

template <auto Kernel>
void BM_matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  auto a = random_vec(m * k), b = random_vec(k * n);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Kernel>
void BM_matmul_at_b(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  auto a = random_vec(m * k), g = random_vec(m * n);
  std::vector<double> c(k * n);
  for (auto _ : state) {
    Kernel(a, g, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Kernel>
void BM_popcount(benchmark::State& state) {
  const auto words = static_cast<std::size_t>(state.range(0)) / 64 + 1;
  std::mt19937_64 gen(1);
  std::vector<std::uint64_t> a(words), b(words);
  for (auto& w : a) w = gen();
  for (auto& w : b) w = gen();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b));
}

#define SHAPES ->Args({400, 48, 64})->Args({400, 64, 64})->Args({2048, 256, 256})

BENCHMARK(BM_matmul<kernels::serial::matmul>) SHAPES;
BENCHMARK(BM_matmul<kernels::omp::matmul>) SHAPES;
BENCHMARK(BM_matmul_at_b<kernels::serial::matmul_at_b>) SHAPES;
BENCHMARK(BM_matmul_at_b<kernels::omp::matmul_at_b>) SHAPES;
BENCHMARK(BM_popcount<kernels::serial::popcount_and>)->Arg(10000)->Arg(1000000);
BENCHMARK(BM_popcount<kernels::omp::popcount_and>)->Arg(10000)->Arg(1000000);

}  // namespace

BENCHMARK_MAIN();
