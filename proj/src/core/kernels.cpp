#include "parp/kernels.hpp"

#include <atomic>
#include <bit>

#include <omp.h>

namespace parp::kernels {
namespace {

// Row kernels shared by both variants so per-element summation order matches.

inline void matmul_row(const double* a, const double* b, double* c, std::size_t k,
                       std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_at_b_row(const double* a, const double* g, double* c, std::size_t row,
                            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double av = a[i * k + row];
    const double* grow = g + i * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * grow[j];
  }
}

inline void matmul_a_bt_row(const double* g, const double* b, double* c, std::size_t k,
                            std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += g[j] * brow[j];
    c[p] = acc;
  }
}

std::atomic<Mode> g_mode{Mode::parallel};

bool go_parallel(std::size_t work) {
  return g_mode.load(std::memory_order_relaxed) == Mode::parallel &&
         work >= kParallelThreshold && !omp_in_parallel();
}

}  // namespace

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    matmul_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
}

void matmul_at_b(std::span<const double> a, std::span<const double> g, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < k; ++r)
    matmul_at_b_row(a.data(), g.data(), c.data() + r * n, r, m, k, n);
}

void matmul_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    matmul_a_bt_row(g.data() + i * n, b.data(), c.data() + i * k, k, n);
}

std::uint64_t popcount_and(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::popcount(a[i] & b[i]);
  return total;
}

std::uint64_t popcount_or(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::popcount(a[i] | b[i]);
  return total;
}

}  // namespace serial

namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_row(a.data() + r * k, b.data(), c.data() + r * n, k, n);
  }
}

void matmul_at_b(std::span<const double> a, std::span<const double> g, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_at_b_row(a.data(), g.data(), c.data() + r * n, r, m, k, n);
  }
}

void matmul_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_a_bt_row(g.data() + r * n, b.data(), c.data() + r * k, k, n);
  }
}

// Integer reductions are order-independent, so a plain reduction is exact.
std::uint64_t popcount_and(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::uint64_t total = 0;
  const auto words = static_cast<std::int64_t>(a.size());
#pragma omp parallel for reduction(+ : total) schedule(static)
  for (std::int64_t i = 0; i < words; ++i)
    total += std::popcount(a[static_cast<std::size_t>(i)] & b[static_cast<std::size_t>(i)]);
  return total;
}

std::uint64_t popcount_or(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::uint64_t total = 0;
  const auto words = static_cast<std::int64_t>(a.size());
#pragma omp parallel for reduction(+ : total) schedule(static)
  for (std::int64_t i = 0; i < words; ++i)
    total += std::popcount(a[static_cast<std::size_t>(i)] | b[static_cast<std::size_t>(i)]);
  return total;
}

}  // namespace omp

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  if (go_parallel(m * k * n))
    omp::matmul(a, b, c, m, k, n);
  else
    serial::matmul(a, b, c, m, k, n);
}

void matmul_at_b(std::span<const double> a, std::span<const double> g, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  if (go_parallel(m * k * n))
    omp::matmul_at_b(a, g, c, m, k, n);
  else
    serial::matmul_at_b(a, g, c, m, k, n);
}

void matmul_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  if (go_parallel(m * k * n))
    omp::matmul_a_bt(g, b, c, m, k, n);
  else
    serial::matmul_a_bt(g, b, c, m, k, n);
}

std::uint64_t popcount_and(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  return go_parallel(a.size() * 64) ? omp::popcount_and(a, b) : serial::popcount_and(a, b);
}

std::uint64_t popcount_or(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  return go_parallel(a.size() * 64) ? omp::popcount_or(a, b) : serial::popcount_or(a, b);
}

void set_mode(Mode mode) { g_mode.store(mode, std::memory_order_relaxed); }
Mode mode() { return g_mode.load(std::memory_order_relaxed); }

}  // namespace parp::kernels
