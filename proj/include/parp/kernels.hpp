#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Dense inner loops used by the encoder and the mask analytics.
//
// Every kernel exists twice: `serial::` is the reference, `omp::` splits the
// outer loop across OpenMP threads. Each output element is produced by one
// thread with the same inner loop order as the serial version, so the two are
// bitwise identical and thread count never changes a training trajectory.
// The unqualified entry points in `parp::kernels` dispatch between them.
//
// Shapes: matmul      C[m x n] = A[m x k] * B[k x n]
//         matmul_at_b C[k x n] = A[m x k]^T * G[m x n]
//         matmul_a_bt C[m x k] = G[m x n] * B[k x n]^T

namespace parp::kernels {

namespace serial {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b(std::span<const double> a, std::span<const double> g, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);
std::uint64_t popcount_and(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
std::uint64_t popcount_or(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
}  // namespace serial

namespace omp {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b(std::span<const double> a, std::span<const double> g, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);
std::uint64_t popcount_and(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
std::uint64_t popcount_or(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
}  // namespace omp

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b(std::span<const double> a, std::span<const double> g, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);
std::uint64_t popcount_and(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
std::uint64_t popcount_or(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

enum class Mode { serial, parallel };

/// Process-wide dispatch mode. Defaults to parallel.
void set_mode(Mode mode);
Mode mode();

/// Below this many multiply-adds the dispatcher stays serial.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 16;

}  // namespace parp::kernels
