#include "parp/rng.hpp"

#include <cmath>
#include <numbers>

namespace parp {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return mix64(h);
}

Rng::Rng(std::uint64_t seed, std::string_view site) : key_(mix64(mix64(seed) ^ hash_label(site))) {}

Rng Rng::split(std::string_view site) const { return Rng(mix64(key_ ^ hash_label(site))); }

Rng Rng::split(std::uint64_t index) const {
  return Rng(mix64(key_ ^ mix64(index + 0x632BE59BD9B4E019ull)));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t ctr = counter_++;
  return mix64(key_ + mix64(ctr));
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller with one output per call; keeps draws a pure function of counter.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  auto m = static_cast<unsigned __int128>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<unsigned __int128>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace parp
