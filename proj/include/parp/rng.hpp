#pragma once

#include <cstdint>
#include <string_view>

namespace parp {

/// Counter-based generator. A stream is identified by a 64-bit key derived
/// from (run seed, site label); draw i is a pure function of (key, i), so
/// streams can be split and replayed without shared state.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view site);

  /// Child stream for a sub-site; does not advance this stream.
  Rng split(std::string_view site) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_label(std::string_view label);

}  // namespace parp
