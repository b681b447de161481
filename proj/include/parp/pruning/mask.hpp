#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "parp/autonet/param_store.hpp"
#include "parp/digest.hpp"

namespace parp::pruning {

/// Fixed-length bit array, LSB-first within 64-bit words, padding bits zero.
class BitVec {
 public:
  BitVec() = default;
  BitVec(std::size_t bits, bool value);

  std::size_t size() const { return bits_; }
  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool value);
  std::size_t count() const;

  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const BitVec&, const BitVec&) = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Keep-bits (1 = kept, 0 = pruned) for every prunable param of a layout.
class Mask {
 public:
  struct Entry {
    std::string name;
    BitVec bits;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  Mask() = default;
  Mask(std::vector<Entry> entries, Sha256 layout, double declared_sparsity);

  /// All-kept mask over the store's prunable params.
  static Mask ones(const autonet::ParamStore& store);

  std::span<const Entry> entries() const { return entries_; }
  std::span<Entry> entries() { return entries_; }
  const Entry* find(std::string_view name) const;

  const Sha256& layout_hash() const { return layout_; }
  double declared_sparsity() const { return declared_; }
  void set_declared_sparsity(double s) { declared_ = s; }

  /// d_prunable
  std::size_t total_bits() const;
  std::size_t kept_count() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::vector<Entry> entries_;
  Sha256 layout_{};
  double declared_ = 0.0;
};

/// Fraction of zero bits.
double sparsity(const Mask& mask);

/// Throws BindingError unless the mask was built for this store's layout.
void check_binding(const autonet::ParamStore& store, const Mask& mask);
/// Throws BindingError unless the two masks share a layout.
void check_same_layout(const Mask& a, const Mask& b);

/// Binary format:
///   "PARPMASK" | u16 version | layout hash[32] | f64 declared sparsity |
///   u32 param count | { u16 name len | name | u64 bit count | packed bits }
/// Bits are LSB-first within each byte, zero-padded; all integers little-endian.
std::vector<std::uint8_t> encode_mask(const Mask& mask);
Mask decode_mask(std::span<const std::uint8_t> bytes);
void save_mask(const Mask& mask, const std::filesystem::path& path);
Mask load_mask(const std::filesystem::path& path);

inline constexpr std::uint16_t kMaskFormatVersion = 1;

}  // namespace parp::pruning
