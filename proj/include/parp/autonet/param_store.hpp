#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parp/digest.hpp"
#include "parp/tensor.hpp"

namespace parp::autonet {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool prunable = false;
};

/// Ordered, name-unique collection of parameters. Iteration order is the
/// insertion order and is what every mask, checkpoint and digest follows.
class ParamStore {
 public:
  Param& add(std::string name, Tensor value, bool prunable);
  void remove(std::string_view name);

  Param* find(std::string_view name);
  const Param* find(std::string_view name) const;
  Param& get(std::string_view name);
  const Param& get(std::string_view name) const;

  std::span<Param> params() { return params_; }
  std::span<const Param> params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Total element count over prunable params (d_prunable).
  std::size_t prunable_size() const;
  /// Digest of the prunable layout (names and shapes, in order). Masks bind to it.
  Sha256 layout_hash() const;

  void zero_grad();
  bool values_equal(const ParamStore& other) const;

  /// Content digest of names, flags, shapes and values.
  Sha256 content_hash() const;

  std::vector<std::uint8_t> serialize() const;
  static ParamStore deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

 private:
  std::vector<Param> params_;
};

}  // namespace parp::autonet
