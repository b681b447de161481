#include "parp/autonet/param_store.hpp"

#include <algorithm>
#include <cstring>

#include "parp/binary_io.hpp"
#include "parp/error.hpp"

namespace parp::autonet {
namespace {

constexpr char kCheckpointMagic[8] = {'P', 'A', 'R', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace

Param& ParamStore::add(std::string name, Tensor value, bool prunable) {
  if (find(name)) throw ConfigError("duplicate param name: " + name);
  Tensor grad(value.shape());
  params_.push_back(Param{std::move(name), std::move(value), std::move(grad), prunable});
  return params_.back();
}

void ParamStore::remove(std::string_view name) {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Param& p) { return p.name == name; });
  if (it == params_.end()) throw ConfigError("no param named " + std::string(name));
  params_.erase(it);
}

Param* ParamStore::find(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Param* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

Param& ParamStore::get(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw ConfigError("no param named " + std::string(name));
}

const Param& ParamStore::get(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw ConfigError("no param named " + std::string(name));
}

std::size_t ParamStore::prunable_size() const {
  std::size_t total = 0;
  for (const auto& p : params_)
    if (p.prunable) total += p.value.size();
  return total;
}

Sha256 ParamStore::layout_hash() const {
  std::string key;
  for (const auto& p : params_) {
    if (!p.prunable) continue;
    key += p.name;
    for (auto d : p.value.shape()) key += ':' + std::to_string(d);
    key += ';';
  }
  return sha256(key);
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.prunable != b.prunable || !(a.value == b.value)) return false;
  }
  return true;
}

Sha256 ParamStore::content_hash() const {
  const auto bytes = serialize();
  return sha256(bytes);
}

std::vector<std::uint8_t> ParamStore::serialize() const {
  ByteWriter w;
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kCheckpointMagic), 8));
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.put_string(p.name);
    w.put<std::uint8_t>(p.prunable ? 1 : 0);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.put<std::uint64_t>(d);
    for (double v : p.value.data()) w.put<double>(v);
  }
  return w.take();
}

ParamStore ParamStore::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.get_bytes(8);
  if (std::memcmp(magic.data(), kCheckpointMagic, 8) != 0)
    throw FormatError("bad checkpoint magic");
  if (r.get<std::uint16_t>() != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version");
  const auto count = r.get<std::uint32_t>();
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>();
    auto name = r.get_string(len);
    const bool prunable = r.get<std::uint8_t>() != 0;
    const auto rank = r.get<std::uint8_t>();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    std::vector<double> data(shape_product(shape));
    for (auto& v : data) v = r.get<double>();
    store.add(std::move(name), Tensor(std::move(shape), std::move(data)), prunable);
  }
  if (!r.at_end()) throw FormatError("trailing bytes in checkpoint");
  return store;
}

void ParamStore::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

}  // namespace parp::autonet
