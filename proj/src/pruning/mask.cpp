#include "parp/pruning/mask.hpp"

#include <bit>
#include <cstring>

#include "parp/binary_io.hpp"
#include "parp/error.hpp"

namespace parp::pruning {
namespace {

constexpr char kMagic[8] = {'P', 'A', 'R', 'P', 'M', 'A', 'S', 'K'};

}  // namespace

BitVec::BitVec(std::size_t bits, bool value)
    : bits_(bits), words_((bits + 63) / 64, value ? ~std::uint64_t{0} : 0) {
  if (value && (bits_ & 63)) words_.back() &= (std::uint64_t{1} << (bits_ & 63)) - 1;
}

void BitVec::set(std::size_t i, bool value) {
  const std::uint64_t bit = std::uint64_t{1} << (i & 63);
  if (value)
    words_[i >> 6] |= bit;
  else
    words_[i >> 6] &= ~bit;
}

std::size_t BitVec::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

Mask::Mask(std::vector<Entry> entries, Sha256 layout, double declared_sparsity)
    : entries_(std::move(entries)), layout_(layout), declared_(declared_sparsity) {}

Mask Mask::ones(const autonet::ParamStore& store) {
  std::vector<Entry> entries;
  for (const auto& p : store.params())
    if (p.prunable) entries.push_back({p.name, BitVec(p.value.size(), true)});
  return Mask(std::move(entries), store.layout_hash(), 0.0);
}

const Mask::Entry* Mask::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

std::size_t Mask::total_bits() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.bits.size();
  return n;
}

std::size_t Mask::kept_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.bits.count();
  return n;
}

double sparsity(const Mask& mask) {
  const std::size_t total = mask.total_bits();
  if (total == 0) return 0.0;
  return static_cast<double>(total - mask.kept_count()) / static_cast<double>(total);
}

void check_binding(const autonet::ParamStore& store, const Mask& mask) {
  if (store.layout_hash() != mask.layout_hash())
    throw BindingError("mask layout " + to_hex(mask.layout_hash()).substr(0, 12) +
                       " does not match store layout " +
                       to_hex(store.layout_hash()).substr(0, 12));
}

void check_same_layout(const Mask& a, const Mask& b) {
  if (a.layout_hash() != b.layout_hash() || a.entries().size() != b.entries().size())
    throw BindingError("masks are bound to different layouts");
}

std::vector<std::uint8_t> encode_mask(const Mask& mask) {
  ByteWriter w;
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 8));
  w.put<std::uint16_t>(kMaskFormatVersion);
  w.put_bytes(mask.layout_hash());
  w.put<double>(mask.declared_sparsity());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(mask.entries().size()));
  for (const auto& e : mask.entries()) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.put_string(e.name);
    w.put<std::uint64_t>(e.bits.size());
    const std::size_t nbytes = (e.bits.size() + 7) / 8;
    const auto words = e.bits.words();
    for (std::size_t b = 0; b < nbytes; ++b)
      w.put<std::uint8_t>(static_cast<std::uint8_t>(words[b / 8] >> (8 * (b % 8))));
  }
  return w.take();
}

Mask decode_mask(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (std::memcmp(r.get_bytes(8).data(), kMagic, 8) != 0) throw FormatError("bad mask magic");
  if (r.get<std::uint16_t>() != kMaskFormatVersion) throw FormatError("unsupported mask version");
  Sha256 layout{};
  auto h = r.get_bytes(32);
  std::copy(h.begin(), h.end(), layout.begin());
  const double declared = r.get<double>();
  if (!(declared >= 0.0 && declared <= 1.0)) throw FormatError("declared sparsity outside [0,1]");
  const auto count = r.get<std::uint32_t>();
  std::vector<Mask::Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>();
    Mask::Entry e{r.get_string(len), {}};
    const auto nbits = static_cast<std::size_t>(r.get<std::uint64_t>());
    e.bits = BitVec(nbits, false);
    auto packed = r.get_bytes((nbits + 7) / 8);
    for (std::size_t bit = 0; bit < nbits; ++bit)
      if ((packed[bit / 8] >> (bit % 8)) & 1u) e.bits.set(bit, true);
    if ((nbits & 7) && (packed.back() >> (nbits & 7)) != 0)
      throw FormatError("nonzero padding bits in mask " + e.name);
    entries.push_back(std::move(e));
  }
  if (!r.at_end()) throw FormatError("trailing bytes in mask file");
  return Mask(std::move(entries), layout, declared);
}

void save_mask(const Mask& mask, const std::filesystem::path& path) {
  write_file_atomic(path, encode_mask(mask));
}

Mask load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

}  // namespace parp::pruning
