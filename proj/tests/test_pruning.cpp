#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "parp/autonet/model.hpp"
#include "parp/error.hpp"
#include "parp/pruning/mask.hpp"
#include "parp/pruning/prune.hpp"

using namespace parp;
using namespace parp::pruning;
using autonet::ParamStore;

namespace {

/// Prunable params with distinct magnitudes plus an unprunable one.
ParamStore distinct_store(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> vals(d);
  for (std::size_t i = 0; i < d; ++i) vals[i] = (static_cast<double>(i) + 1.0) * 1e-3;
  std::shuffle(vals.begin(), vals.end(), gen);
  for (auto& v : vals)
    if (gen() & 1) v = -v;
  ParamStore store;
  const std::size_t first = d / 3;
  store.add("a", Tensor({first}, std::vector<double>(vals.begin(), vals.begin() + static_cast<long>(first))), true);
  store.add("norm", Tensor({4}, 1e-9), false);
  store.add("b", Tensor({d - first}, std::vector<double>(vals.begin() + static_cast<long>(first), vals.end())), true);
  return store;
}

std::vector<bool> flat_bits(const Mask& m) {
  std::vector<bool> out;
  for (const auto& e : m.entries())
    for (std::size_t i = 0; i < e.bits.size(); ++i) out.push_back(e.bits.get(i));
  return out;
}

std::vector<double> flat_prunable(const ParamStore& s) {
  std::vector<double> out;
  for (const auto& p : s.params())
    if (p.prunable) out.insert(out.end(), p.value.data().begin(), p.value.data().end());
  return out;
}

}  // namespace

TEST_CASE("global_magnitude_mask examples") {
  ParamStore store;
  store.add("w", Tensor::vector({0.1, -0.5}), true);
  store.add("v", Tensor::vector({0.3, 0.05}), true);

  CHECK(sparsity(global_magnitude_mask(store, 0.0)) == 0.0);
  CHECK(sparsity(global_magnitude_mask(store, 1.0)) == 1.0);

  Mask m = global_magnitude_mask(store, 0.5);
  CHECK_FALSE(m.find("w")->bits.get(0));
  CHECK(m.find("w")->bits.get(1));
  CHECK(m.find("v")->bits.get(0));
  CHECK_FALSE(m.find("v")->bits.get(1));
}

TEST_CASE("ties break by param order then index") {
  ParamStore store;
  store.add("w", Tensor::vector({0.2, 0.2, 0.9}), true);
  store.add("v", Tensor::vector({0.2, 0.9}), true);
  Mask m = global_magnitude_mask(store, 0.4);  // round(2.0) = 2 cleared
  CHECK(flat_bits(m) == std::vector<bool>{false, false, true, true, true});
}

TEST_CASE("pruned count rounds half away from zero") {
  CHECK(pruned_count(0.5, 5) == 3);
  CHECK(pruned_count(0.25, 10) == 3);
  CHECK(pruned_count(0.1, 10000) == 1000);
  CHECK_THROWS_AS(pruned_count(1.5, 10), ConfigError);
}

TEST_CASE("magnitude mask: exact count, exchange property and nesting") {
  for (std::uint64_t seed : {1, 2, 3}) {
    ParamStore store = distinct_store(2000 + seed * 7, seed);
    const auto w = flat_prunable(store);
    std::vector<bool> prev;
    for (int i = 1; i <= 9; ++i) {
      const double s = i / 10.0;
      Mask m = global_magnitude_mask(store, s);
      const auto bits = flat_bits(m);
      const std::size_t d = bits.size();
      CHECK(sparsity(m) == static_cast<double>(pruned_count(s, d)) / static_cast<double>(d));
      double max_pruned = 0.0, min_kept = 1e9;
      for (std::size_t k = 0; k < d; ++k) {
        if (bits[k]) min_kept = std::min(min_kept, std::abs(w[k]));
        else max_pruned = std::max(max_pruned, std::abs(w[k]));
      }
      CHECK(max_pruned < min_kept);
      if (!prev.empty())
        for (std::size_t k = 0; k < d; ++k) CHECK((!bits[k] || prev[k]));
      prev = bits;
    }
  }
}

TEST_CASE("within-mask pruning keeps prior cuts") {
  ParamStore store = distinct_store(500, 9);
  Mask first = random_mask(store, 0.3, 4);
  Mask next = global_magnitude_mask(store, 0.5, &first);
  const auto a = flat_bits(first), b = flat_bits(next);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK((!b[k] || a[k]));
  CHECK(sparsity(next) == 0.5);
}

TEST_CASE("random_mask") {
  ParamStore store = distinct_store(1000, 5);
  CHECK(sparsity(random_mask(store, 0.0, 1)) == 0.0);
  CHECK(random_mask(store, 0.37, 42) == random_mask(store, 0.37, 42));
  CHECK_FALSE(random_mask(store, 0.37, 42) == random_mask(store, 0.37, 43));
  CHECK(sparsity(random_mask(store, 0.37, 42)) == 0.37);
}

TEST_CASE("apply_zero") {
  ParamStore store;
  store.add("w", Tensor::vector({3.0, 4.0}), true);
  store.add("g", Tensor::vector({1.0, 1.0}), false);
  const ParamStore before = store;

  apply_zero(store, Mask::ones(store));
  CHECK(store.values_equal(before));

  Mask m = Mask::ones(store);
  m.entries()[0].bits.set(0, false);
  apply_zero(store, m);
  CHECK(store.get("w").value == Tensor::vector({0.0, 4.0}));

  apply_zero(store, global_magnitude_mask(store, 1.0));
  CHECK(store.get("w").value == Tensor::vector({0.0, 0.0}));
  CHECK(store.get("g").value == Tensor::vector({1.0, 1.0}));
}

TEST_CASE("apply_zero reaches at least the declared sparsity and spares non-prunable params") {
  auto model = autonet::make_encoder({}, Rng(3, "init"));
  autonet::attach_head(model, "task", 5, Rng(3, "head"));
  const ParamStore before = model.store;
  for (double s : {0.1, 0.5, 0.9}) {
    ParamStore store = before;
    Mask m = global_magnitude_mask(store, s);
    apply_zero(store, m);
    const double d = static_cast<double>(store.prunable_size());
    CHECK(weight_sparsity(store) >= static_cast<double>(pruned_count(s, store.prunable_size())) / d);
    for (const auto& p : store.params())
      if (!p.prunable) CHECK(p.value == before.get(p.name).value);
  }
}

TEST_CASE("binding errors") {
  ParamStore a;
  a.add("w", Tensor::vector({1.0, 2.0}), true);
  ParamStore b;
  b.add("w", Tensor::vector({1.0, 2.0, 3.0}), true);
  CHECK_THROWS_AS(apply_zero(b, Mask::ones(a)), BindingError);
  CHECK_THROWS_AS(freeze_apply(b, Mask::ones(a)), BindingError);
}

TEST_CASE("freeze hook pins masked weights, grads and moments") {
  ParamStore store;
  store.add("w", Tensor::vector({0.5, -0.3, 0.8}), true);
  Mask m = Mask::ones(store);
  m.entries()[0].bits.set(1, false);
  autonet::Optimizer opt(autonet::OptimizerKind::adam, store);
  auto hook = freeze_apply(store, m);
  apply_zero(store, m);
  for (int step = 0; step < 25; ++step) {
    for (std::size_t i = 0; i < 3; ++i) store.get("w").grad[i] = 1.0 + 0.1 * step;
    opt.step(store, 0.01);
    hook(store, opt);
    CHECK(store.get("w").value[1] == 0.0);
    CHECK(opt.adam().first[0][1] == 0.0);
  }
  CHECK(store.get("w").value[0] != 0.5);
}

TEST_CASE("sparsity counts zero bits") {
  ParamStore store;
  store.add("w", Tensor({10}), true);
  Mask m = Mask::ones(store);
  CHECK(sparsity(m) == 0.0);
  for (std::size_t i : {1u, 4u, 9u}) m.entries()[0].bits.set(i, false);
  CHECK(sparsity(m) == doctest::Approx(0.3));
  CHECK(sparsity(global_magnitude_mask(store, 1.0)) == 1.0);
}

TEST_CASE("mask file layout is bit-exact") {
  ParamStore store;
  store.add("ab", Tensor({10}), true);
  Mask m = Mask::ones(store);
  for (std::size_t i : {0u, 3u, 9u}) m.entries()[0].bits.set(i, false);
  m.set_declared_sparsity(0.3);
  const auto bytes = encode_mask(m);
  REQUIRE(bytes.size() == 8 + 2 + 32 + 8 + 4 + 2 + 2 + 8 + 2);
  CHECK(std::memcmp(bytes.data(), "PARPMASK", 8) == 0);
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 0);
  CHECK(std::equal(bytes.begin() + 10, bytes.begin() + 42, store.layout_hash().begin()));
  double declared;
  std::memcpy(&declared, bytes.data() + 42, 8);
  CHECK(declared == 0.3);
  CHECK(bytes[50] == 1);  // param count, little-endian
  CHECK(bytes[54] == 2);  // name length
  CHECK(bytes[56] == 'a');
  CHECK(bytes[58] == 10);  // bit count
  // bits 0..7 = 0,1,1,0,1,1,1,1 -> 0b11110110; bits 8,9 = 1,0 -> 0b01
  CHECK(bytes[66] == 0xF6);
  CHECK(bytes[67] == 0x01);
}

TEST_CASE("mask save/load round trip and corruption") {
  auto model = autonet::make_encoder({}, Rng(8, "init"));
  const auto dir = std::filesystem::temp_directory_path() / "parp_test_masks";
  std::filesystem::create_directories(dir);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Mask m = random_mask(model.store, 0.1 * static_cast<double>(seed + 1), seed);
    save_mask(m, dir / "m.bin");
    CHECK(load_mask(dir / "m.bin") == m);
  }
  auto bytes = encode_mask(Mask::ones(model.store));
  bytes[0] ^= 0xFF;
  CHECK_THROWS_AS(decode_mask(bytes), FormatError);
  bytes = encode_mask(Mask::ones(model.store));
  bytes.pop_back();
  CHECK_THROWS_AS(decode_mask(bytes), FormatError);

  autonet::EncoderConfig other;
  other.hidden_dim = 32;
  auto other_model = autonet::make_encoder(other, Rng(8, "init"));
  save_mask(Mask::ones(model.store), dir / "m.bin");
  CHECK_THROWS_AS(apply_zero(other_model.store, load_mask(dir / "m.bin")), BindingError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("progressive schedules") {
  auto lin = progressive_schedule(0.7, 0.9, 4);
  REQUIRE(lin.points.size() == 4);
  CHECK(lin.points[0].second == doctest::Approx(0.75));
  CHECK(lin.points[1].second == doctest::Approx(0.80));
  CHECK(lin.points[2].second == doctest::Approx(0.85));
  CHECK(lin.points[3].second == 0.9);
  CHECK(lin.at(7) == 0.9);

  auto one = progressive_schedule(0.5 - 1e-9, 0.5, 1);
  CHECK(one.points == std::vector<std::pair<std::int64_t, double>>{{1, 0.5}});

  auto geo = progressive_schedule(0.5, 0.875, 3, ScheduleShape::geometric);
  CHECK(geo.points[0].second == doctest::Approx(1.0 - 0.5 * std::pow(0.25, 1.0 / 3.0)));
  CHECK(geo.points[2].second == 0.875);
}
