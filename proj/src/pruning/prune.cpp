#include "parp/pruning/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parp/error.hpp"
#include "parp/rng.hpp"

namespace parp::pruning {
namespace {

void check_sparsity(double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("sparsity must be in [0,1]");
}

}  // namespace

std::size_t pruned_count(double s, std::size_t d) {
  check_sparsity(s);
  return std::min(d, static_cast<std::size_t>(std::round(s * static_cast<double>(d))));
}

Mask global_magnitude_mask(const autonet::ParamStore& store, double s, const Mask* within) {
  if (within) check_binding(store, *within);
  Mask mask = Mask::ones(store);
  const std::size_t d = mask.total_bits();
  const std::size_t k = pruned_count(s, d);
  mask.set_declared_sparsity(s);
  if (k == 0) return mask;

  struct Slot {
    double magnitude;
    std::uint32_t entry;
    std::uint32_t index;
  };
  std::vector<Slot> slots;
  slots.reserve(d);
  std::uint32_t e = 0;
  for (const auto& p : store.params()) {
    if (!p.prunable) continue;
    const BitVec* prior = within ? &within->entries()[e].bits : nullptr;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double mag = (prior && !prior->get(i)) ? -1.0 : std::abs(p.value[i]);
      slots.push_back({mag, e, static_cast<std::uint32_t>(i)});
    }
    ++e;
  }
  // Slots are already in (entry, index) order; partitioning on magnitude then
  // that order gives the deterministic tie-break.
  auto less = [](const Slot& a, const Slot& b) {
    if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
    if (a.entry != b.entry) return a.entry < b.entry;
    return a.index < b.index;
  };
  std::nth_element(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(k - 1), slots.end(), less);
  const Slot pivot = slots[k - 1];
  auto entries = mask.entries();
  for (const auto& slot : slots)
    if (!less(pivot, slot)) entries[slot.entry].bits.set(slot.index, false);
  return mask;
}

Mask random_mask(const autonet::ParamStore& store, double s, std::uint64_t seed) {
  Mask mask = Mask::ones(store);
  const std::size_t d = mask.total_bits();
  const std::size_t k = pruned_count(s, d);
  mask.set_declared_sparsity(s);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, "random-mask");
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& e : mask.entries()) {
    offsets.push_back(offset);
    offset += e.bits.size();
  }
  auto entries = mask.entries();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t flat = order[i];
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat) - 1;
    const auto entry = static_cast<std::size_t>(it - offsets.begin());
    entries[entry].bits.set(flat - *it, false);
  }
  return mask;
}

void apply_zero(autonet::ParamStore& store, const Mask& mask) {
  check_binding(store, mask);
  std::size_t e = 0;
  for (auto& p : store.params()) {
    if (!p.prunable) continue;
    const auto& bits = mask.entries()[e++].bits;
    for (std::size_t i = 0; i < p.value.size(); ++i)
      if (!bits.get(i)) p.value[i] = 0.0;
  }
}

StepHook freeze_apply(const autonet::ParamStore& store, Mask mask) {
  check_binding(store, mask);
  return [mask = std::move(mask)](autonet::ParamStore& s, autonet::Optimizer& opt) {
    check_binding(s, mask);
    std::size_t e = 0;
    auto params = s.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k];
      if (!p.prunable) continue;
      const auto& bits = mask.entries()[e++].bits;
      for (std::size_t i = 0; i < p.value.size(); ++i)
        if (!bits.get(i)) p.value[i] = p.grad[i] = 0.0;
      opt.zero_moments(k, [&bits](std::size_t i) { return bits.get(i); });
    }
  };
}

double weight_sparsity(const autonet::ParamStore& store) {
  std::size_t zeros = 0, total = 0;
  for (const auto& p : store.params()) {
    if (!p.prunable) continue;
    total += p.value.size();
    for (double v : p.value.data()) zeros += v == 0.0;
  }
  return total ? static_cast<double>(zeros) / static_cast<double>(total) : 0.0;
}

double SparsitySchedule::at(std::int64_t event) const {
  for (const auto& [e, s] : points)
    if (event <= e) return s;
  return target();
}

void SparsitySchedule::validate() const {
  if (points.empty()) throw ConfigError("empty sparsity schedule");
  for (std::size_t i = 0; i < points.size(); ++i) {
    check_sparsity(points[i].second);
    if (i > 0 && (points[i].second < points[i - 1].second || points[i].first <= points[i - 1].first))
      throw ConfigError("sparsity schedule must be increasing in event and non-decreasing in sparsity");
  }
}

SparsitySchedule progressive_schedule(double start, double target, std::int64_t events,
                                      ScheduleShape shape) {
  check_sparsity(start);
  check_sparsity(target);
  if (events < 1) throw ConfigError("progressive schedule needs at least one event");
  SparsitySchedule out;
  for (std::int64_t k = 1; k <= events; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(events);
    double s = 0.0;
    if (k == events) {
      s = target;
    } else if (shape == ScheduleShape::linear) {
      s = start + (target - start) * frac;
    } else {
      const double keep0 = 1.0 - start, keep1 = 1.0 - target;
      s = keep1 > 0.0 ? 1.0 - keep0 * std::pow(keep1 / keep0, frac) : start + (target - start) * frac;
    }
    out.points.emplace_back(k, s);
  }
  out.validate();
  return out;
}

}  // namespace parp::pruning
