#include "parp/analytics/analytics.hpp"

#include <charconv>

#include "parp/error.hpp"
#include "parp/kernels.hpp"

namespace parp::analytics {

namespace {

struct Counts {
  std::uint64_t both = 0;
  std::uint64_t either = 0;
  std::uint64_t total = 0;
};

Counts count(const Mask& a, const Mask& b) {
  pruning::check_same_layout(a, b);
  Counts c;
  const auto ea = a.entries();
  const auto eb = b.entries();
  for (std::size_t i = 0; i < ea.size(); ++i) {
    c.both += kernels::popcount_and(ea[i].bits.words(), eb[i].bits.words());
    c.either += kernels::popcount_or(ea[i].bits.words(), eb[i].bits.words());
    c.total += ea[i].bits.size();
  }
  return c;
}

}  // namespace

double iou(const Mask& a, const Mask& b) {
  const Counts c = count(a, b);
  if (c.either == 0) return 1.0;
  return static_cast<double>(c.both) / static_cast<double>(c.either);
}

double overlap_pct(const Mask& a, const Mask& b) {
  const Counts c = count(a, b);
  if (c.total == 0) return 0.0;
  return static_cast<double>(c.both) / static_cast<double>(c.total);
}

double random_iou_baseline(double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw InputError("sparsity must be in [0,1]");
  if (s == 1.0) return 1.0;
  const double k = 1.0 - s;
  return k / (2.0 - k);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string LabeledMatrix::to_csv() const {
  std::string out = "label";
  for (const auto& l : col_labels) out += "," + l;
  out += "\n";
  for (std::size_t r = 0; r < values.size(); ++r) {
    out += row_labels[r];
    for (double v : values[r]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

IouMatrix iou_matrix(const std::vector<LabeledMask>& masks) {
  if (masks.empty()) throw InputError("iou matrix needs at least one mask");
  IouMatrix m;
  m.sparsity = pruning::sparsity(*masks.front().mask);
  const std::size_t n = masks.size();
  for (auto* lm : {&m.iou, &m.overlap}) {
    for (const auto& x : masks) {
      lm->row_labels.push_back(x.label);
      lm->col_labels.push_back(x.label);
    }
    lm->values.assign(n, std::vector<double>(n, 0.0));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double u = iou(*masks[i].mask, *masks[j].mask);
      const double o = overlap_pct(*masks[i].mask, *masks[j].mask);
      m.iou.values[i][j] = m.iou.values[j][i] = u;
      m.overlap.values[i][j] = m.overlap.values[j][i] = o;
    }
  return m;
}

void append_reference_row(IouMatrix& m, const LabeledMask& reference,
                          const std::vector<LabeledMask>& columns) {
  if (columns.size() != m.iou.col_labels.size()) throw InputError("reference row width mismatch");
  std::vector<double> u, o;
  for (const auto& c : columns) {
    u.push_back(iou(*reference.mask, *c.mask));
    o.push_back(overlap_pct(*reference.mask, *c.mask));
  }
  m.iou.row_labels.push_back(reference.label);
  m.iou.values.push_back(std::move(u));
  m.overlap.row_labels.push_back(reference.label);
  m.overlap.values.push_back(std::move(o));
}

std::string layer_group(const std::string& param_name) {
  const auto dot = param_name.rfind('.');
  return dot == std::string::npos ? param_name : param_name.substr(0, dot);
}

LayerSparsityProfile layerwise_sparsity(const Mask& mask) {
  LayerSparsityProfile profile;
  std::vector<std::size_t> cleared;
  std::size_t total = 0, total_cleared = 0;
  for (const auto& e : mask.entries()) {
    const std::string group = layer_group(e.name);
    if (profile.layers.empty() || profile.layers.back().label != group) {
      profile.layers.push_back({group, 0.0, 0});
      cleared.push_back(0);
    }
    const std::size_t zeros = e.bits.size() - e.bits.count();
    profile.layers.back().elements += e.bits.size();
    cleared.back() += zeros;
    total += e.bits.size();
    total_cleared += zeros;
  }
  for (std::size_t i = 0; i < profile.layers.size(); ++i)
    if (profile.layers[i].elements > 0)
      profile.layers[i].sparsity =
          static_cast<double>(cleared[i]) / static_cast<double>(profile.layers[i].elements);
  profile.global = total > 0 ? static_cast<double>(total_cleared) / static_cast<double>(total) : 0.0;
  return profile;
}

std::string LayerSparsityProfile::to_csv() const {
  std::string out = "layer,sparsity,elements\n";
  for (const auto& l : layers)
    out += l.label + "," + format_double(l.sparsity) + "," + std::to_string(l.elements) + "\n";
  std::size_t total = 0;
  for (const auto& l : layers) total += l.elements;
  out += "global," + format_double(global) + "," + std::to_string(total) + "\n";
  return out;
}

std::vector<double> mask_trajectory(const std::vector<Mask>& snapshots, const Mask& reference) {
  std::vector<double> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) out.push_back(iou(s, reference));
  return out;
}

}  // namespace parp::analytics
