#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "parp/pruning/mask.hpp"

namespace parp::analytics {

using pruning::Mask;

/// |kept(a) & kept(b)| / |kept(a) | kept(b)|; 1.0 when both keep nothing.
double iou(const Mask& a, const Mask& b);
/// |kept(a) & kept(b)| / d_prunable
double overlap_pct(const Mask& a, const Mask& b);
/// Expected IOU of two independent uniform masks at sparsity s: k/(2-k), k = 1-s.
double random_iou_baseline(double s);

/// Labeled rows x columns of doubles. Square for pairwise matrices; reports
/// may append extra reference rows.
struct LabeledMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<double>> values;

  /// First line: "label,<col labels...>"; then one line per row.
  std::string to_csv() const;
};

struct IouMatrix {
  LabeledMatrix iou;
  LabeledMatrix overlap;
  double sparsity = 0.0;
};

struct LabeledMask {
  std::string label;
  const Mask* mask;
};

IouMatrix iou_matrix(const std::vector<LabeledMask>& masks);
/// Adds one row per reference mask, compared against every column mask.
void append_reference_row(IouMatrix& m, const LabeledMask& reference,
                          const std::vector<LabeledMask>& columns);

struct LayerSparsity {
  std::string label;
  double sparsity = 0.0;
  std::size_t elements = 0;
};

struct LayerSparsityProfile {
  std::vector<LayerSparsity> layers;
  double global = 0.0;

  /// Header "layer,sparsity,elements"; the global row is labeled "global".
  std::string to_csv() const;
};

/// Group label for a param name: its name without the last dotted component,
/// so a block's weight and bias aggregate together.
std::string layer_group(const std::string& param_name);
LayerSparsityProfile layerwise_sparsity(const Mask& mask);

/// iou(snapshot_k, reference) for each snapshot in order.
std::vector<double> mask_trajectory(const std::vector<Mask>& snapshots, const Mask& reference);

/// Shortest round-trip decimal for a double, for CSV output.
std::string format_double(double v);

}  // namespace parp::analytics
