#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "parp/autonet/tape.hpp"

namespace parp::autonet {

enum class Nonlinearity { gelu, relu, tanh, identity };

/// x[T x I] * w[I x O] + b[O]
Var affine(Tape& tape, Var x, Var w, Var b);
Var activate(Tape& tape, Var x, Nonlinearity kind);
/// Per-row normalization with elementwise gain and bias.
Var layer_norm(Tape& tape, Var x, Var gain, Var bias, double eps = 1e-5);
Var log_softmax(Tape& tape, Var logits);
/// Rows of x selected by index (repeats allowed).
Var gather_rows(Tape& tape, Var x, std::span<const std::size_t> rows);

/// Scalar: mean cross-entropy over all rows.
Var cross_entropy(Tape& tape, Var logits, std::span<const int> labels);

struct CtcSegment {
  std::size_t offset = 0;  // first row in the stacked log-prob matrix
  std::size_t frames = 0;
  std::vector<int> target;
};

/// Scalar: mean CTC loss over segments of a stacked [sum T x V] log-prob matrix.
Var ctc(Tape& tape, Var log_probs, std::span<const CtcSegment> segments, int blank_id);

/// Scalar: masked reconstruction loss against a constant target.
Var masked_mse(Tape& tape, Var reconstruction, const Tensor& original,
               std::span<const std::size_t> mask_positions);

/// Scalar: mean contrastive loss; anchors/positives are [A x D], negatives
/// are [A*K x D] with rows a*K..a*K+K-1 belonging to anchor a.
Var info_nce(Tape& tape, Var anchors, Var positives, Var negatives, std::size_t negatives_per_anchor,
             double temperature);

double gelu(double x);
double gelu_grad(double x);

}  // namespace parp::autonet
