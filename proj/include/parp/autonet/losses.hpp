#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "parp/tensor.hpp"

namespace parp::autonet {

struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Row-wise log-softmax.
Tensor log_softmax(const Tensor& logits);

/// Mean over frames of -log softmax(logits)[label]; gradient w.r.t. logits.
LossGrad ce_loss(const Tensor& logits, std::span<const int> labels);

/// Frames needed to emit `target`: its length plus one blank per adjacent repeat.
std::size_t ctc_min_frames(std::span<const int> target);

/// -log P(target | log_probs) by the alpha/beta recursion over the
/// blank-augmented label lattice, in log space. The gradient is with respect
/// to the log_probs entries themselves (minus the posterior occupancy).
/// Throws InfeasibleTargetError when T < ctc_min_frames(target).
LossGrad ctc_loss(const Tensor& log_probs, std::span<const int> target, int blank_id);

/// Mean over masked frames of the squared reconstruction error norm.
LossGrad masked_recon_loss(const Tensor& reconstruction, const Tensor& original,
                           std::span<const std::size_t> mask_positions);

struct ContrastiveGrad {
  double loss = 0.0;
  Tensor anchor;     // [D]
  Tensor positive;   // [D]
  Tensor negatives;  // [K x D]
};

/// -log( exp(a.p/tau) / (exp(a.p/tau) + sum_k exp(a.n_k/tau)) )
ContrastiveGrad contrastive_loss(std::span<const double> anchor, std::span<const double> positive,
                                 const Tensor& negatives, double temperature);

/// Best-path decode: argmax per frame, merge repeats, drop blanks.
std::vector<int> ctc_greedy_decode(const Tensor& log_probs, int blank_id);

/// Levenshtein distance between label sequences.
std::size_t edit_distance(std::span<const int> a, std::span<const int> b);

}  // namespace parp::autonet
