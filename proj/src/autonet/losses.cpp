#include "parp/autonet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parp/error.hpp"

namespace parp::autonet {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

Tensor log_softmax(const Tensor& logits) {
  Tensor out(logits.shape());
  const std::size_t cols = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double hi = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(in[c] - hi);
    const double lse = hi + std::log(sum);
    for (std::size_t c = 0; c < cols; ++c) o[c] = in[c] - lse;
  }
  return out;
}

LossGrad ce_loss(const Tensor& logits, std::span<const int> labels) {
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  if (labels.size() != rows) throw InputError("ce_loss: one label per frame required");
  LossGrad out{0.0, log_softmax(logits)};
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= cols)
      throw InputError("ce_loss: label " + std::to_string(y) + " outside [0," +
                       std::to_string(cols) + ")");
    auto g = out.grad.row(r);
    out.loss -= g[static_cast<std::size_t>(y)];
    for (auto& v : g) v = std::exp(v) * inv;
    g[static_cast<std::size_t>(y)] -= inv;
  }
  out.loss *= inv;
  return out;
}

std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t need = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++need;
  return need;
}

LossGrad ctc_loss(const Tensor& log_probs, std::span<const int> target, int blank_id) {
  const std::size_t frames = log_probs.rows();
  const std::size_t vocab = log_probs.cols();
  if (blank_id < 0 || static_cast<std::size_t>(blank_id) >= vocab)
    throw InputError("ctc_loss: blank id outside vocabulary");
  for (int label : target)
    if (label < 0 || static_cast<std::size_t>(label) >= vocab || label == blank_id)
      throw InputError("ctc_loss: target label " + std::to_string(label) + " invalid");
  const std::size_t need = ctc_min_frames(target);
  if (frames < need) throw InfeasibleTargetError(frames, need);

  // Blank-augmented lattice: blank, l1, blank, l2, ..., blank.
  const std::size_t states = 2 * target.size() + 1;
  std::vector<int> ext(states, blank_id);
  for (std::size_t u = 0; u < target.size(); ++u) ext[2 * u + 1] = target[u];
  auto skip_allowed = [&](std::size_t s) {
    return s >= 2 && ext[s] != blank_id && ext[s] != ext[s - 2];
  };
  auto lp = [&](std::size_t t, std::size_t s) {
    return log_probs.at(t, static_cast<std::size_t>(ext[s]));
  };

  std::vector<double> alpha(frames * states, kNegInf);
  std::vector<double> beta(frames * states, kNegInf);
  auto A = [&](std::size_t t, std::size_t s) -> double& { return alpha[t * states + s]; };
  auto B = [&](std::size_t t, std::size_t s) -> double& { return beta[t * states + s]; };

  A(0, 0) = lp(0, 0);
  if (states > 1) A(0, 1) = lp(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = A(t - 1, s);
      if (s >= 1) acc = log_add(acc, A(t - 1, s - 1));
      if (skip_allowed(s)) acc = log_add(acc, A(t - 1, s - 2));
      if (acc != kNegInf) A(t, s) = acc + lp(t, s);
    }
  }

  const std::size_t last = frames - 1;
  B(last, states - 1) = 0.0;
  if (states > 1) B(last, states - 2) = 0.0;
  for (std::size_t t = last; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = B(t + 1, s) + lp(t + 1, s);
      if (s + 1 < states) acc = log_add(acc, B(t + 1, s + 1) + lp(t + 1, s + 1));
      if (s + 2 < states && skip_allowed(s + 2))
        acc = log_add(acc, B(t + 1, s + 2) + lp(t + 1, s + 2));
      B(t, s) = acc;
    }
  }

  double log_p = A(last, states - 1);
  if (states > 1) log_p = log_add(log_p, A(last, states - 2));
  if (!std::isfinite(log_p)) throw NumericalError("ctc_loss: target has zero probability");

  LossGrad out{-log_p, Tensor(log_probs.shape())};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      const double occ = A(t, s) + B(t, s);
      if (occ == kNegInf) continue;
      out.grad.at(t, static_cast<std::size_t>(ext[s])) -= std::exp(occ - log_p);
    }
  }
  return out;
}

LossGrad masked_recon_loss(const Tensor& reconstruction, const Tensor& original,
                           std::span<const std::size_t> mask_positions) {
  if (!reconstruction.same_shape(original))
    throw InputError("masked_recon_loss: reconstruction and original differ in shape");
  if (mask_positions.empty()) throw InputError("masked_recon_loss: no masked frames");
  const double inv = 1.0 / static_cast<double>(mask_positions.size());
  LossGrad out{0.0, Tensor(reconstruction.shape())};
  for (auto t : mask_positions) {
    if (t >= reconstruction.rows()) throw InputError("masked_recon_loss: frame index out of range");
    auto r = reconstruction.row(t);
    auto x = original.row(t);
    auto g = out.grad.row(t);
    for (std::size_t c = 0; c < r.size(); ++c) {
      const double diff = r[c] - x[c];
      out.loss += diff * diff;
      g[c] += 2.0 * diff * inv;
    }
  }
  out.loss *= inv;
  return out;
}

ContrastiveGrad contrastive_loss(std::span<const double> anchor, std::span<const double> positive,
                                 const Tensor& negatives, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("contrastive_loss: temperature must be positive");
  const std::size_t dim = anchor.size();
  if (negatives.empty()) throw InputError("contrastive_loss: need at least one negative");
  if (positive.size() != dim || negatives.cols() != dim)
    throw InputError("contrastive_loss: embedding dims differ");
  const std::size_t k = negatives.rows();

  auto dot = [dim](std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) acc += x[i] * y[i];
    return acc;
  };
  std::vector<double> z(k + 1);
  z[0] = dot(anchor, positive) / temperature;
  for (std::size_t j = 0; j < k; ++j) z[j + 1] = dot(anchor, negatives.row(j)) / temperature;
  const double hi = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - hi);
  const double lse = hi + std::log(sum);

  ContrastiveGrad out;
  out.loss = lse - z[0];
  out.anchor = Tensor({dim});
  out.positive = Tensor({dim});
  out.negatives = Tensor(negatives.shape());
  const double q0 = std::exp(z[0] - lse);
  for (std::size_t i = 0; i < dim; ++i) {
    out.anchor[i] = (q0 - 1.0) * positive[i] / temperature;
    out.positive[i] = (q0 - 1.0) * anchor[i] / temperature;
  }
  for (std::size_t j = 0; j < k; ++j) {
    const double q = std::exp(z[j + 1] - lse);
    auto n = negatives.row(j);
    auto gn = out.negatives.row(j);
    for (std::size_t i = 0; i < dim; ++i) {
      out.anchor[i] += q * n[i] / temperature;
      gn[i] = q * anchor[i] / temperature;
    }
  }
  return out;
}

std::vector<int> ctc_greedy_decode(const Tensor& log_probs, int blank_id) {
  std::vector<int> out;
  int prev = -1;
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    auto row = log_probs.row(t);
    const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != prev && best != blank_id) out.push_back(best);
    prev = best;
  }
  return out;
}

std::size_t edit_distance(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace parp::autonet
