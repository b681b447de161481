#include "parp/autonet/ops.hpp"

#include <cmath>
#include <numbers>

#include "parp/autonet/losses.hpp"
#include "parp/error.hpp"
#include "parp/kernels.hpp"

namespace parp::autonet {
namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

Var affine(Tape& tape, Var x, Var w, Var b) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  const Tensor& bv = tape.value(b);
  const std::size_t rows = xv.rows(), in = xv.cols(), out = wv.cols();
  if (wv.rows() != in || bv.size() != out)
    throw ConfigError("affine: input width " + std::to_string(in) + " does not match weight " +
                      std::to_string(wv.rows()) + "x" + std::to_string(out));
  Tensor y({rows, out});
  kernels::matmul(xv.data(), wv.data(), y.data(), rows, in, out);
  for (std::size_t r = 0; r < rows; ++r) {
    auto yr = y.row(r);
    for (std::size_t c = 0; c < out; ++c) yr[c] += bv[c];
  }
  return tape.push(std::move(y), [x, w, b, rows, in, out](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    if (t.needs_grad(w)) {
      Tensor gw({in, out});
      kernels::matmul_at_b(t.value(x).data(), gy.data(), gw.data(), rows, in, out);
      add_into(t.grad(w), gw);
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad(b);
      for (std::size_t r = 0; r < rows; ++r) {
        auto g = gy.row(r);
        for (std::size_t c = 0; c < out; ++c) gb[c] += g[c];
      }
    }
    if (t.needs_grad(x)) {
      Tensor gx({rows, in});
      kernels::matmul_a_bt(gy.data(), t.value(w).data(), gx.data(), rows, in, out);
      add_into(t.grad(x), gx);
    }
  });
}

Var activate(Tape& tape, Var x, Nonlinearity kind) {
  const Tensor& xv = tape.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    switch (kind) {
      case Nonlinearity::gelu: y[i] = gelu(v); break;
      case Nonlinearity::relu: y[i] = v > 0.0 ? v : 0.0; break;
      case Nonlinearity::tanh: y[i] = std::tanh(v); break;
      case Nonlinearity::identity: y[i] = v; break;
    }
  }
  return tape.push(std::move(y), [x, kind](Tape& t, std::size_t self) {
    if (!t.needs_grad(x)) return;
    const Tensor& gy = t.grad(self);
    const Tensor& xv = t.value(x);
    const Tensor& yv = t.value(Var{self});
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      double d = 1.0;
      switch (kind) {
        case Nonlinearity::gelu: d = gelu_grad(xv[i]); break;
        case Nonlinearity::relu: d = xv[i] > 0.0 ? 1.0 : 0.0; break;
        case Nonlinearity::tanh: d = 1.0 - yv[i] * yv[i]; break;
        case Nonlinearity::identity: break;
      }
      gx[i] += gy[i] * d;
    }
  });
}

Var layer_norm(Tape& tape, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = tape.value(x);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (tape.value(gain).size() != cols || tape.value(bias).size() != cols)
    throw ConfigError("layer_norm: gain/bias width mismatch");
  Tensor normed(xv.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto o = normed.row(r);
    for (std::size_t c = 0; c < cols; ++c) o[c] = (in[c] - mean) * inv_std[r];
  }
  Tensor y(xv.shape());
  const Tensor& g = tape.value(gain);
  const Tensor& b = tape.value(bias);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.at(r, c) = g[c] * normed.at(r, c) + b[c];

  return tape.push(std::move(y), [x, gain, bias, rows, cols, normed = std::move(normed),
                                  inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    const Tensor& gv = t.value(gain);
    if (t.needs_grad(gain) || t.needs_grad(bias)) {
      Tensor& gg = t.grad(gain);
      Tensor& gb = t.grad(bias);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          gg[c] += gy.at(r, c) * normed.at(r, c);
          gb[c] += gy.at(r, c);
        }
    }
    if (!t.needs_grad(x)) return;
    Tensor& gx = t.grad(x);
    const double n = static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double mean_d = 0.0, mean_dn = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = gy.at(r, c) * gv[c];
        mean_d += d;
        mean_dn += d * normed.at(r, c);
      }
      mean_d /= n;
      mean_dn /= n;
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = gy.at(r, c) * gv[c];
        gx.at(r, c) += inv_std[r] * (d - mean_d - normed.at(r, c) * mean_dn);
      }
    }
  });
}

Var log_softmax(Tape& tape, Var logits) {
  Tensor y = log_softmax(tape.value(logits));
  return tape.push(std::move(y), [logits](Tape& t, std::size_t self) {
    if (!t.needs_grad(logits)) return;
    const Tensor& gy = t.grad(self);
    const Tensor& yv = t.value(Var{self});
    Tensor& gx = t.grad(logits);
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      auto g = gy.row(r);
      double total = 0.0;
      for (double v : g) total += v;
      auto y = yv.row(r);
      auto o = gx.row(r);
      for (std::size_t c = 0; c < y.size(); ++c) o[c] += g[c] - std::exp(y[c]) * total;
    }
  });
}

Var gather_rows(Tape& tape, Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = tape.value(x);
  const std::size_t cols = xv.cols();
  Tensor y({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) throw InputError("gather_rows: row index out of range");
    auto src = xv.row(rows[i]);
    std::copy(src.begin(), src.end(), y.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.push(std::move(y), [x, idx = std::move(idx)](Tape& t, std::size_t self) {
    if (!t.needs_grad(x)) return;
    const Tensor& gy = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto g = gy.row(i);
      auto o = gx.row(idx[i]);
      for (std::size_t c = 0; c < g.size(); ++c) o[c] += g[c];
    }
  });
}

Var cross_entropy(Tape& tape, Var logits, std::span<const int> labels) {
  LossGrad lg = ce_loss(tape.value(logits), labels);
  return tape.push(scalar(lg.loss), [logits, grad = std::move(lg.grad)](Tape& t, std::size_t self) {
    if (!t.needs_grad(logits)) return;
    const double s = t.grad(self)[0];
    Tensor& g = t.grad(logits);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * grad[i];
  });
}

Var ctc(Tape& tape, Var log_probs, std::span<const CtcSegment> segments, int blank_id) {
  if (segments.empty()) throw InputError("ctc: no segments");
  const Tensor& lp = tape.value(log_probs);
  const std::size_t vocab = lp.cols();
  Tensor grad(lp.shape());
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(segments.size());
  for (const auto& seg : segments) {
    if (seg.offset + seg.frames > lp.rows()) throw InputError("ctc: segment out of range");
    Tensor slice({seg.frames, vocab});
    for (std::size_t t = 0; t < seg.frames; ++t) {
      auto src = lp.row(seg.offset + t);
      std::copy(src.begin(), src.end(), slice.row(t).begin());
    }
    LossGrad lg = ctc_loss(slice, seg.target, blank_id);
    total += lg.loss;
    for (std::size_t t = 0; t < seg.frames; ++t) {
      auto g = lg.grad.row(t);
      auto o = grad.row(seg.offset + t);
      for (std::size_t c = 0; c < vocab; ++c) o[c] += g[c] * inv;
    }
  }
  return tape.push(scalar(total * inv),
                   [log_probs, grad = std::move(grad)](Tape& t, std::size_t self) {
                     if (!t.needs_grad(log_probs)) return;
                     const double s = t.grad(self)[0];
                     Tensor& g = t.grad(log_probs);
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * grad[i];
                   });
}

Var masked_mse(Tape& tape, Var reconstruction, const Tensor& original,
               std::span<const std::size_t> mask_positions) {
  LossGrad lg = masked_recon_loss(tape.value(reconstruction), original, mask_positions);
  return tape.push(scalar(lg.loss),
                   [reconstruction, grad = std::move(lg.grad)](Tape& t, std::size_t self) {
                     if (!t.needs_grad(reconstruction)) return;
                     const double s = t.grad(self)[0];
                     Tensor& g = t.grad(reconstruction);
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * grad[i];
                   });
}

Var info_nce(Tape& tape, Var anchors, Var positives, Var negatives, std::size_t negatives_per_anchor,
             double temperature) {
  const Tensor& av = tape.value(anchors);
  const Tensor& pv = tape.value(positives);
  const Tensor& nv = tape.value(negatives);
  const std::size_t count = av.rows(), dim = av.cols(), k = negatives_per_anchor;
  if (k == 0) throw InputError("info_nce: need at least one negative per anchor");
  if (!pv.same_shape(av) || nv.rows() != count * k || nv.cols() != dim)
    throw InputError("info_nce: shape mismatch");
  Tensor ga(av.shape()), gp(pv.shape()), gn(nv.shape());
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t a = 0; a < count; ++a) {
    Tensor negs({k, dim});
    for (std::size_t j = 0; j < k; ++j) {
      auto src = nv.row(a * k + j);
      std::copy(src.begin(), src.end(), negs.row(j).begin());
    }
    ContrastiveGrad cg = contrastive_loss(av.row(a), pv.row(a), negs, temperature);
    total += cg.loss;
    for (std::size_t i = 0; i < dim; ++i) {
      ga.at(a, i) = cg.anchor[i] * inv;
      gp.at(a, i) = cg.positive[i] * inv;
    }
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < dim; ++i) gn.at(a * k + j, i) = cg.negatives.at(j, i) * inv;
  }
  return tape.push(scalar(total * inv), [anchors, positives, negatives, ga = std::move(ga),
                                         gp = std::move(gp),
                                         gn = std::move(gn)](Tape& t, std::size_t self) {
    const double s = t.grad(self)[0];
    auto acc = [&](Var v, const Tensor& src) {
      if (!t.needs_grad(v)) return;
      Tensor& g = t.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * src[i];
    };
    acc(anchors, ga);
    acc(positives, gp);
    acc(negatives, gn);
  });
}

}  // namespace parp::autonet
