#include "parp/tasks/pretrain.hpp"

#include <algorithm>
#include <cmath>

#include "parp/autonet/ops.hpp"
#include "parp/autonet/optim.hpp"
#include "parp/autonet/schedule.hpp"
#include "parp/error.hpp"

namespace parp::tasks {

using namespace autonet;

namespace {

constexpr std::size_t kEvalSlice = 64;
constexpr std::size_t kMaxAnchors = 64;

}  // namespace

std::string ssl_name(SslObjective o) {
  return o == SslObjective::contrastive ? "contrastive" : "masked-recon";
}

SslObjective parse_ssl(const std::string& name) {
  if (name == "masked-recon" || name == "masked_recon") return SslObjective::masked_recon;
  if (name == "contrastive") return SslObjective::contrastive;
  throw ConfigError("unknown pretraining objective: " + name);
}

SslTrainingObjective::SslTrainingObjective(EncoderConfig config, std::shared_ptr<const Corpus> corpus,
                                           PretrainConfig pcfg)
    : config_(config), corpus_(std::move(corpus)), pcfg_(pcfg) {
  if (!corpus_ || corpus_->sequences.empty()) throw ConfigError("pretraining corpus is empty");
  if (!(pcfg_.mask_prob > 0.0 && pcfg_.mask_prob <= 1.0)) throw ConfigError("mask_prob must be in (0,1]");
  if (pcfg_.objective == SslObjective::contrastive && pcfg_.negatives == 0)
    throw ConfigError("contrastive pretraining needs negatives");
}

std::string SslTrainingObjective::head() const {
  return pcfg_.objective == SslObjective::contrastive ? "proj" : "recon";
}

double SslTrainingObjective::loss_on(ParamStore& store, const std::vector<std::size_t>& seqs,
                                     std::uint64_t seed, std::int64_t step, bool backward) {
  const std::size_t width = config_.input_dim;
  std::size_t rows = 0;
  for (auto i : seqs) rows += corpus_->sequences[i].rows();
  const Rng site = Rng(seed, "ssl").split(static_cast<std::uint64_t>(step));
  Tape tape;
  Var loss;

  if (pcfg_.objective == SslObjective::masked_recon) {
    Tensor input({rows, config_.stacked_dim()});
    Tensor original({rows, width});
    std::vector<std::size_t> masked;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < seqs.size(); ++k) {
      const Tensor& frames = corpus_->sequences[seqs[k]];
      Rng rng = site.split(k);
      Tensor corrupted = frames;
      std::vector<std::size_t> local;
      for (std::size_t t = 0; t < frames.rows(); ++t)
        if (rng.uniform() < pcfg_.mask_prob) local.push_back(t);
      if (local.empty()) local.push_back(rng.below(frames.rows()));
      for (auto t : local) {
        // 80% zeroed, 10% another frame of the sequence, 10% left intact.
        const double u = rng.uniform();
        auto row = corrupted.row(t);
        if (u < 0.8) {
          std::fill(row.begin(), row.end(), 0.0);
        } else if (u < 0.9) {
          const auto src = frames.row(rng.below(frames.rows()));
          std::copy(src.begin(), src.end(), row.begin());
        }
        masked.push_back(offset + t);
      }
      const Tensor st = stack_context(corrupted, config_.context);
      std::copy(st.data().begin(), st.data().end(), input.data().begin() + offset * st.cols());
      std::copy(frames.data().begin(), frames.data().end(), original.data().begin() + offset * width);
      offset += frames.rows();
    }
    Var recon = apply_head(tape, store, "recon", encode(tape, config_, store, input));
    loss = masked_mse(tape, recon, original, masked);
  } else {
    Tensor view_a({rows, config_.stacked_dim()});
    Tensor view_b({rows, config_.stacked_dim()});
    std::size_t offset = 0;
    for (std::size_t k = 0; k < seqs.size(); ++k) {
      const Tensor& frames = corpus_->sequences[seqs[k]];
      Rng rng = site.split(k);
      for (Tensor* view : {&view_a, &view_b}) {
        Tensor noisy = frames;
        for (auto& v : noisy.data()) v += pcfg_.view_noise * rng.normal();
        const Tensor st = stack_context(noisy, config_.context);
        std::copy(st.data().begin(), st.data().end(), view->data().begin() + offset * st.cols());
      }
      offset += frames.rows();
    }
    Var za = apply_head(tape, store, "proj", encode(tape, config_, store, view_a));
    Var zb = apply_head(tape, store, "proj", encode(tape, config_, store, view_b));
    Rng pick = site.split("anchors");
    const std::size_t count = std::min(kMaxAnchors, rows);
    std::vector<std::size_t> anchors(count), negatives;
    for (auto& a : anchors) a = pick.below(rows);
    const std::size_t kneg = std::min(pcfg_.negatives, rows - 1);
    if (kneg == 0) throw InputError("contrastive batch needs at least two frames");
    for (auto a : anchors)
      for (std::size_t j = 0; j < kneg; ++j) {
        std::size_t n = pick.below(rows - 1);
        if (n >= a) ++n;
        negatives.push_back(n);
      }
    loss = info_nce(tape, gather_rows(tape, za, anchors), gather_rows(tape, zb, anchors),
                    gather_rows(tape, zb, negatives), kneg, pcfg_.temperature);
  }
  if (backward) tape.backward(loss);
  return tape.value(loss)[0];
}

double SslTrainingObjective::train_loss(ParamStore& store, std::uint64_t seed, std::int64_t step,
                                        std::size_t batch_size) {
  Rng rng = Rng(seed, "ssl-batch").split(static_cast<std::uint64_t>(step));
  std::vector<std::size_t> seqs(batch_size);
  for (auto& s : seqs) s = rng.below(corpus_->sequences.size());
  return loss_on(store, seqs, seed, step, true);
}

EvalResult SslTrainingObjective::evaluate(ParamStore& store, Split) {
  std::vector<std::size_t> seqs(std::min(kEvalSlice, corpus_->sequences.size()));
  for (std::size_t i = 0; i < seqs.size(); ++i) seqs[i] = i;
  return {loss_on(store, seqs, 0, 0, false), 0.0};
}

PretrainResult pretrain(const EncoderConfig& config, std::shared_ptr<const Corpus> corpus,
                        const PretrainConfig& pcfg) {
  if (pcfg.steps < 0) throw ConfigError("pretraining steps must be >= 0");
  if (pcfg.batch_size == 0) throw ConfigError("pretraining batch_size must be positive");
  EncoderModel model = make_encoder(config, Rng(pcfg.seed, "encoder-init"));
  PretrainResult result;
  if (pcfg.steps == 0) {
    result.encoder = std::move(model.store);
    return result;
  }
  SslTrainingObjective objective(config, std::move(corpus), pcfg);
  const std::size_t out = pcfg.objective == SslObjective::contrastive ? pcfg.projection_dim
                                                                      : config.input_dim;
  attach_head(model, objective.head(), out, Rng(pcfg.seed, "ssl-head"));
  LRSchedule schedule{pcfg.peak_lr, pcfg.steps};
  schedule.validate();
  Optimizer opt(OptimizerKind::adam, model.store);
  for (std::int64_t t = 1; t <= pcfg.steps; ++t) {
    model.store.zero_grad();
    const double loss = objective.train_loss(model.store, pcfg.seed, t, pcfg.batch_size);
    if (!std::isfinite(loss)) throw RunError("pretraining loss is not finite", t);
    opt.step(model.store, lr_at(schedule, t));
    result.loss_trace.push_back(loss);
  }
  detach_head(model, objective.head());
  result.encoder = std::move(model.store);
  return result;
}

}  // namespace parp::tasks
