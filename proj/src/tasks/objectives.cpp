#include "parp/tasks/objectives.hpp"

#include <algorithm>

#include "parp/autonet/losses.hpp"
#include "parp/autonet/ops.hpp"
#include "parp/error.hpp"

namespace parp::tasks {

using namespace autonet;

namespace {

constexpr std::size_t kEvalChunk = 64;

struct Stacked {
  Tensor input;
  std::vector<int> labels;
  std::vector<CtcSegment> segments;
};

Stacked stack_batch(const EncoderConfig& config, const std::vector<const Sequence*>& batch) {
  std::size_t rows = 0;
  for (const auto* s : batch) rows += s->frames.rows();
  Stacked out{Tensor({rows, config.stacked_dim()}), {}, {}};
  out.labels.reserve(rows);
  std::size_t offset = 0;
  for (const auto* s : batch) {
    if (s->frames.cols() != config.input_dim)
      throw ConfigError("sequence feature width does not match the encoder input");
    const Tensor st = stack_context(s->frames, config.context);
    std::copy(st.data().begin(), st.data().end(), out.input.data().begin() + offset * st.cols());
    out.labels.insert(out.labels.end(), s->frame_labels.begin(), s->frame_labels.end());
    out.segments.push_back({offset, s->frames.rows(), s->target});
    offset += s->frames.rows();
  }
  return out;
}

}  // namespace

TaskObjective::TaskObjective(EncoderConfig config, std::shared_ptr<const Dataset> data)
    : config_(config), data_(std::move(data)) {
  if (!data_) throw ConfigError("task objective needs a dataset");
  data_->spec.validate();
  if (data_->spec.universe.feature_dim != config_.input_dim)
    throw ConfigError("task feature_dim does not match the encoder input_dim");
}

double TaskObjective::batch_loss(ParamStore& store, const std::vector<const Sequence*>& batch,
                                 bool backward) {
  if (batch.empty()) throw InputError("empty batch");
  const Stacked st = stack_batch(config_, batch);
  Tape tape;
  Var hidden = encode(tape, config_, store, st.input);
  Var logits = apply_head(tape, store, data_->spec.id, hidden);
  Var loss;
  if (data_->spec.flavor == Flavor::ctc_sequence) {
    Var lp = autonet::log_softmax(tape, logits);
    loss = ctc(tape, lp, st.segments, data_->spec.blank_id());
  } else {
    loss = cross_entropy(tape, logits, st.labels);
  }
  if (backward) tape.backward(loss);
  return tape.value(loss)[0];
}

double TaskObjective::train_loss(ParamStore& store, std::uint64_t seed, std::int64_t step,
                                 std::size_t batch_size) {
  const auto& train = data_->train;
  Rng rng = Rng(seed, "batch").split(data_->spec.id).split(static_cast<std::uint64_t>(step));
  std::vector<const Sequence*> batch(batch_size);
  for (auto& b : batch) b = &train[rng.below(train.size())];
  return batch_loss(store, batch, true);
}

EvalResult TaskObjective::evaluate(ParamStore& store, Split split) {
  const auto& seqs = data_->split(split);
  if (seqs.empty()) throw InputError("evaluation split is empty");
  const bool is_ctc = data_->spec.flavor == Flavor::ctc_sequence;
  double loss_sum = 0.0;
  double errors = 0.0;
  double units = 0.0;
  std::size_t frames_total = 0;
  for (std::size_t start = 0; start < seqs.size(); start += kEvalChunk) {
    const std::size_t end = std::min(seqs.size(), start + kEvalChunk);
    std::vector<const Sequence*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&seqs[i]);
    const Stacked st = stack_batch(config_, batch);
    Tape tape;
    Var logits = apply_head(tape, store, data_->spec.id, encode(tape, config_, store, st.input));
    if (is_ctc) {
      const Tensor lp = autonet::log_softmax(tape.value(logits));
      const std::size_t width = lp.cols();
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto& seg = st.segments[k];
        Tensor part({seg.frames, width},
                    std::vector<double>(lp.data().begin() + seg.offset * width,
                                        lp.data().begin() + (seg.offset + seg.frames) * width));
        loss_sum += ctc_loss(part, seg.target, data_->spec.blank_id()).loss;
        const auto hyp = ctc_greedy_decode(part, data_->spec.blank_id());
        errors += static_cast<double>(edit_distance(hyp, seg.target));
        units += static_cast<double>(seg.target.size());
      }
    } else {
      const Tensor& z = tape.value(logits);
      loss_sum += ce_loss(z, st.labels).loss * static_cast<double>(z.rows());
      for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        if (best != st.labels[r]) errors += 1.0;
      }
      units += static_cast<double>(z.rows());
    }
    frames_total += st.input.rows();
  }
  EvalResult out;
  out.loss = loss_sum / (is_ctc ? static_cast<double>(seqs.size()) : static_cast<double>(frames_total));
  out.error_rate = units > 0.0 ? errors / units : 0.0;
  return out;
}

JointObjective::JointObjective(std::vector<std::shared_ptr<TaskObjective>> tasks)
    : tasks_(std::move(tasks)) {
  if (tasks_.empty()) throw ConfigError("joint objective needs at least one task");
}

double JointObjective::train_loss(ParamStore& store, std::uint64_t seed, std::int64_t step,
                                  std::size_t batch_size) {
  const auto k = static_cast<std::int64_t>(tasks_.size());
  return tasks_[static_cast<std::size_t>((step - 1) % k)]->train_loss(store, seed, step, batch_size);
}

std::vector<EvalResult> JointObjective::evaluate_each(ParamStore& store, Split split) {
  std::vector<EvalResult> out;
  for (auto& t : tasks_) out.push_back(t->evaluate(store, split));
  return out;
}

EvalResult JointObjective::evaluate(ParamStore& store, Split split) {
  EvalResult mean;
  const auto each = evaluate_each(store, split);
  for (const auto& r : each) {
    mean.loss += r.loss;
    mean.error_rate += r.error_rate;
  }
  mean.loss /= static_cast<double>(each.size());
  mean.error_rate /= static_cast<double>(each.size());
  return mean;
}

void attach_task_heads(EncoderModel& model, const std::vector<TaskSpec>& specs, std::uint64_t seed) {
  const Rng base(seed, "task-head");
  for (const auto& spec : specs) attach_head(model, spec.id, spec.head_width(), base.split(spec.id));
}

}  // namespace parp::tasks
