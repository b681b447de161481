#pragma once

#include <memory>
#include <string>
#include <vector>

#include "parp/autonet/model.hpp"
#include "parp/autonet/objective.hpp"
#include "parp/tasks/tasks.hpp"

namespace parp::tasks {

/// Downstream finetuning on one task through the encoder and the task's head
/// (head name = task id).
class TaskObjective : public autonet::Objective {
 public:
  TaskObjective(autonet::EncoderConfig config, std::shared_ptr<const Dataset> data);

  double train_loss(autonet::ParamStore& store, std::uint64_t seed, std::int64_t step,
                    std::size_t batch_size) override;
  autonet::EvalResult evaluate(autonet::ParamStore& store, autonet::Split split) override;

  const Dataset& data() const { return *data_; }
  const autonet::EncoderConfig& config() const { return config_; }

  /// Loss (with gradients) on an explicit list of sequences.
  double batch_loss(autonet::ParamStore& store, const std::vector<const Sequence*>& batch,
                    bool backward);

 private:
  autonet::EncoderConfig config_;
  std::shared_ptr<const Dataset> data_;
};

/// Round-robin over tasks sharing one encoder, each with its own head: update
/// t draws its batch from task (t-1) mod K using that task's own batch stream.
class JointObjective : public autonet::Objective {
 public:
  explicit JointObjective(std::vector<std::shared_ptr<TaskObjective>> tasks);

  double train_loss(autonet::ParamStore& store, std::uint64_t seed, std::int64_t step,
                    std::size_t batch_size) override;
  /// Mean over tasks.
  autonet::EvalResult evaluate(autonet::ParamStore& store, autonet::Split split) override;
  std::vector<autonet::EvalResult> evaluate_each(autonet::ParamStore& store, autonet::Split split);

  const std::vector<std::shared_ptr<TaskObjective>>& tasks() const { return tasks_; }

 private:
  std::vector<std::shared_ptr<TaskObjective>> tasks_;
};

/// Initialized encoder store with a fresh head for every given task.
void attach_task_heads(autonet::EncoderModel& model, const std::vector<TaskSpec>& specs,
                       std::uint64_t seed);

}  // namespace parp::tasks
