#pragma once

#include <vector>

#include "parp/autonet/objective.hpp"
#include "parp/tensor.hpp"

namespace parp::tasks {

/// Full-batch least squares y ~ X w on a prunable vector param "w"; every
/// split evaluates the same data. Used as a closed-form target for the
/// training and pruning machinery.
class LinearRegressionObjective : public autonet::Objective {
 public:
  LinearRegressionObjective(Tensor inputs, std::vector<double> targets);

  double train_loss(autonet::ParamStore& store, std::uint64_t seed, std::int64_t step,
                    std::size_t batch_size) override;
  autonet::EvalResult evaluate(autonet::ParamStore& store, autonet::Split split) override;

  /// mean (x.w - y)^2
  double loss(const std::vector<double>& w) const;
  /// Store holding w (prunable) at the given values.
  static autonet::ParamStore make_store(const std::vector<double>& w);

  const Tensor& inputs() const { return inputs_; }
  const std::vector<double>& targets() const { return targets_; }

 private:
  Tensor inputs_;
  std::vector<double> targets_;
};

}  // namespace parp::tasks
