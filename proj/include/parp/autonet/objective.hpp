#pragma once

#include <cstddef>
#include <cstdint>

#include "parp/autonet/param_store.hpp"

namespace parp::autonet {

enum class Split { train, dev, test };

struct EvalResult {
  double loss = 0.0;
  /// Frame error rate or label error rate, depending on the task.
  double error_rate = 0.0;
};

/// What a training loop needs from a task: a minibatch loss with gradients
/// for a given update index, and held-out evaluation. Batches are a pure
/// function of (seed, step), so two loops with the same seed see the same data.
class Objective {
 public:
  virtual ~Objective() = default;

  /// Loss on the minibatch for update `step` (1-based); gradients are added into `store`.
  virtual double train_loss(ParamStore& store, std::uint64_t seed, std::int64_t step,
                            std::size_t batch_size) = 0;
  virtual EvalResult evaluate(ParamStore& store, Split split) = 0;
};

}  // namespace parp::autonet
