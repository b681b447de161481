#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "parp/autonet/objective.hpp"
#include "parp/autonet/optim.hpp"
#include "parp/autonet/schedule.hpp"
#include "parp/pruning/mask.hpp"
#include "parp/pruning/prune.hpp"

namespace parp::tasks {
class JointObjective;
}

namespace parp::methods {

using autonet::Objective;
using autonet::ParamStore;
using pruning::Mask;

struct TrainConfig {
  /// N
  std::int64_t total_updates = 600;
  std::size_t batch_size = 16;
  double peak_lr = 1e-3;
  double floor_ratio = 0.01;
  std::uint64_t seed = 1;
  /// Dev evaluation every this many updates (and at the last); 0 disables.
  std::int64_t eval_interval = 0;
  /// PARP re-prune interval n; 0 means N/20 (at least 1).
  std::int64_t prune_interval = 0;
  /// Target sparsity s.
  double sparsity = 0.5;
  /// IMP rewind point as a fraction of the first dense finetuning.
  double rewind_fraction = 0.0;
  /// IMP per-iteration prune fraction rho.
  double prune_fraction = 0.1;
  autonet::OptimizerKind optimizer = autonet::OptimizerKind::adam;
  /// Ablation: zero Adam moments at every PARP re-prune.
  bool reset_moments_on_prune = false;
  pruning::ScheduleShape progressive_shape = pruning::ScheduleShape::linear;

  void validate() const;
  std::int64_t interval() const;
  autonet::LRSchedule lr_schedule() const;
};

struct StepMetric {
  std::int64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
};

struct EvalMetric {
  std::int64_t step = 0;
  double dev_loss = 0.0;
  double dev_error = 0.0;
};

struct Trace {
  std::vector<StepMetric> steps;
  std::vector<EvalMetric> evals;

  void append(const Trace& other);
};

/// One continuous finetuning run: update t draws batch (seed, t) and uses
/// lr_at(t). Hooks run after every optimizer step in registration order.
class Trainer {
 public:
  using UpdateObserver = std::function<void(std::int64_t step, const ParamStore&)>;

  Trainer(ParamStore& store, Objective& objective, const TrainConfig& config);

  /// Performs updates step()+1 .. last.
  void run_until(std::int64_t last);
  void add_step_hook(pruning::StepHook hook) { hooks_.push_back(std::move(hook)); }
  void clear_step_hooks() { hooks_.clear(); }
  void set_observer(UpdateObserver obs) { observer_ = std::move(obs); }

  autonet::Optimizer& optimizer() { return opt_; }
  std::int64_t step() const { return step_; }
  const Trace& trace() const { return trace_; }
  Trace take_trace() { return std::move(trace_); }

 private:
  ParamStore& store_;
  Objective& objective_;
  TrainConfig config_;
  autonet::LRSchedule schedule_;
  autonet::Optimizer opt_;
  std::vector<pruning::StepHook> hooks_;
  UpdateObserver observer_;
  Trace trace_;
  std::int64_t step_ = 0;
  int bad_streak_ = 0;
};

/// Consecutive bad-loss steps (non-finite or above the limit) before a run aborts.
inline constexpr int kDivergencePatience = 10;
inline constexpr double kDivergenceLimit = 1e6;

struct FinetuneResult {
  ParamStore params;
  Trace trace;
};

/// Finetuning runs used to find a mask, and in total once the subnetwork
/// itself is finetuned.
struct RunCount {
  int discovery = 0;
  int total = 0;
};

struct MethodResult {
  std::string method;
  /// Discovery weights: the finetuned dense model for omp/imp, the final
  /// subnetwork for parp.
  ParamStore params;
  Mask mask;
  Trace trace;
  /// Mask after each re-prune event (parp) or each iteration (imp).
  std::vector<Mask> snapshots;
  std::vector<double> snapshot_sparsities;
  RunCount runs;
  std::int64_t update_steps = 0;
};

enum class Method { rp, mpi, omp, imp, parp, parp_p };

std::string method_name(Method m);
/// Throws ConfigError naming the value for an unknown id.
Method parse_method(const std::string& name);

/// Number of IMP iterations to reach s: the least k with 1-(1-rho)^k >= s.
int imp_iterations(double s, double rho);
/// Sparsity targets per IMP iteration, the last clamped to s.
std::vector<double> imp_schedule(double s, double rho);
RunCount run_count(Method m, double s, double rho);

Mask mpi(const ParamStore& pretrained, double s);
Mask rp(const ParamStore& pretrained, double s, std::uint64_t seed);

FinetuneResult finetune_dense(const ParamStore& pretrained, Objective& task, const TrainConfig& config);
MethodResult omp(const ParamStore& pretrained, Objective& task, const TrainConfig& config);
MethodResult imp(const ParamStore& pretrained, Objective& task, const TrainConfig& config);

/// Finetunes m (.) theta_0 with masked weights pinned to zero for the whole run.
FinetuneResult subnetwork_finetune(const ParamStore& pretrained, const Mask& mask, Objective& task,
                                   const TrainConfig& config);

/// Prune-adjust-re-prune from `initial` (sparsity must equal config.sparsity).
MethodResult parp(const ParamStore& pretrained, const Mask& initial, Objective& task,
                  const TrainConfig& config);
/// Progressive variant starting from the magnitude mask at `start_sparsity`.
MethodResult parp_p(const ParamStore& pretrained, Objective& task, const TrainConfig& config,
                    double start_sparsity);

enum class JointMethod { omp, parp };

struct JointResult {
  MethodResult discovery;
  /// Finetuned shared subnetwork (the parp result itself, or omp's mask finetuned at theta_0).
  ParamStore subnetwork;
  /// Per-task dev results of the discovered subnetwork after the joint run.
  std::vector<autonet::EvalResult> per_task;
};

/// One finetuning run over all tasks (round-robin) with a shared encoder and
/// per-task heads; returns one shared encoder mask.
JointResult joint_discover(const ParamStore& pretrained, tasks::JointObjective& joint,
                           JointMethod method, const TrainConfig& config);

}  // namespace parp::methods
