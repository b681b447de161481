#include "parp/methods/methods.hpp"

#include <cmath>

#include "parp/error.hpp"
#include "parp/tasks/objectives.hpp"

namespace parp::methods {

using autonet::Split;

void TrainConfig::validate() const {
  if (total_updates < 0) throw ConfigError("total_updates must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) throw ConfigError("peak_lr must be finite and >= 0");
  if (!(floor_ratio > 0.0 && floor_ratio <= 1.0)) throw ConfigError("floor_ratio must be in (0,1]");
  if (eval_interval < 0) throw ConfigError("eval_interval must be >= 0");
  if (prune_interval < 0) throw ConfigError("prune_interval must be >= 0");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw ConfigError("sparsity must be in [0,1]");
  if (!(rewind_fraction >= 0.0 && rewind_fraction <= 1.0)) throw ConfigError("rewind_fraction must be in [0,1]");
  if (!(prune_fraction > 0.0 && prune_fraction < 1.0)) throw ConfigError("prune_fraction must be in (0,1)");
}

std::int64_t TrainConfig::interval() const {
  if (prune_interval > 0) return prune_interval;
  return std::max<std::int64_t>(1, total_updates / 20);
}

autonet::LRSchedule TrainConfig::lr_schedule() const {
  return {peak_lr, std::max<std::int64_t>(1, total_updates), floor_ratio};
}

void Trace::append(const Trace& other) {
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  evals.insert(evals.end(), other.evals.begin(), other.evals.end());
}

Trainer::Trainer(ParamStore& store, Objective& objective, const TrainConfig& config)
    : store_(store),
      objective_(objective),
      config_(config),
      schedule_(config.lr_schedule()),
      opt_(config.optimizer, store) {
  config_.validate();
}

void Trainer::run_until(std::int64_t last) {
  if (last > config_.total_updates) throw ConfigError("training past total_updates");
  while (step_ < last) {
    const std::int64_t t = ++step_;
    const double lr = autonet::lr_at(schedule_, t);
    store_.zero_grad();
    double loss;
    try {
      loss = objective_.train_loss(store_, config_.seed, t, config_.batch_size);
    } catch (const NumericalError& e) {
      throw RunError(e.what(), t);
    }
    const bool finite = std::isfinite(loss);
    bad_streak_ = (!finite || loss > kDivergenceLimit) ? bad_streak_ + 1 : 0;
    if (bad_streak_ >= kDivergencePatience)
      throw RunError("training diverged (loss " + std::to_string(loss) + ")", t);
    // A non-finite loss carries no usable gradient; the update is skipped.
    if (finite) {
      try {
        opt_.step(store_, lr);
      } catch (const NumericalError& e) {
        throw RunError(e.what(), t);
      }
    }
    for (auto& h : hooks_) h(store_, opt_);
    trace_.steps.push_back({t, lr, loss});
    if (observer_) observer_(t, store_);
    if (config_.eval_interval > 0 && (t % config_.eval_interval == 0 || t == config_.total_updates)) {
      const auto r = objective_.evaluate(store_, Split::dev);
      trace_.evals.push_back({t, r.loss, r.error_rate});
    }
  }
}

std::string method_name(Method m) {
  switch (m) {
    case Method::rp: return "rp";
    case Method::mpi: return "mpi";
    case Method::omp: return "omp";
    case Method::imp: return "imp";
    case Method::parp: return "parp";
    case Method::parp_p: return "parp-p";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::rp, Method::mpi, Method::omp, Method::imp, Method::parp, Method::parp_p})
    if (method_name(m) == name) return m;
  if (name == "parp_p") return Method::parp_p;
  throw ConfigError("method: unknown method id '" + name + "'");
}

int imp_iterations(double s, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("prune_fraction must be in (0,1)");
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("imp needs 0 < s < 1");
  int k = 1;
  // Tolerance keeps exact hits such as s = 1 - 0.9^2 at k = 2.
  while (1.0 - std::pow(1.0 - rho, k) < s - 1e-12) ++k;
  return k;
}

std::vector<double> imp_schedule(double s, double rho) {
  const int k = imp_iterations(s, rho);
  std::vector<double> out;
  for (int i = 1; i < k; ++i) out.push_back(1.0 - std::pow(1.0 - rho, i));
  out.push_back(s);
  return out;
}

RunCount run_count(Method m, double s, double rho) {
  switch (m) {
    case Method::rp:
    case Method::mpi: return {0, 1};
    case Method::omp: return {1, 2};
    case Method::imp: {
      const int k = s > 0.0 ? imp_iterations(s, rho) : 1;
      return {k, k + 1};
    }
    case Method::parp:
    case Method::parp_p: return {1, 1};
  }
  return {};
}

Mask mpi(const ParamStore& pretrained, double s) { return pruning::global_magnitude_mask(pretrained, s); }

Mask rp(const ParamStore& pretrained, double s, std::uint64_t seed) {
  return pruning::random_mask(pretrained, s, seed);
}

FinetuneResult finetune_dense(const ParamStore& pretrained, Objective& task, const TrainConfig& config) {
  FinetuneResult out{pretrained, {}};
  Trainer trainer(out.params, task, config);
  trainer.run_until(config.total_updates);
  out.trace = trainer.take_trace();
  return out;
}

MethodResult omp(const ParamStore& pretrained, Objective& task, const TrainConfig& config) {
  config.validate();
  FinetuneResult ft = finetune_dense(pretrained, task, config);
  MethodResult out;
  out.method = "omp";
  out.mask = pruning::global_magnitude_mask(ft.params, config.sparsity);
  out.params = std::move(ft.params);
  out.trace = std::move(ft.trace);
  out.runs = run_count(Method::omp, config.sparsity, config.prune_fraction);
  out.update_steps = config.total_updates;
  return out;
}

MethodResult imp(const ParamStore& pretrained, Objective& task, const TrainConfig& config) {
  config.validate();
  const auto targets = imp_schedule(config.sparsity, config.prune_fraction);
  const auto rewind_step =
      static_cast<std::int64_t>(std::floor(config.rewind_fraction * static_cast<double>(config.total_updates)));
  std::optional<ParamStore> rewind;
  if (config.rewind_fraction == 0.0 || rewind_step == 0) rewind = pretrained;

  MethodResult out;
  out.method = "imp";
  Mask mask = Mask::ones(pretrained);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    ParamStore store = k == 0 ? pretrained : *rewind;
    pruning::apply_zero(store, mask);
    Trainer trainer(store, task, config);
    trainer.add_step_hook(pruning::freeze_apply(store, mask));
    if (!rewind)
      trainer.set_observer([&](std::int64_t t, const ParamStore& s) {
        if (t == rewind_step) rewind = s;
      });
    trainer.run_until(config.total_updates);
    mask = pruning::global_magnitude_mask(store, targets[k], &mask);
    out.snapshots.push_back(mask);
    out.snapshot_sparsities.push_back(pruning::sparsity(mask));
    out.trace.append(trainer.trace());
    out.params = std::move(store);
  }
  out.mask = mask;
  out.runs = {static_cast<int>(targets.size()), static_cast<int>(targets.size()) + 1};
  out.update_steps = config.total_updates * static_cast<std::int64_t>(targets.size());
  return out;
}

FinetuneResult subnetwork_finetune(const ParamStore& pretrained, const Mask& mask, Objective& task,
                                   const TrainConfig& config) {
  FinetuneResult out{pretrained, {}};
  pruning::apply_zero(out.params, mask);
  Trainer trainer(out.params, task, config);
  trainer.add_step_hook(pruning::freeze_apply(out.params, mask));
  trainer.run_until(config.total_updates);
  out.trace = trainer.take_trace();
  return out;
}

namespace {

/// Shared PARP loop: zero out, train n updates freely, re-prune at the
/// scheduled sparsity; the last partial segment also ends in a re-prune.
MethodResult parp_loop(const ParamStore& pretrained, Mask mask, Objective& task, const TrainConfig& config,
                       const pruning::SparsitySchedule& schedule, std::string name) {
  config.validate();
  pruning::check_binding(pretrained, mask);
  const std::int64_t n = config.interval();
  if (config.total_updates > 0 && n > config.total_updates)
    throw ConfigError("prune_interval must not exceed total_updates");
  MethodResult out;
  out.method = std::move(name);
  out.params = pretrained;
  Trainer trainer(out.params, task, config);
  std::int64_t event = 0;
  while (trainer.step() < config.total_updates) {
    pruning::apply_zero(out.params, mask);
    if (config.reset_moments_on_prune && event > 0) trainer.optimizer().reset_moments();
    trainer.run_until(std::min(trainer.step() + n, config.total_updates));
    ++event;
    mask = pruning::global_magnitude_mask(out.params, schedule.at(event));
    out.snapshots.push_back(mask);
    out.snapshot_sparsities.push_back(schedule.at(event));
  }
  pruning::apply_zero(out.params, mask);
  out.mask = std::move(mask);
  out.trace = trainer.take_trace();
  out.runs = {1, 1};
  out.update_steps = config.total_updates;
  return out;
}

}  // namespace

MethodResult parp(const ParamStore& pretrained, const Mask& initial, Objective& task,
                  const TrainConfig& config) {
  config.validate();
  const std::size_t d = initial.total_bits();
  if (d - initial.kept_count() != pruning::pruned_count(config.sparsity, d))
    throw ConfigError("initial mask sparsity does not match the target sparsity");
  return parp_loop(pretrained, initial, task, config, {{{1, config.sparsity}}}, "parp");
}

MethodResult parp_p(const ParamStore& pretrained, Objective& task, const TrainConfig& config,
                    double start_sparsity) {
  config.validate();
  if (!(start_sparsity >= 0.0 && start_sparsity < config.sparsity))
    throw ConfigError("start sparsity must be in [0, target)");
  const std::int64_t events = std::max<std::int64_t>(1, config.total_updates / config.interval());
  const auto schedule =
      pruning::progressive_schedule(start_sparsity, config.sparsity, events, config.progressive_shape);
  return parp_loop(pretrained, mpi(pretrained, start_sparsity), task, config, schedule, "parp-p");
}

JointResult joint_discover(const ParamStore& pretrained, tasks::JointObjective& joint, JointMethod method,
                           const TrainConfig& config) {
  JointResult out;
  if (method == JointMethod::omp) {
    out.discovery = omp(pretrained, joint, config);
    out.subnetwork = subnetwork_finetune(pretrained, out.discovery.mask, joint, config).params;
  } else {
    out.discovery = parp(pretrained, mpi(pretrained, config.sparsity), joint, config);
    out.subnetwork = out.discovery.params;
  }
  out.per_task = joint.evaluate_each(out.subnetwork, Split::dev);
  return out;
}

}  // namespace parp::methods
