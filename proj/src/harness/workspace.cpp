#include <atomic>
#include <exception>
#include <thread>

#include "parp/digest.hpp"
#include "parp/error.hpp"
#include "parp/harness/harness.hpp"
#include "parp/kernels.hpp"

namespace parp::harness {

Workspace::Workspace(const ExperimentConfig& config, std::filesystem::path root)
    : config_(config), root_(std::move(root)) {
  config_.validate();
}

const autonet::ParamStore& Workspace::theta0() {
  if (theta0_) return *theta0_;
  if (!config_.checkpoint.empty()) {
    if (!std::filesystem::exists(config_.checkpoint))
      throw ConfigError("checkpoint: no such file '" + config_.checkpoint + "'");
    theta0_ = std::make_unique<autonet::ParamStore>(autonet::ParamStore::load(config_.checkpoint));
    return *theta0_;
  }
  // The pretrained encoder depends only on the encoder, pretraining and
  // universe settings, so experiments that agree on those share one file.
  json key = {{"encoder", encoder_to_json(config_.encoder)},
              {"pretrain", pretrain_to_json(config_.pretrain)},
              {"universe_seed", config_.task.universe_seed}};
  const auto path = root_ / "cache" / ("theta0-" + to_hex(sha256(key.dump())).substr(0, 16) + ".bin");
  if (std::filesystem::exists(path)) {
    try {
      theta0_ = std::make_unique<autonet::ParamStore>(autonet::ParamStore::load(path));
      return *theta0_;
    } catch (const FormatError&) {
      // unreadable cache entry: rebuild it
    }
  }
  tasks::Universe u;
  u.seed = config_.task.universe_seed;
  u.feature_dim = config_.encoder.input_dim;
  auto corpus = std::make_shared<const tasks::Corpus>(tasks::gen_pretrain_corpus(
      u, config_.pretrain.corpus_seed, config_.pretrain.corpus_size, config_.pretrain.corpus_noise));
  auto result = tasks::pretrain(config_.encoder, corpus, config_.pretrain.config);
  std::filesystem::create_directories(path.parent_path());
  result.encoder.save(path);
  theta0_ = std::make_unique<autonet::ParamStore>(std::move(result.encoder));
  return *theta0_;
}

std::shared_ptr<tasks::TaskObjective> Workspace::task(const std::string& id) {
  auto it = tasks_.find(id);
  if (it != tasks_.end()) return it->second;
  auto data = std::make_shared<const tasks::Dataset>(tasks::gen_language_task(config_.task_spec(id)));
  auto obj = std::make_shared<tasks::TaskObjective>(config_.encoder, std::move(data));
  tasks_.emplace(id, obj);
  return obj;
}

autonet::ParamStore Workspace::model_for(const std::vector<std::string>& ids, std::uint64_t seed) {
  autonet::EncoderModel model{config_.encoder, theta0()};
  std::vector<tasks::TaskSpec> specs;
  for (const auto& id : ids) specs.push_back(config_.task_spec(id));
  tasks::attach_task_heads(model, specs, seed);
  return std::move(model.store);
}

pruning::Mask Workspace::omp_mask(const std::string& task_id, double s, std::uint64_t seed) {
  const auto key = std::make_tuple(task_id, s, seed);
  {
    std::lock_guard lock(omp_lock_);
    if (auto it = omp_masks_.find(key); it != omp_masks_.end()) return it->second;
  }
  methods::TrainConfig tc = config_.train;
  tc.seed = seed;
  tc.sparsity = s;
  auto mask = methods::omp(model_for({task_id}, seed), *task(task_id), tc).mask;
  std::lock_guard lock(omp_lock_);
  return omp_masks_.emplace(key, std::move(mask)).first->second;
}

void Workspace::prepare() {
  theta0();
  for (const auto& id : config_.tasks) task(id);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  // Children are single-threaded; results do not depend on this since the
  // kernels agree bitwise across modes.
  const auto saved = kernels::mode();
  kernels::set_mode(kernels::Mode::serial);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  for (std::size_t w = 0; w < count; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  kernels::set_mode(saved);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace parp::harness
