#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "parp/autonet/model.hpp"
#include "parp/autonet/objective.hpp"
#include "parp/tasks/tasks.hpp"

namespace parp::tasks {

enum class SslObjective { masked_recon, contrastive };

std::string ssl_name(SslObjective o);
SslObjective parse_ssl(const std::string& name);

struct PretrainConfig {
  SslObjective objective = SslObjective::masked_recon;
  std::int64_t steps = 600;
  std::size_t batch_size = 16;
  double peak_lr = 3e-3;
  std::uint64_t seed = 1;
  double mask_prob = 0.15;
  /// Contrastive only.
  std::size_t negatives = 8;
  double temperature = 0.5;
  double view_noise = 0.3;
  std::size_t projection_dim = 16;
};

/// Toy SSL objective over an unlabeled corpus. Head names: "recon" / "proj".
class SslTrainingObjective : public autonet::Objective {
 public:
  SslTrainingObjective(autonet::EncoderConfig config, std::shared_ptr<const Corpus> corpus,
                       PretrainConfig pcfg);

  double train_loss(autonet::ParamStore& store, std::uint64_t seed, std::int64_t step,
                    std::size_t batch_size) override;
  /// Loss on a fixed held-out slice of the corpus (error_rate unused).
  autonet::EvalResult evaluate(autonet::ParamStore& store, autonet::Split split) override;

  std::string head() const;

 private:
  double loss_on(autonet::ParamStore& store, const std::vector<std::size_t>& seqs,
                 std::uint64_t seed, std::int64_t step, bool backward);

  autonet::EncoderConfig config_;
  std::shared_ptr<const Corpus> corpus_;
  PretrainConfig pcfg_;
};

struct PretrainResult {
  autonet::ParamStore encoder;       // pretraining head removed
  std::vector<double> loss_trace;    // per update
};

/// Trains a freshly initialized encoder on the corpus. Zero steps returns the
/// initialization.
PretrainResult pretrain(const autonet::EncoderConfig& config, std::shared_ptr<const Corpus> corpus,
                        const PretrainConfig& pcfg);

}  // namespace parp::tasks
