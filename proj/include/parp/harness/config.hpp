#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "parp/autonet/model.hpp"
#include "parp/methods/methods.hpp"
#include "parp/tasks/pretrain.hpp"
#include "parp/tasks/tasks.hpp"

namespace parp::harness {

using nlohmann::json;

enum class Kind { pretrain, finetune, prune, parp, sweep, transfer_matrix, joint, iou_report, ablation };

std::string kind_name(Kind k);
Kind parse_kind(const std::string& name);

/// Overrides applied to default_task(id) for every task in the experiment.
struct TaskOverrides {
  tasks::Flavor flavor = tasks::Flavor::ctc_sequence;
  double noise = 1.5;
  double template_shift = 0.6;
  std::size_t train_size = 50;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  std::uint64_t universe_seed = 2021;
};

/// How theta_0 is obtained when no checkpoint file is given.
struct PretrainSpec {
  tasks::PretrainConfig config;
  std::size_t corpus_size = 2000;
  double corpus_noise = 1.5;
  std::uint64_t corpus_seed = 1;
};

struct ExperimentConfig {
  Kind kind = Kind::sweep;
  std::string method = "parp";
  /// Sweep only.
  std::vector<std::string> methods;
  std::vector<std::string> tasks = {"lang-01"};
  methods::TrainConfig train;
  std::vector<double> sparsities = {0.5};
  std::vector<std::uint64_t> seeds = {1};
  /// parp-p start sparsity.
  double start_sparsity = 0.0;
  /// Transfer matrix: "frozen" or "parp".
  std::string transfer_mode = "parp";
  /// Joint discovery: "omp" or "parp".
  std::string joint_method = "parp";
  /// PARP initial mask: "mpi", "rp" or a mask file path.
  std::string initial_mask = "mpi";
  /// Optional theta_0 checkpoint; empty means pretrain per `pretrain`.
  std::string checkpoint;
  autonet::EncoderConfig encoder;
  PretrainSpec pretrain;
  TaskOverrides task;

  /// Not part of the run identity.
  int workers = 1;

  void validate() const;
  tasks::TaskSpec task_spec(const std::string& id) const;

  /// Canonical form: sorted keys, every identity field present.
  json to_json() const;
  /// Missing keys keep defaults; unknown keys are a ConfigError naming the key.
  static ExperimentConfig from_json(const json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  std::string canonical() const;
  /// Hex SHA-256 of canonical(); the run identity.
  std::string digest() const;
};

/// The toy setting every experiment defaults to.
ExperimentConfig default_config(Kind kind);

json encoder_to_json(const autonet::EncoderConfig& c);
json train_to_json(const methods::TrainConfig& c);
json pretrain_to_json(const PretrainSpec& p);

/// Output root: $PARP_OUT, else ./parp_out.
std::filesystem::path output_root();
inline constexpr const char* kOutputEnv = "PARP_OUT";
inline constexpr const char* kCodeVersion = "0.1.0";

}  // namespace parp::harness
