#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "parp/autonet/model.hpp"
#include "parp/autonet/objective.hpp"
#include "parp/digest.hpp"
#include "parp/tensor.hpp"

namespace parp::tasks {

enum class Flavor { frame_classification, ctc_sequence };

/// Parameters of the shared feature space every task and the pretraining
/// corpus draw from.
struct Universe {
  std::uint64_t seed = 2021;
  std::size_t feature_dim = 16;
  std::size_t master_templates = 24;
};

/// One synthetic "language": its own template dictionary over the shared
/// feature space, noisy frames, and labels of the chosen flavor.
struct TaskSpec {
  std::string id = "lang-00";
  Flavor flavor = Flavor::ctc_sequence;
  std::size_t vocab = 6;
  Universe universe;
  /// Per-component std of the task's perturbation away from master templates.
  double template_shift = 0.6;
  double noise = 0.5;
  std::size_t min_frames = 8;
  std::size_t max_frames = 24;
  std::size_t max_run = 3;
  std::size_t train_size = 2000;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  /// Optional related task whose first round(overlap * vocab) templates are shared.
  std::string related_to;
  double overlap = 0.0;

  void validate() const;
  /// Output width of the task head (vocab, plus blank for CTC).
  std::size_t head_width() const;
  /// CTC blank index (last class).
  int blank_id() const { return static_cast<int>(vocab); }
};

struct Sequence {
  Tensor frames;                 // [T x F]
  std::vector<int> frame_labels; // template id per frame
  std::vector<int> target;       // run-length collapsed template ids
};

struct Dataset {
  TaskSpec spec;
  std::vector<Sequence> train, dev, test;

  const std::vector<Sequence>& split(autonet::Split s) const;
  Sha256 checksum() const;
};

/// Dictionary of `count` templates, each [F].
using Dictionary = std::vector<std::vector<double>>;

Dictionary master_dictionary(const Universe& universe);
Dictionary task_dictionary(const TaskSpec& spec);

Dataset gen_language_task(const TaskSpec& spec);

struct Corpus {
  std::vector<Tensor> sequences;
  std::vector<std::vector<int>> latent;  // generating template per frame, for checks only
  Sha256 checksum() const;
};

Corpus gen_pretrain_corpus(const Universe& universe, std::uint64_t seed, std::size_t size,
                           double noise, std::size_t min_frames = 8, std::size_t max_frames = 24);

/// Run-length collapse of a label sequence.
std::vector<int> collapse_runs(const std::vector<int>& labels);

/// Default spec for a task id of the form "lang-NN".
TaskSpec default_task(const std::string& id, Flavor flavor = Flavor::ctc_sequence);

/// Dataset cache file: "PARPDATA" | u16 version | u32 spec-json length | spec json |
/// checksum[32] | per split { u32 count | per sequence { u32 T | u32 F | T*F f64 |
/// T i32 frame labels | u32 L | L i32 target } }.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

std::string flavor_name(Flavor f);
Flavor parse_flavor(const std::string& name);

}  // namespace parp::tasks
