#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "parp/autonet/objective.hpp"
#include "parp/methods/methods.hpp"

namespace parp::harness {

using nlohmann::json;

/// Immutable result of one run. Metric traces live in sibling CSV files so
/// they are byte-comparable across reruns; the record carries wall time.
struct RunRecord {
  std::string config_digest;
  std::string code_version;
  std::string kind;
  std::string method;
  std::string task;
  std::uint64_t seed = 0;
  double sparsity = 0.0;
  autonet::EvalResult final_dev;
  autonet::EvalResult final_test;
  std::vector<std::string> mask_paths;
  std::vector<std::string> mask_sha256;
  int discovery_runs = 0;
  int runs_consumed = 0;
  std::int64_t total_update_steps = 0;
  /// IOU of each re-prune snapshot with the initial mask (parp family).
  std::vector<double> trajectory;
  double wall_time_s = 0.0;
  /// Relative paths of child records (sweeps, matrices, ablations).
  std::vector<std::string> children;
  /// Kind-specific results.
  json extra = json::object();

  json to_json() const;
  static RunRecord from_json(const json& j);
};

/// Writes record.json atomically into `dir`.
void write_record(const RunRecord& r, const std::filesystem::path& dir);
/// Throws ParseError naming the file on malformed content.
RunRecord read_record(const std::filesystem::path& path);

/// step,lr,train_loss
std::string steps_csv(const methods::Trace& t);
/// step,dev_loss,dev_error
std::string evals_csv(const methods::Trace& t);

}  // namespace parp::harness
