#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "parp/analytics/analytics.hpp"
#include "parp/harness/config.hpp"
#include "parp/harness/record.hpp"
#include "parp/tasks/objectives.hpp"

namespace parp::harness {

/// Resolves theta_0 and task data for one experiment, with on-disk caches
/// under <root>/cache.
class Workspace {
 public:
  Workspace(const ExperimentConfig& config, std::filesystem::path root);

  /// Pretrained encoder without heads.
  const autonet::ParamStore& theta0();
  std::shared_ptr<tasks::TaskObjective> task(const std::string& id);
  /// theta_0 plus a fresh head for each task, initialized from `seed`.
  autonet::ParamStore model_for(const std::vector<std::string>& ids, std::uint64_t seed);
  /// OMP mask for a task, memoized so several experiments can share it.
  pruning::Mask omp_mask(const std::string& task, double s, std::uint64_t seed);
  /// Resolves theta_0 and every configured task up front so that concurrent
  /// children only read shared state.
  void prepare();

  const ExperimentConfig& config() const { return config_; }
  const std::filesystem::path& root() const { return root_; }

 private:
  ExperimentConfig config_;
  std::filesystem::path root_;
  std::unique_ptr<autonet::ParamStore> theta0_;
  std::map<std::string, std::shared_ptr<tasks::TaskObjective>> tasks_;
  std::mutex omp_lock_;
  std::map<std::tuple<std::string, double, std::uint64_t>, pruning::Mask> omp_masks_;
};

/// Finetuned subnetwork and bookkeeping for one (method, task, s, seed).
struct MethodRun {
  autonet::ParamStore params;
  pruning::Mask mask;
  pruning::Mask initial;
  methods::Trace trace;
  std::vector<pruning::Mask> snapshots;
  methods::RunCount runs;
  std::int64_t update_steps = 0;
};

/// Discovers a mask with `method` and finetunes the subnetwork the way the
/// method's protocol requires (s = 0 is dense finetuning for every method).
MethodRun run_method(Workspace& ws, const std::string& method, const std::string& task, double s,
                     std::uint64_t seed);

/// Runs fn(0..n-1) on up to `workers` threads; rethrows the first failure by index.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Executes the experiment, writing <root>/<digest>/record.json and artifacts.
RunRecord run(const ExperimentConfig& config, const std::filesystem::path& root = output_root());

struct SweepRow {
  double sparsity;
  std::string method;
  std::uint64_t seed;
  double final_dev;
  double final_test;
};

/// sparsity,method,seed,final_dev,final_test
std::string curve_csv(const std::vector<SweepRow>& rows);
/// sparsity,method,n,mean_dev,std_dev,mean_test,std_test
std::string curve_summary_csv(const std::vector<SweepRow>& rows);

struct TransferResult {
  /// (|tasks|+1) x |tasks| dev-loss deltas against the target's own-mask
  /// entry, averaged over seeds; the last row is random pruning.
  analytics::LabeledMatrix delta;
  double off_diagonal_mean = 0.0;
  std::vector<double> per_seed_off_diagonal_mean;
  /// Same layout on the dev error rate.
  analytics::LabeledMatrix error_delta;
  double error_off_diagonal_mean = 0.0;
  std::vector<double> per_seed_error_off_diagonal_mean;
};

TransferResult transfer_matrix(Workspace& ws, const std::string& mode, double s,
                               const std::vector<std::uint64_t>& seeds);

/// Per-task masks from `method` with an MPI row and an RP row appended.
analytics::IouMatrix iou_report(Workspace& ws, const std::string& method, double s, std::uint64_t seed);

/// Consolidated tables over every record.json matched by `pattern`
/// (a path whose final component may contain * and ?).
struct Report {
  /// method,sparsity,seed,discovery_runs,runs_consumed,total_update_steps
  std::string runs_csv;
  /// method,sparsity,seed,task,final_dev,final_test
  std::string metrics_csv;
  /// method,sparsity,seed,event,iou
  std::string trajectory_csv;
  std::size_t records = 0;
};

Report report(const std::string& pattern);
std::vector<std::filesystem::path> glob_records(const std::string& pattern);

}  // namespace parp::harness
