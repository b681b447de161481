// parp: command-line front end for the experiment harness.
//
// Exit codes: 0 success, 1 configuration error, 2 run error.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "parp/analytics/analytics.hpp"
#include "parp/binary_io.hpp"
#include "parp/error.hpp"
#include "parp/harness/harness.hpp"

using namespace parp;
using namespace parp::harness;

namespace {

/// Flags shared by every experiment subcommand; unset flags leave the
/// config file (or the kind's defaults) untouched.
struct Common {
  std::string config_file;
  std::string out;
  std::vector<std::string> tasks;
  std::vector<std::uint64_t> seeds;
  std::optional<std::int64_t> steps;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::int64_t> eval_interval;
  std::optional<int> workers;
  std::optional<std::string> checkpoint;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "JSON experiment config to start from");
    app->add_option("--out", out, std::string("output root (default $") + kOutputEnv + " or ./parp_out)");
    app->add_option("--tasks,--task", tasks, "task ids");
    app->add_option("--seeds,--seed", seeds, "seeds");
    app->add_option("--steps", steps, "finetuning updates N");
    app->add_option("--lr", lr, "peak learning rate");
    app->add_option("--batch", batch, "batch size");
    app->add_option("--eval-interval", eval_interval, "dev evaluation interval");
    app->add_option("--workers", workers, "concurrent child runs");
    app->add_option("--from,--checkpoint", checkpoint, "pretrained encoder checkpoint");
  }

  ExperimentConfig base(Kind kind) const {
    ExperimentConfig c = default_config(kind);
    if (!config_file.empty()) {
      c = ExperimentConfig::load(config_file);
      c.kind = kind;
    }
    if (!tasks.empty()) c.tasks = tasks;
    if (!seeds.empty()) c.seeds = seeds;
    if (steps) c.train.total_updates = *steps;
    if (lr) c.train.peak_lr = *lr;
    if (batch) c.train.batch_size = *batch;
    if (eval_interval) c.train.eval_interval = *eval_interval;
    if (workers) c.workers = *workers;
    if (checkpoint) c.checkpoint = *checkpoint;
    return c;
  }

  std::filesystem::path root() const { return out.empty() ? output_root() : std::filesystem::path(out); }
};

void print_record(const RunRecord& r, const std::filesystem::path& root) {
  json j = {{"record", (root / r.config_digest / "record.json").string()},
            {"kind", r.kind},
            {"method", r.method},
            {"final_dev", {{"loss", r.final_dev.loss}, {"error_rate", r.final_dev.error_rate}}},
            {"final_test", {{"loss", r.final_test.loss}, {"error_rate", r.final_test.error_rate}}},
            {"runs_consumed", r.runs_consumed},
            {"total_update_steps", r.total_update_steps},
            {"children", r.children.size()},
            {"extra", r.extra}};
  std::cout << j.dump() << "\n";
}

RunRecord execute(const ExperimentConfig& c, const Common& common) {
  c.validate();
  auto root = common.root();
  auto r = run(c, root);
  print_record(r, root);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pruning-mask discovery and subnetwork finetuning experiments"};
  app.require_subcommand(1);
  Common common;

  auto* run_cmd = app.add_subcommand("run", "execute a JSON experiment config as is");
  std::string run_file;
  run_cmd->add_option("config", run_file, "config file")->required();
  run_cmd->add_option("--out", common.out, "output root");

  auto* pre = app.add_subcommand("pretrain", "self-supervised pretraining of the toy encoder");
  common.add(pre);
  std::string objective = "masked-recon";
  std::optional<std::int64_t> pre_steps;
  pre->add_option("--objective", objective)->check(CLI::IsMember({"masked-recon", "contrastive"}));
  pre->add_option("--pretrain-steps", pre_steps, "pretraining updates");

  auto* ft = app.add_subcommand("finetune", "dense finetuning of theta_0 on a task");
  common.add(ft);

  auto* prune = app.add_subcommand("prune", "find a mask and finetune the subnetwork");
  common.add(prune);
  std::string prune_method = "omp";
  std::vector<double> prune_s;
  std::optional<double> rewind;
  prune->add_option("--method", prune_method)->check(CLI::IsMember({"rp", "mpi", "omp", "imp"}));
  prune->add_option("--sparsity,--sparsities", prune_s);
  prune->add_option("--rewind", rewind, "IMP rewind fraction");

  auto* parp_cmd = app.add_subcommand("parp", "prune, adjust and re-prune during one finetuning run");
  common.add(parp_cmd);
  std::vector<double> parp_s;
  std::optional<double> start_s;
  std::optional<std::int64_t> interval;
  std::optional<std::string> init_mask;
  bool reset_moments = false;
  parp_cmd->add_option("--sparsity,--sparsities", parp_s);
  parp_cmd->add_option("--start-sparsity", start_s, "progressive variant from this sparsity");
  parp_cmd->add_option("--interval", interval, "updates between re-prunes (n)");
  parp_cmd->add_option("--initial-mask", init_mask, "'mpi', 'rp' or a mask file");
  parp_cmd->add_flag("--reset-moments", reset_moments, "zero optimizer moments at every re-prune");

  auto* sweep = app.add_subcommand("sweep", "methods x sparsities x seeds");
  common.add(sweep);
  std::vector<std::string> sweep_methods;
  std::vector<double> sweep_s;
  sweep->add_option("--methods", sweep_methods)->delimiter(',');
  sweep->add_option("--sparsities", sweep_s)->delimiter(',');

  auto* transfer = app.add_subcommand("transfer", "cross-task mask transfer matrix");
  common.add(transfer);
  std::string transfer_mode = "parp";
  std::optional<double> transfer_s;
  transfer->add_option("--mode", transfer_mode)->check(CLI::IsMember({"frozen", "parp"}));
  transfer->add_option("--sparsity", transfer_s);

  auto* joint = app.add_subcommand("joint", "one shared subnetwork for several tasks");
  common.add(joint);
  std::string joint_method = "parp";
  std::optional<double> joint_s;
  joint->add_option("--method", joint_method)->check(CLI::IsMember({"omp", "parp"}));
  joint->add_option("--sparsity", joint_s);

  auto* ablation = app.add_subcommand("ablation", "PARP from a random vs a magnitude initial mask");
  common.add(ablation);
  std::optional<double> ablation_s;
  ablation->add_option("--sparsity", ablation_s);

  auto* analyze = app.add_subcommand("analyze", "mask analytics");
  analyze->require_subcommand(1);
  auto* a_iou = analyze->add_subcommand("iou", "IOU and overlap matrices");
  common.add(a_iou);
  std::vector<std::string> iou_masks;
  std::string iou_method = "omp";
  std::optional<double> iou_s;
  a_iou->add_option("masks", iou_masks, "mask files; omit to build per-task masks");
  a_iou->add_option("--method", iou_method);
  a_iou->add_option("--sparsity", iou_s);
  auto* a_layer = analyze->add_subcommand("layerwise", "per-layer sparsity of a mask");
  std::string layer_mask;
  a_layer->add_option("mask", layer_mask)->required();
  auto* a_traj = analyze->add_subcommand("trajectory", "IOU of mask snapshots with a reference");
  std::string traj_ref;
  std::vector<std::string> traj_masks;
  a_traj->add_option("--reference", traj_ref)->required();
  a_traj->add_option("masks", traj_masks)->required();

  auto* rep = app.add_subcommand("report", "consolidate run records");
  std::string rep_glob;
  std::string rep_dir;
  rep->add_option("glob", rep_glob, "record.json pattern or run directory")->required();
  rep->add_option("--out-dir", rep_dir, "write runs.csv, metrics.csv, trajectory.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd) {
      auto c = ExperimentConfig::load(run_file);
      execute(c, common);
    } else if (*pre) {
      auto c = common.base(Kind::pretrain);
      c.pretrain.config.objective = tasks::parse_ssl(objective);
      if (!common.seeds.empty()) c.pretrain.config.seed = common.seeds.front();
      if (pre_steps) c.pretrain.config.steps = *pre_steps;
      execute(c, common);
    } else if (*ft) {
      execute(common.base(Kind::finetune), common);
    } else if (*prune) {
      auto c = common.base(Kind::prune);
      c.method = prune_method;
      if (!prune_s.empty()) c.sparsities = prune_s;
      if (rewind) c.train.rewind_fraction = *rewind;
      execute(c, common);
    } else if (*parp_cmd) {
      auto c = common.base(Kind::parp);
      c.method = start_s ? "parp-p" : "parp";
      if (start_s) c.start_sparsity = *start_s;
      if (!parp_s.empty()) c.sparsities = parp_s;
      if (interval) c.train.prune_interval = *interval;
      if (init_mask) c.initial_mask = *init_mask;
      if (reset_moments) c.train.reset_moments_on_prune = true;
      execute(c, common);
    } else if (*sweep) {
      auto c = common.base(Kind::sweep);
      if (!sweep_methods.empty()) c.methods = sweep_methods;
      if (!sweep_s.empty()) c.sparsities = sweep_s;
      execute(c, common);
    } else if (*transfer) {
      auto c = common.base(Kind::transfer_matrix);
      c.transfer_mode = transfer_mode;
      if (transfer_s) c.sparsities = {*transfer_s};
      execute(c, common);
    } else if (*joint) {
      auto c = common.base(Kind::joint);
      c.joint_method = joint_method;
      if (joint_s) c.sparsities = {*joint_s};
      execute(c, common);
    } else if (*ablation) {
      auto c = common.base(Kind::ablation);
      if (ablation_s) c.sparsities = {*ablation_s};
      execute(c, common);
    } else if (*a_iou) {
      if (iou_masks.empty()) {
        auto c = common.base(Kind::iou_report);
        c.method = iou_method;
        if (iou_s) c.sparsities = {*iou_s};
        execute(c, common);
      } else {
        std::vector<pruning::Mask> masks;
        for (const auto& p : iou_masks) masks.push_back(pruning::load_mask(p));
        std::vector<analytics::LabeledMask> labeled;
        for (std::size_t i = 0; i < masks.size(); ++i)
          labeled.push_back({std::filesystem::path(iou_masks[i]).string(), &masks[i]});
        auto m = analytics::iou_matrix(labeled);
        std::cout << "# iou\n" << m.iou.to_csv() << "# overlap\n" << m.overlap.to_csv();
      }
    } else if (*a_layer) {
      std::cout << analytics::layerwise_sparsity(pruning::load_mask(layer_mask)).to_csv();
    } else if (*a_traj) {
      const auto ref = pruning::load_mask(traj_ref);
      std::cout << "event,iou\n";
      for (std::size_t i = 0; i < traj_masks.size(); ++i)
        std::cout << i + 1 << ',' << analytics::format_double(analytics::iou(pruning::load_mask(traj_masks[i]), ref))
                  << '\n';
    } else if (*rep) {
      auto r = report(rep_glob);
      if (!rep_dir.empty()) {
        std::filesystem::create_directories(rep_dir);
        write_file_atomic(std::filesystem::path(rep_dir) / "runs.csv", r.runs_csv);
        write_file_atomic(std::filesystem::path(rep_dir) / "metrics.csv", r.metrics_csv);
        write_file_atomic(std::filesystem::path(rep_dir) / "trajectory.csv", r.trajectory_csv);
        std::cout << r.records << " records\n";
      } else {
        std::cout << r.metrics_csv;
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "run error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
