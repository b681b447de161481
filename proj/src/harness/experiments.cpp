#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "parp/binary_io.hpp"
#include "parp/error.hpp"
#include "parp/harness/harness.hpp"

namespace parp::harness {

using analytics::format_double;
using autonet::Split;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

methods::TrainConfig train_for(const ExperimentConfig& c, double s, std::uint64_t seed) {
  methods::TrainConfig tc = c.train;
  tc.sparsity = s;
  tc.seed = seed;
  return tc;
}

pruning::Mask initial_mask(Workspace& ws, const autonet::ParamStore& base, double s, std::uint64_t seed) {
  const std::string& spec = ws.config().initial_mask;
  if (spec == "mpi") return methods::mpi(base, s);
  if (spec == "rp") return methods::rp(base, s, seed);
  if (!std::filesystem::exists(spec))
    throw ConfigError("initial_mask: expected 'mpi', 'rp' or a mask file, got '" + spec + "'");
  pruning::Mask m = pruning::load_mask(spec);
  try {
    pruning::check_binding(base, m);
  } catch (const BindingError& e) {
    throw ConfigError(std::string("initial_mask: ") + e.what());
  }
  return m;
}

/// s-labels in directory names: shortest round-trip form, so 0.1 stays "0.1".
std::string child_name(const std::string& method, const std::string& task, double s, std::uint64_t seed) {
  return method + "_" + task + "_s" + format_double(s) + "_seed" + std::to_string(seed);
}

std::string mask_hex(const pruning::Mask& m) { return to_hex(sha256(pruning::encode_mask(m))); }

/// Single-run config equivalent to one child of a composite experiment, so
/// every child record carries a digest that reproduces it on its own.
ExperimentConfig leaf_config(const ExperimentConfig& parent, const std::string& method, const std::string& task,
                             double s, std::uint64_t seed) {
  ExperimentConfig c = parent;
  c.methods.clear();
  c.tasks = {task};
  c.seeds = {seed};
  c.sparsities = {s};
  if (method == "dense") {
    c.kind = Kind::finetune;
  } else {
    c.method = method;
    const auto m = methods::parse_method(method);
    c.kind = m == methods::Method::parp || m == methods::Method::parp_p ? Kind::parp : Kind::prune;
  }
  return c;
}

void write_config(const ExperimentConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "config.json", c.to_json().dump(2) + "\n");
}

RunRecord base_record(const ExperimentConfig& c) {
  RunRecord r;
  r.config_digest = c.digest();
  r.code_version = kCodeVersion;
  r.kind = kind_name(c.kind);
  r.method = c.method;
  r.task = c.tasks.front();
  r.seed = c.seeds.front();
  r.sparsity = c.sparsities.empty() ? 0.0 : c.sparsities.front();
  return r;
}

/// One (method, task, s, seed) run with all artifacts written into `dir`.
RunRecord run_leaf(Workspace& ws, const ExperimentConfig& leaf, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string method = leaf.kind == Kind::finetune ? "dense" : leaf.method;
  const double s = leaf.kind == Kind::finetune ? 0.0 : leaf.sparsities.front();
  const std::string& task = leaf.tasks.front();
  const std::uint64_t seed = leaf.seeds.front();

  MethodRun mr = run_method(ws, method, task, s, seed);
  auto obj = ws.task(task);
  RunRecord r = base_record(leaf);
  r.method = method;
  r.sparsity = s;
  r.final_dev = obj->evaluate(mr.params, Split::dev);
  r.final_test = obj->evaluate(mr.params, Split::test);
  r.discovery_runs = mr.runs.discovery;
  r.runs_consumed = mr.runs.total;
  r.total_update_steps = mr.update_steps;
  if (method == "parp" || method == "parp-p")
    r.trajectory = analytics::mask_trajectory(mr.snapshots, mr.initial);

  write_config(leaf, dir);
  write_file_atomic(dir / "steps.csv", steps_csv(mr.trace));
  write_file_atomic(dir / "evals.csv", evals_csv(mr.trace));
  pruning::save_mask(mr.mask, dir / "mask.bin");
  r.mask_paths = {"mask.bin"};
  r.mask_sha256 = {mask_hex(mr.mask)};
  if (method == "parp" || method == "parp-p") {
    pruning::save_mask(mr.initial, dir / "initial_mask.bin");
    r.mask_paths.push_back("initial_mask.bin");
    r.mask_sha256.push_back(mask_hex(mr.initial));
  }
  r.extra["final_sparsity"] = pruning::sparsity(mr.mask);
  r.wall_time_s = seconds_since(t0);
  write_record(r, dir);
  return r;
}

struct Leaf {
  std::string method;
  std::string task;
  double s;
  std::uint64_t seed;
};

std::vector<RunRecord> run_leaves(Workspace& ws, const ExperimentConfig& parent, const std::vector<Leaf>& leaves,
                                  const std::filesystem::path& dir) {
  ws.prepare();
  std::vector<RunRecord> out(leaves.size());
  parallel_for(leaves.size(), parent.workers, [&](std::size_t i) {
    const auto& l = leaves[i];
    out[i] = run_leaf(ws, leaf_config(parent, l.method, l.task, l.s, l.seed),
                      dir / child_name(l.method, l.task, l.s, l.seed));
  });
  return out;
}

/// Finetune / prune / parp: one leaf, or children when the lists fan out.
RunRecord run_single(Workspace& ws, const ExperimentConfig& c, const std::filesystem::path& dir) {
  const std::string method = c.kind == Kind::finetune ? "dense" : c.method;
  const std::vector<double> ss = c.kind == Kind::finetune ? std::vector<double>{0.0} : c.sparsities;
  std::vector<Leaf> leaves;
  for (const auto& t : c.tasks)
    for (double s : ss)
      for (auto seed : c.seeds) leaves.push_back({method, t, s, seed});
  if (leaves.size() == 1) {
    ws.prepare();
    return run_leaf(ws, c, dir);
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto children = run_leaves(ws, c, leaves, dir);
  RunRecord r = base_record(c);
  r.method = method;
  for (const auto& l : leaves) r.children.push_back(child_name(l.method, l.task, l.s, l.seed) + "/record.json");
  write_config(c, dir);
  r.wall_time_s = seconds_since(t0);
  write_record(r, dir);
  return r;
}

RunRecord run_pretrain(Workspace& ws, const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  tasks::Universe u;
  u.seed = c.task.universe_seed;
  u.feature_dim = c.encoder.input_dim;
  auto corpus = std::make_shared<const tasks::Corpus>(
      tasks::gen_pretrain_corpus(u, c.pretrain.corpus_seed, c.pretrain.corpus_size, c.pretrain.corpus_noise));
  auto result = tasks::pretrain(c.encoder, corpus, c.pretrain.config);
  write_config(c, dir);
  result.encoder.save(dir / "theta0.bin");
  std::ostringstream csv;
  csv << "step,loss\n";
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i)
    csv << i + 1 << ',' << format_double(result.loss_trace[i]) << '\n';
  write_file_atomic(dir / "pretrain_loss.csv", csv.str());
  (void)ws;
  RunRecord r = base_record(c);
  r.method = tasks::ssl_name(c.pretrain.config.objective);
  r.task = "";
  r.seed = c.pretrain.config.seed;
  r.sparsity = 0.0;
  r.total_update_steps = c.pretrain.config.steps;
  r.extra["checkpoint"] = "theta0.bin";
  r.extra["checkpoint_sha256"] = to_hex(sha256(result.encoder.serialize()));
  r.extra["final_loss"] = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  r.wall_time_s = seconds_since(t0);
  write_record(r, dir);
  return r;
}

RunRecord run_sweep(Workspace& ws, const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Leaf> leaves;
  for (const auto& t : c.tasks)
    for (const auto& m : c.methods)
      for (double s : c.sparsities)
        for (auto seed : c.seeds) leaves.push_back({m, t, s, seed});
  auto children = run_leaves(ws, c, leaves, dir);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    rows.push_back({leaves[i].s, leaves[i].method, leaves[i].seed, children[i].final_dev.loss,
                    children[i].final_test.loss});
  write_config(c, dir);
  write_file_atomic(dir / "curve.csv", curve_csv(rows));
  write_file_atomic(dir / "curve_summary.csv", curve_summary_csv(rows));
  RunRecord r = base_record(c);
  r.method = "sweep";
  for (const auto& l : leaves) r.children.push_back(child_name(l.method, l.task, l.s, l.seed) + "/record.json");
  r.extra["curve"] = "curve.csv";
  r.extra["curve_summary"] = "curve_summary.csv";
  r.wall_time_s = seconds_since(t0);
  write_record(r, dir);
  return r;
}

RunRecord run_transfer(Workspace& ws, const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const double s = c.sparsities.front();
  TransferResult tr = transfer_matrix(ws, c.transfer_mode, s, c.seeds);
  write_config(c, dir);
  write_file_atomic(dir / "transfer_delta.csv", tr.delta.to_csv());
  write_file_atomic(dir / "transfer_error_delta.csv", tr.error_delta.to_csv());
  RunRecord r = base_record(c);
  r.method = c.transfer_mode;
  r.task = "";
  r.extra["matrix"] = "transfer_delta.csv";
  r.extra["off_diagonal_mean"] = tr.off_diagonal_mean;
  r.extra["per_seed_off_diagonal_mean"] = tr.per_seed_off_diagonal_mean;
  r.extra["error_matrix"] = "transfer_error_delta.csv";
  r.extra["error_off_diagonal_mean"] = tr.error_off_diagonal_mean;
  r.wall_time_s = seconds_since(t0);
  write_record(r, dir);
  return r;
}

RunRecord run_iou(Workspace& ws, const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const double s = c.sparsities.front();
  auto m = iou_report(ws, c.method, s, c.seeds.front());
  write_config(c, dir);
  write_file_atomic(dir / "iou.csv", m.iou.to_csv());
  write_file_atomic(dir / "overlap.csv", m.overlap.to_csv());
  RunRecord r = base_record(c);
  r.task = "";
  r.extra["iou"] = "iou.csv";
  r.extra["overlap"] = "overlap.csv";
  r.wall_time_s = seconds_since(t0);
  write_record(r, dir);
  return r;
}

RunRecord run_joint(Workspace& ws, const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  ws.prepare();
  const double s = c.sparsities.front();
  const std::uint64_t seed = c.seeds.front();
  std::vector<std::shared_ptr<tasks::TaskObjective>> objs;
  for (const auto& id : c.tasks) objs.push_back(ws.task(id));
  tasks::JointObjective joint(objs);
  auto base = ws.model_for(c.tasks, seed);
  const auto untrained = joint.evaluate_each(base, Split::dev);
  const auto jm = c.joint_method == "omp" ? methods::JointMethod::omp : methods::JointMethod::parp;
  auto res = methods::joint_discover(base, joint, jm, train_for(c, s, seed));
  const auto test = joint.evaluate_each(res.subnetwork, Split::test);

  write_config(c, dir);
  write_file_atomic(dir / "steps.csv", steps_csv(res.discovery.trace));
  write_file_atomic(dir / "evals.csv", evals_csv(res.discovery.trace));
  pruning::save_mask(res.discovery.mask, dir / "mask.bin");
  RunRecord r = base_record(c);
  r.method = c.joint_method;
  std::string joined;
  for (const auto& id : c.tasks) joined += (joined.empty() ? "" : "+") + id;
  r.task = joined;
  r.mask_paths = {"mask.bin"};
  r.mask_sha256 = {mask_hex(res.discovery.mask)};
  r.final_dev = joint.evaluate(res.subnetwork, Split::dev);
  r.final_test = joint.evaluate(res.subnetwork, Split::test);
  r.discovery_runs = res.discovery.runs.discovery;
  r.runs_consumed = jm == methods::JointMethod::omp ? 2 : 1;
  r.total_update_steps = c.train.total_updates * r.runs_consumed;
  json per = json::object();
  for (std::size_t i = 0; i < c.tasks.size(); ++i)
    per[c.tasks[i]] = {{"dev_loss", res.per_task[i].loss},
                       {"dev_error", res.per_task[i].error_rate},
                       {"test_loss", test[i].loss},
                       {"untrained_dev_loss", untrained[i].loss}};
  r.extra["per_task"] = per;
  r.wall_time_s = seconds_since(t0);
  write_record(r, dir);
  return r;
}

RunRecord run_ablation(Workspace& ws, const ExperimentConfig& c, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  ws.prepare();
  const double s = c.sparsities.front();
  const std::string& task = c.tasks.front();
  RunRecord r = base_record(c);
  r.method = "parp";
  json pairs = json::array();
  double sum = 0.0;
  int mpi_wins = 0;
  for (auto seed : c.seeds) {
    RunRecord side[2];
    const char* inits[2] = {"rp", "mpi"};
    for (int k = 0; k < 2; ++k) {
      ExperimentConfig leaf = leaf_config(c, "parp", task, s, seed);
      leaf.initial_mask = inits[k];
      Workspace child(leaf, ws.root());
      const std::string name = std::string("init-") + inits[k] + "_s" + format_double(s) + "_seed" +
                               std::to_string(seed);
      side[k] = run_leaf(child, leaf, dir / name);
      r.children.push_back(name + "/record.json");
    }
    const double delta = side[1].final_dev.loss - side[0].final_dev.loss;
    sum += delta;
    if (delta <= 0.0) ++mpi_wins;
    pairs.push_back({{"seed", seed},
                     {"rp_dev_loss", side[0].final_dev.loss},
                     {"mpi_dev_loss", side[1].final_dev.loss},
                     {"delta", delta}});
  }
  write_config(c, dir);
  r.extra["pairs"] = pairs;
  r.extra["mean_delta"] = sum / static_cast<double>(c.seeds.size());
  r.extra["mpi_not_worse"] = mpi_wins;
  r.wall_time_s = seconds_since(t0);
  write_record(r, dir);
  return r;
}

}  // namespace

MethodRun run_method(Workspace& ws, const std::string& method, const std::string& task, double s,
                     std::uint64_t seed) {
  const ExperimentConfig& c = ws.config();
  auto obj = ws.task(task);
  const auto base = ws.model_for({task}, seed);
  const auto tc = train_for(c, s, seed);
  MethodRun out;
  const std::int64_t n = c.train.total_updates;

  if (s == 0.0 || method == "dense") {
    if (method != "dense") methods::parse_method(method);
    auto ft = methods::finetune_dense(base, *obj, tc);
    out.params = std::move(ft.params);
    out.trace = std::move(ft.trace);
    out.mask = pruning::Mask::ones(base);
    out.initial = out.mask;
    out.runs = {0, 1};
    out.update_steps = n;
    return out;
  }

  const auto m = methods::parse_method(method);
  auto subnetwork = [&](const pruning::Mask& mask) {
    auto ft = methods::subnetwork_finetune(base, mask, *obj, tc);
    out.params = std::move(ft.params);
    out.trace = std::move(ft.trace);
    out.mask = mask;
    out.initial = mask;
  };
  switch (m) {
    case methods::Method::rp: subnetwork(methods::rp(base, s, seed)); break;
    case methods::Method::mpi: subnetwork(methods::mpi(base, s)); break;
    case methods::Method::omp: subnetwork(ws.omp_mask(task, s, seed)); break;
    case methods::Method::imp: {
      auto res = methods::imp(base, *obj, tc);
      subnetwork(res.mask);
      out.snapshots = std::move(res.snapshots);
      break;
    }
    case methods::Method::parp: {
      out.initial = initial_mask(ws, base, s, seed);
      auto res = methods::parp(base, out.initial, *obj, tc);
      out.params = std::move(res.params);
      out.trace = std::move(res.trace);
      out.mask = std::move(res.mask);
      out.snapshots = std::move(res.snapshots);
      break;
    }
    case methods::Method::parp_p: {
      if (!(c.start_sparsity < s)) throw ConfigError("start_sparsity: must be below the target sparsity");
      out.initial = methods::mpi(base, c.start_sparsity);
      auto res = methods::parp_p(base, *obj, tc, c.start_sparsity);
      out.params = std::move(res.params);
      out.trace = std::move(res.trace);
      out.mask = std::move(res.mask);
      out.snapshots = std::move(res.snapshots);
      break;
    }
  }
  out.runs = methods::run_count(m, s, c.train.prune_fraction);
  out.update_steps = n * out.runs.total;
  return out;
}

RunRecord run(const ExperimentConfig& config, const std::filesystem::path& root) {
  config.validate();
  Workspace ws(config, root);
  const auto dir = root / config.digest();
  switch (config.kind) {
    case Kind::pretrain: return run_pretrain(ws, config, dir);
    case Kind::finetune:
    case Kind::prune:
    case Kind::parp: return run_single(ws, config, dir);
    case Kind::sweep: return run_sweep(ws, config, dir);
    case Kind::transfer_matrix: return run_transfer(ws, config, dir);
    case Kind::joint: return run_joint(ws, config, dir);
    case Kind::iou_report: return run_iou(ws, config, dir);
    case Kind::ablation: return run_ablation(ws, config, dir);
  }
  throw ConfigError("kind: unsupported");
}

std::string curve_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "sparsity,method,seed,final_dev,final_test\n";
  for (const auto& r : rows)
    out << format_double(r.sparsity) << ',' << r.method << ',' << r.seed << ',' << format_double(r.final_dev)
        << ',' << format_double(r.final_test) << '\n';
  return out.str();
}

std::string curve_summary_csv(const std::vector<SweepRow>& rows) {
  // groups in first-appearance order
  std::vector<std::pair<std::string, double>> keys;
  std::map<std::pair<std::string, double>, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) {
    auto k = std::make_pair(r.method, r.sparsity);
    if (!groups.count(k)) keys.push_back(k);
    groups[k].push_back(&r);
  }
  auto stats = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::make_pair(mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0);
  };
  std::ostringstream out;
  out << "sparsity,method,n,mean_dev,std_dev,mean_test,std_test\n";
  for (const auto& k : keys) {
    std::vector<double> dev, test;
    for (const auto* r : groups[k]) {
      dev.push_back(r->final_dev);
      test.push_back(r->final_test);
    }
    auto [md, sd] = stats(dev);
    auto [mt, st] = stats(test);
    out << format_double(k.second) << ',' << k.first << ',' << dev.size() << ',' << format_double(md) << ','
        << format_double(sd) << ',' << format_double(mt) << ',' << format_double(st) << '\n';
  }
  return out.str();
}

TransferResult transfer_matrix(Workspace& ws, const std::string& mode, double s,
                               const std::vector<std::uint64_t>& seeds) {
  if (mode != "frozen" && mode != "parp")
    throw ConfigError("transfer_mode: expected 'frozen' or 'parp', got '" + mode + "'");
  const auto& ids = ws.config().tasks;
  const std::size_t k = ids.size();
  ws.prepare();
  TransferResult out;
  out.delta.col_labels = ids;
  out.delta.row_labels = ids;
  out.delta.row_labels.push_back("RP");
  out.delta.values.assign(k + 1, std::vector<double>(k, 0.0));
  out.error_delta = out.delta;

  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (auto seed : seeds) {
    std::vector<pruning::Mask> masks(k);
    parallel_for(k, ws.config().workers, [&](std::size_t i) { masks[i] = ws.omp_mask(ids[i], s, seed); });
    // entry (src, tgt): final dev result on tgt starting from src's mask; row k is RP
    std::vector<std::vector<autonet::EvalResult>> res(k + 1, std::vector<autonet::EvalResult>(k));
    parallel_for((k + 1) * k, ws.config().workers, [&](std::size_t idx) {
      const std::size_t src = idx / k, tgt = idx % k;
      auto base = ws.model_for({ids[tgt]}, seed);
      auto obj = ws.task(ids[tgt]);
      const auto tc = train_for(ws.config(), s, seed);
      const pruning::Mask mask = src < k ? masks[src] : methods::rp(base, s, seed);
      autonet::ParamStore params = mode == "frozen" ? methods::subnetwork_finetune(base, mask, *obj, tc).params
                                                    : methods::parp(base, mask, *obj, tc).params;
      res[src][tgt] = obj->evaluate(params, Split::dev);
    });
    double off = 0.0, off_err = 0.0;
    const double n_seeds = static_cast<double>(seeds.size());
    for (std::size_t src = 0; src <= k; ++src)
      for (std::size_t tgt = 0; tgt < k; ++tgt) {
        const double d = res[src][tgt].loss - res[tgt][tgt].loss;
        const double de = res[src][tgt].error_rate - res[tgt][tgt].error_rate;
        out.delta.values[src][tgt] += d / n_seeds;
        out.error_delta.values[src][tgt] += de / n_seeds;
        if (src < k && src != tgt) {
          off += d;
          off_err += de;
        }
      }
    const double pairs = static_cast<double>(k * (k - 1));
    out.per_seed_off_diagonal_mean.push_back(off / pairs);
    out.per_seed_error_off_diagonal_mean.push_back(off_err / pairs);
  }
  out.off_diagonal_mean = mean(out.per_seed_off_diagonal_mean);
  out.error_off_diagonal_mean = mean(out.per_seed_error_off_diagonal_mean);
  return out;
}

analytics::IouMatrix iou_report(Workspace& ws, const std::string& method, double s, std::uint64_t seed) {
  const auto& ids = ws.config().tasks;
  ws.prepare();
  std::vector<pruning::Mask> masks(ids.size());
  parallel_for(ids.size(), ws.config().workers, [&](std::size_t i) {
    masks[i] = method == "omp" ? ws.omp_mask(ids[i], s, seed) : run_method(ws, method, ids[i], s, seed).mask;
  });
  std::vector<analytics::LabeledMask> cols;
  for (std::size_t i = 0; i < ids.size(); ++i) cols.push_back({ids[i], &masks[i]});
  auto m = analytics::iou_matrix(cols);
  const auto mpi = methods::mpi(ws.theta0(), s);
  const auto rp = methods::rp(ws.theta0(), s, seed);
  analytics::append_reference_row(m, {"MPI", &mpi}, cols);
  analytics::append_reference_row(m, {"RP", &rp}, cols);
  m.sparsity = s;
  return m;
}

}  // namespace parp::harness
