#include "parp/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "parp/digest.hpp"
#include "parp/error.hpp"

namespace parp::harness {

namespace {

const char* kKindNames[] = {"pretrain", "finetune", "prune",     "parp",    "sweep",
                            "transfer-matrix", "joint", "iou-report", "ablation"};

std::string nonlinearity_name(autonet::Nonlinearity n) {
  switch (n) {
    case autonet::Nonlinearity::gelu: return "gelu";
    case autonet::Nonlinearity::relu: return "relu";
    case autonet::Nonlinearity::tanh: return "tanh";
    case autonet::Nonlinearity::identity: return "identity";
  }
  return "?";
}

autonet::Nonlinearity parse_nonlinearity(const std::string& s) {
  for (auto n : {autonet::Nonlinearity::gelu, autonet::Nonlinearity::relu, autonet::Nonlinearity::tanh,
                 autonet::Nonlinearity::identity})
    if (nonlinearity_name(n) == s) return n;
  throw ConfigError("encoder.nonlinearity: unknown value '" + s + "'");
}

/// Reads an object's keys into setters, rejecting anything unexpected.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(prefix() + k + ": unknown key");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(prefix() + key + ": " + e.what());
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return prefix() + key; }

 private:
  std::string prefix() const { return where_.empty() ? "" : where_ + "."; }
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

std::string kind_name(Kind k) { return kKindNames[static_cast<int>(k)]; }

Kind parse_kind(const std::string& name) {
  for (int i = 0; i < 9; ++i)
    if (name == kKindNames[i]) return static_cast<Kind>(i);
  throw ConfigError("kind: unknown experiment kind '" + name + "'");
}

json encoder_to_json(const autonet::EncoderConfig& c) {
  return {{"input_dim", c.input_dim},         {"hidden_dim", c.hidden_dim},
          {"blocks", c.blocks},               {"context", c.context},
          {"nonlinearity", nonlinearity_name(c.nonlinearity)},
          {"layer_norm", c.layer_norm},       {"prune_biases", c.prune_biases},
          {"init_scale", c.init_scale}};
}

json train_to_json(const methods::TrainConfig& c) {
  return {{"total_updates", c.total_updates},
          {"batch_size", c.batch_size},
          {"peak_lr", c.peak_lr},
          {"floor_ratio", c.floor_ratio},
          {"eval_interval", c.eval_interval},
          {"prune_interval", c.prune_interval},
          {"rewind_fraction", c.rewind_fraction},
          {"prune_fraction", c.prune_fraction},
          {"optimizer", c.optimizer == autonet::OptimizerKind::adam ? "adam" : "sgd"},
          {"reset_moments_on_prune", c.reset_moments_on_prune},
          {"progressive_shape", c.progressive_shape == pruning::ScheduleShape::linear ? "linear" : "geometric"}};
}

json pretrain_to_json(const PretrainSpec& p) {
  const auto& c = p.config;
  return {{"objective", tasks::ssl_name(c.objective)},
          {"steps", c.steps},
          {"batch_size", c.batch_size},
          {"peak_lr", c.peak_lr},
          {"seed", c.seed},
          {"mask_prob", c.mask_prob},
          {"negatives", c.negatives},
          {"temperature", c.temperature},
          {"view_noise", c.view_noise},
          {"projection_dim", c.projection_dim},
          {"corpus_size", p.corpus_size},
          {"corpus_noise", p.corpus_noise},
          {"corpus_seed", p.corpus_seed}};
}

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = kind_name(kind);
  j["method"] = method;
  j["methods"] = methods;
  j["tasks"] = tasks;
  j["train"] = train_to_json(train);
  j["sparsities"] = sparsities;
  j["seeds"] = seeds;
  j["start_sparsity"] = start_sparsity;
  j["transfer_mode"] = transfer_mode;
  j["joint_method"] = joint_method;
  j["initial_mask"] = initial_mask;
  j["checkpoint"] = checkpoint;
  j["encoder"] = encoder_to_json(encoder);
  j["pretrain"] = pretrain_to_json(pretrain);
  j["task"] = {{"flavor", tasks::flavor_name(task.flavor)},
               {"noise", task.noise},
               {"template_shift", task.template_shift},
               {"train_size", task.train_size},
               {"dev_size", task.dev_size},
               {"test_size", task.test_size},
               {"universe_seed", task.universe_seed}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  std::string kind = kind_name(c.kind);
  r.get("kind", kind);
  c.kind = parse_kind(kind);
  c = default_config(c.kind);
  r.get("method", c.method);
  r.get("methods", c.methods);
  r.get("tasks", c.tasks);
  r.get("sparsities", c.sparsities);
  r.get("seeds", c.seeds);
  r.get("start_sparsity", c.start_sparsity);
  r.get("transfer_mode", c.transfer_mode);
  r.get("joint_method", c.joint_method);
  r.get("initial_mask", c.initial_mask);
  r.get("checkpoint", c.checkpoint);
  r.get("workers", c.workers);
  if (const json* t = r.sub("train")) {
    Reader tr(*t, "train");
    auto& x = c.train;
    tr.get("total_updates", x.total_updates);
    tr.get("batch_size", x.batch_size);
    tr.get("peak_lr", x.peak_lr);
    tr.get("floor_ratio", x.floor_ratio);
    tr.get("eval_interval", x.eval_interval);
    tr.get("prune_interval", x.prune_interval);
    tr.get("rewind_fraction", x.rewind_fraction);
    tr.get("prune_fraction", x.prune_fraction);
    tr.get("reset_moments_on_prune", x.reset_moments_on_prune);
    std::string opt = x.optimizer == autonet::OptimizerKind::adam ? "adam" : "sgd";
    tr.get("optimizer", opt);
    if (opt == "adam") x.optimizer = autonet::OptimizerKind::adam;
    else if (opt == "sgd") x.optimizer = autonet::OptimizerKind::sgd;
    else throw ConfigError("train.optimizer: unknown value '" + opt + "'");
    std::string shape = x.progressive_shape == pruning::ScheduleShape::linear ? "linear" : "geometric";
    tr.get("progressive_shape", shape);
    if (shape == "linear") x.progressive_shape = pruning::ScheduleShape::linear;
    else if (shape == "geometric") x.progressive_shape = pruning::ScheduleShape::geometric;
    else throw ConfigError("train.progressive_shape: unknown value '" + shape + "'");
    // seed and sparsity come from the experiment's lists
  }
  if (const json* e = r.sub("encoder")) {
    Reader er(*e, "encoder");
    auto& x = c.encoder;
    er.get("input_dim", x.input_dim);
    er.get("hidden_dim", x.hidden_dim);
    er.get("blocks", x.blocks);
    er.get("context", x.context);
    er.get("layer_norm", x.layer_norm);
    er.get("prune_biases", x.prune_biases);
    er.get("init_scale", x.init_scale);
    std::string nl = nonlinearity_name(x.nonlinearity);
    er.get("nonlinearity", nl);
    x.nonlinearity = parse_nonlinearity(nl);
  }
  if (const json* p = r.sub("pretrain")) {
    Reader pr(*p, "pretrain");
    auto& x = c.pretrain.config;
    std::string obj = tasks::ssl_name(x.objective);
    pr.get("objective", obj);
    try {
      x.objective = tasks::parse_ssl(obj);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("pretrain.objective: ") + e.what());
    }
    pr.get("steps", x.steps);
    pr.get("batch_size", x.batch_size);
    pr.get("peak_lr", x.peak_lr);
    pr.get("seed", x.seed);
    pr.get("mask_prob", x.mask_prob);
    pr.get("negatives", x.negatives);
    pr.get("temperature", x.temperature);
    pr.get("view_noise", x.view_noise);
    pr.get("projection_dim", x.projection_dim);
    pr.get("corpus_size", c.pretrain.corpus_size);
    pr.get("corpus_noise", c.pretrain.corpus_noise);
    pr.get("corpus_seed", c.pretrain.corpus_seed);
  }
  if (const json* t = r.sub("task")) {
    Reader tr(*t, "task");
    auto& x = c.task;
    std::string flavor = tasks::flavor_name(x.flavor);
    tr.get("flavor", flavor);
    x.flavor = tasks::parse_flavor(flavor);
    tr.get("noise", x.noise);
    tr.get("template_shift", x.template_shift);
    tr.get("train_size", x.train_size);
    tr.get("dev_size", x.dev_size);
    tr.get("test_size", x.test_size);
    tr.get("universe_seed", x.universe_seed);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ExperimentConfig::validate() const {
  if (tasks.empty()) throw ConfigError("tasks: at least one task id is required");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  for (double s : sparsities)
    if (!(s >= 0.0 && s < 1.0)) throw ConfigError("sparsities: values must be in [0,1)");
  auto check_method = [](const std::string& m, const char* field) {
    try {
      methods::parse_method(m);
    } catch (const ConfigError&) {
      throw ConfigError(std::string(field) + ": unknown method id '" + m + "'");
    }
  };
  check_method(method, "method");
  for (const auto& m : methods) check_method(m, "methods");
  if (transfer_mode != "frozen" && transfer_mode != "parp")
    throw ConfigError("transfer_mode: expected 'frozen' or 'parp', got '" + transfer_mode + "'");
  if (joint_method != "omp" && joint_method != "parp")
    throw ConfigError("joint_method: expected 'omp' or 'parp', got '" + joint_method + "'");
  if (!(start_sparsity >= 0.0 && start_sparsity < 1.0)) throw ConfigError("start_sparsity: must be in [0,1)");
  try {
    train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  if (train.total_updates == 0 && kind != Kind::pretrain && kind != Kind::iou_report)
    throw ConfigError("train.total_updates: must be positive");
  if (kind == Kind::sweep && methods.empty()) throw ConfigError("methods: a sweep needs at least one method");
  if (kind == Kind::transfer_matrix && tasks.size() < 2)
    throw ConfigError("tasks: a transfer matrix needs at least two tasks");
  if (sparsities.empty() && kind != Kind::pretrain && kind != Kind::finetune)
    throw ConfigError("sparsities: at least one sparsity is required");
  for (const auto& id : tasks) task_spec(id).validate();
}

tasks::TaskSpec ExperimentConfig::task_spec(const std::string& id) const {
  tasks::TaskSpec s = tasks::default_task(id, task.flavor);
  s.noise = task.noise;
  s.template_shift = task.template_shift;
  s.train_size = task.train_size;
  s.dev_size = task.dev_size;
  s.test_size = task.test_size;
  s.universe.seed = task.universe_seed;
  s.universe.feature_dim = encoder.input_dim;
  return s;
}

std::string ExperimentConfig::canonical() const { return to_json().dump(); }

std::string ExperimentConfig::digest() const { return to_hex(sha256(canonical())); }

ExperimentConfig default_config(Kind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.train.total_updates = 600;
  c.train.batch_size = 16;
  c.train.peak_lr = 1e-3;
  c.pretrain.config.steps = 1500;
  c.pretrain.config.peak_lr = 3e-3;
  c.pretrain.config.batch_size = 16;
  if (kind == Kind::sweep) {
    c.methods = {"rp", "mpi", "omp", "imp", "parp", "parp-p"};
    c.sparsities = {0.0, 0.2, 0.4, 0.6, 0.8};
  }
  if (kind == Kind::transfer_matrix || kind == Kind::joint || kind == Kind::iou_report)
    c.tasks = {"lang-01", "lang-02", "lang-03"};
  if (kind == Kind::iou_report) c.method = "omp";
  return c;
}

std::filesystem::path output_root() {
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return "parp_out";
}

}  // namespace parp::harness
