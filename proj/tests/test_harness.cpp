#include <unistd.h>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "parp/binary_io.hpp"
#include "parp/error.hpp"
#include "parp/harness/harness.hpp"

using namespace parp;
using namespace parp::harness;
namespace fs = std::filesystem;

namespace {

/// Scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("parp-harness-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig tiny(Kind kind) {
  ExperimentConfig c = default_config(kind);
  c.encoder.hidden_dim = 12;
  c.pretrain.config.steps = 10;
  c.pretrain.corpus_size = 40;
  c.train.total_updates = 12;
  c.train.batch_size = 4;
  c.task.train_size = 12;
  c.task.dev_size = 8;
  c.task.test_size = 8;
  return c;
}

std::string slurp(const fs::path& p) {
  auto b = read_file(p);
  return {b.begin(), b.end()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("config canonical form and digest") {
  auto c = tiny(Kind::sweep);
  auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.canonical() == c.canonical());
  CHECK(back.digest() == c.digest());
  CHECK(c.digest().size() == 64);

  // keys come out sorted
  auto j = json::parse(c.canonical());
  std::vector<std::string> keys;
  for (auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(std::is_sorted(keys.begin(), keys.end()));

  auto w = c;
  w.workers = 4;
  CHECK(w.digest() == c.digest());
  auto s = c;
  s.seeds = {2};
  CHECK(s.digest() != c.digest());
}

TEST_CASE("config errors name the field") {
  auto j = tiny(Kind::prune).to_json();
  j["method"] = "magic";
  try {
    ExperimentConfig::from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("method") == 0);
  }
  auto k = tiny(Kind::prune).to_json();
  k["train"]["learning_rate"] = 1.0;
  try {
    ExperimentConfig::from_json(k);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "train.learning_rate: unknown key");
  }
  auto t = tiny(Kind::prune).to_json();
  t["sparsities"] = "half";
  CHECK_THROWS_AS(ExperimentConfig::from_json(t), ConfigError);
  auto m = tiny(Kind::sweep).to_json();
  m["methods"] = {"rp", "nope"};
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(m), doctest::Contains("methods"), ConfigError);
}

TEST_CASE("unresolvable references are config errors") {
  TempDir dir("refs");
  auto c = tiny(Kind::finetune);
  c.checkpoint = (dir.path / "missing.bin").string();
  CHECK_THROWS_AS(run(c, dir.path), ConfigError);
  auto p = tiny(Kind::parp);
  p.initial_mask = (dir.path / "missing.mask").string();
  CHECK_THROWS_AS(run(p, dir.path), ConfigError);
}

TEST_CASE("same config twice gives identical traces and masks") {
  TempDir a("det-a"), b("det-b");
  auto c = tiny(Kind::parp);
  c.sparsities = {0.5};
  c.train.eval_interval = 4;
  auto ra = run(c, a.path);
  auto rb = run(c, b.path);
  CHECK(ra.config_digest == rb.config_digest);
  CHECK(ra.mask_sha256 == rb.mask_sha256);
  CHECK(ra.trajectory == rb.trajectory);
  for (const char* f : {"steps.csv", "evals.csv", "mask.bin", "config.json"})
    CHECK(slurp(a.path / ra.config_digest / f) == slurp(b.path / rb.config_digest / f));
  CHECK(lines(slurp(a.path / ra.config_digest / "steps.csv")) == 13);
}

TEST_CASE("sweep over nine sparsities emits nine children and one curve") {
  TempDir dir("sweep9");
  auto c = tiny(Kind::sweep);
  c.methods = {"mpi"};
  c.sparsities = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  auto r = run(c, dir.path);
  CHECK(r.children.size() == 9);
  const auto root = dir.path / r.config_digest;
  std::size_t child_records = 0;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "record.json")) ++child_records;
  CHECK(child_records == 9);
  CHECK(lines(slurp(root / "curve.csv")) == 1 + 9);
  for (const auto& child : r.children) {
    auto cr = read_record(root / child);
    CHECK(cr.kind == "prune");
    CHECK(cr.method == "mpi");
  }
}

TEST_CASE("sweep accounting and the zero-sparsity anchor") {
  TempDir dir("sweep");
  auto c = tiny(Kind::sweep);
  c.methods = {"rp", "mpi", "omp", "parp"};
  c.sparsities = {0.0, 0.6};
  c.seeds = {1, 2};
  auto r = run(c, dir.path);
  const auto root = dir.path / r.config_digest;
  const std::string curve = slurp(root / "curve.csv");
  CHECK(lines(curve) == 1 + 4 * 2 * 2);
  CHECK(curve.substr(0, curve.find('\n')) == "sparsity,method,seed,final_dev,final_test");
  CHECK(lines(slurp(root / "curve_summary.csv")) == 1 + 4 * 2);

  // s = 0 is dense finetuning whatever the method
  for (std::uint64_t seed : {1u, 2u}) {
    std::set<std::string> dev;
    for (const auto& m : c.methods) {
      auto cr = read_record(root / (m + "_lang-01_s0_seed" + std::to_string(seed)) / "record.json");
      dev.insert(analytics::format_double(cr.final_dev.loss));
    }
    CHECK(dev.size() == 1);
  }
}

TEST_CASE("child config reproduces the child record") {
  TempDir a("child-a"), b("child-b");
  auto c = tiny(Kind::sweep);
  c.methods = {"omp"};
  c.sparsities = {0.5};
  c.seeds = {3, 4};
  auto r = run(c, a.path);
  const auto child_dir = (a.path / r.config_digest / r.children[1]).parent_path();
  auto child_cfg = ExperimentConfig::load(child_dir / "config.json");
  auto solo = run(child_cfg, b.path);
  CHECK(solo.config_digest == read_record(child_dir / "record.json").config_digest);
  CHECK(slurp(b.path / solo.config_digest / "steps.csv") == slurp(child_dir / "steps.csv"));
  CHECK(solo.mask_sha256 == read_record(child_dir / "record.json").mask_sha256);
}

TEST_CASE("workers do not change results") {
  TempDir a("w1"), b("w3");
  auto c = tiny(Kind::sweep);
  c.methods = {"rp", "parp"};
  c.sparsities = {0.3, 0.7};
  auto ra = run(c, a.path);
  c.workers = 3;
  auto rb = run(c, b.path);
  REQUIRE(ra.config_digest == rb.config_digest);
  CHECK(slurp(a.path / ra.config_digest / "curve.csv") == slurp(b.path / rb.config_digest / "curve.csv"));
  for (const auto& child : ra.children) {
    const auto pa = (a.path / ra.config_digest / child).parent_path();
    const auto pb = (b.path / rb.config_digest / child).parent_path();
    CHECK(slurp(pa / "steps.csv") == slurp(pb / "steps.csv"));
    CHECK(slurp(pa / "mask.bin") == slurp(pb / "mask.bin"));
  }
}

TEST_CASE("transfer matrix shape and zero diagonal") {
  TempDir dir("transfer");
  auto c = tiny(Kind::transfer_matrix);
  c.sparsities = {0.5};
  c.seeds = {1, 2};
  for (const char* mode : {"frozen", "parp"}) {
    Workspace ws(c, dir.path);
    auto t = transfer_matrix(ws, mode, 0.5, c.seeds);
    REQUIRE(t.delta.values.size() == 4);
    CHECK(t.delta.row_labels.back() == "RP");
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(t.delta.values[i].size() == 3);
      CHECK(t.delta.values[i][i] == 0.0);
    }
    CHECK(t.per_seed_off_diagonal_mean.size() == 2);
  }
  CHECK_THROWS_AS(
      [&] {
        Workspace ws(c, dir.path);
        transfer_matrix(ws, "thaw", 0.5, c.seeds);
      }(),
      ConfigError);
}

TEST_CASE("iou report has task columns plus MPI and RP rows") {
  TempDir dir("iou");
  auto c = tiny(Kind::iou_report);
  c.sparsities = {0.5};
  auto r = run(c, dir.path);
  const std::string csv = slurp(dir.path / r.config_digest / "iou.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "label,lang-01,lang-02,lang-03");
  CHECK(lines(csv) == 1 + 3 + 2);
  CHECK(csv.find("\nMPI,") != std::string::npos);
  CHECK(csv.find("\nRP,") != std::string::npos);
  Workspace ws(c, dir.path);
  auto m = iou_report(ws, "mpi", 0.5, 1);
  // mpi masks do not depend on the task, so everything but the RP row is one
  for (std::size_t i = 0; i + 1 < m.iou.values.size(); ++i)
    for (double v : m.iou.values[i]) CHECK(v == 1.0);
}

TEST_CASE("ablation pairs differ only in the initial mask") {
  TempDir dir("ablation");
  auto c = tiny(Kind::ablation);
  c.sparsities = {0.5};
  auto r = run(c, dir.path);
  REQUIRE(r.children.size() == 2);
  const auto root = dir.path / r.config_digest;
  auto ja = json::parse(slurp((root / r.children[0]).parent_path() / "config.json"));
  auto jb = json::parse(slurp((root / r.children[1]).parent_path() / "config.json"));
  CHECK(ja["initial_mask"] == "rp");
  CHECK(jb["initial_mask"] == "mpi");
  ja.erase("initial_mask");
  jb.erase("initial_mask");
  CHECK(ja == jb);

  // at s = 0 both initial masks are empty: zero delta
  auto z = c;
  z.sparsities = {0.0};
  auto rz = run(z, dir.path);
  CHECK(rz.extra["mean_delta"].get<double>() == 0.0);
}

TEST_CASE("joint run reports every task") {
  TempDir dir("joint");
  auto c = tiny(Kind::joint);
  c.tasks = {"lang-01", "lang-02"};
  c.sparsities = {0.5};
  c.train.total_updates = 40;
  for (const char* m : {"omp", "parp"}) {
    c.joint_method = m;
    auto r = run(c, dir.path);
    CHECK(r.task == "lang-01+lang-02");
    for (const auto& id : c.tasks) {
      const auto& e = r.extra["per_task"][id];
      CHECK(std::isfinite(e["dev_loss"].get<double>()));
      CHECK(e["dev_loss"].get<double>() < e["untrained_dev_loss"].get<double>());
    }
  }
}

TEST_CASE("pretrain writes a loadable checkpoint") {
  TempDir dir("pretrain");
  auto c = tiny(Kind::pretrain);
  auto r = run(c, dir.path);
  const auto ckpt = dir.path / r.config_digest / "theta0.bin";
  auto store = autonet::ParamStore::load(ckpt);
  CHECK(store.prunable_size() > 0);
  CHECK(lines(slurp(dir.path / r.config_digest / "pretrain_loss.csv")) == 11);

  auto f = tiny(Kind::finetune);
  f.checkpoint = ckpt.string();
  auto rf = run(f, dir.path);
  CHECK(rf.method == "dense");
  CHECK(rf.runs_consumed == 1);
}

TEST_CASE("records round trip and reject malformed files") {
  TempDir dir("record");
  RunRecord r;
  r.config_digest = "abc";
  r.code_version = kCodeVersion;
  r.kind = "prune";
  r.method = "omp";
  r.task = "lang-01";
  r.sparsity = 0.3;
  r.trajectory = {1.0, 0.5};
  r.extra["k"] = 1;
  write_record(r, dir.path);
  auto back = read_record(dir.path / "record.json");
  CHECK(back.to_json() == r.to_json());
  // no temp file survives the atomic write
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++files;
  CHECK(files == 1);

  std::ofstream(dir.path / "bad.json") << "{\"kind\": 3";
  CHECK_THROWS_WITH_AS(read_record(dir.path / "bad.json"), doctest::Contains("bad.json"), ParseError);
  std::ofstream(dir.path / "short.json") << "{\"kind\": \"x\"}";
  CHECK_THROWS_AS(read_record(dir.path / "short.json"), ParseError);
}

TEST_CASE("report tables") {
  TempDir dir("report");
  SUBCASE("empty glob gives headers only") {
    auto rep = report((dir.path / "*" / "record.json").string());
    CHECK(rep.records == 0);
    CHECK(rep.runs_csv == "method,sparsity,seed,discovery_runs,runs_consumed,total_update_steps\n");
    CHECK(rep.metrics_csv == "method,sparsity,seed,task,final_dev,final_test\n");
    CHECK(rep.trajectory_csv == "method,sparsity,seed,event,iou\n");
  }
  SUBCASE("one record, one row; imp at 0.5 needs seven discovery runs") {
    auto c = tiny(Kind::prune);
    c.method = "imp";
    c.sparsities = {0.5};
    auto r = run(c, dir.path);
    auto rep = report((dir.path / "*" / "record.json").string());
    CHECK(rep.records == 1);
    CHECK(lines(rep.runs_csv) == 2);
    CHECK(lines(rep.metrics_csv) == 2);
    CHECK(rep.runs_csv.find("\nimp,0.5,1,7,8,96\n") != std::string::npos);
    // a run directory works as the pattern too
    CHECK(report((dir.path / r.config_digest).string()).records == 1);
  }
  SUBCASE("parp trajectory rows") {
    auto c = tiny(Kind::parp);
    c.sparsities = {0.4};
    c.train.prune_interval = 3;
    run(c, dir.path);
    auto rep = report((dir.path / "*" / "record.json").string());
    CHECK(lines(rep.trajectory_csv) == 1 + 4);
  }
  SUBCASE("malformed record is a named parse error") {
    fs::create_directories(dir.path / "x");
    std::ofstream(dir.path / "x" / "record.json") << "not json";
    CHECK_THROWS_WITH_AS(report((dir.path / "*" / "record.json").string()), doctest::Contains("record.json"),
                         ParseError);
  }
}

TEST_CASE("glob matching") {
  TempDir dir("glob");
  for (const char* d : {"a1", "a2", "b1"}) {
    fs::create_directories(dir.path / d);
    std::ofstream(dir.path / d / "record.json") << "{}";
  }
  CHECK(glob_records((dir.path / "*" / "record.json").string()).size() == 3);
  CHECK(glob_records((dir.path / "a?" / "record.json").string()).size() == 2);
  CHECK(glob_records((dir.path / "b*" / "record.json").string()).size() == 1);
  CHECK(glob_records((dir.path / "c*" / "record.json").string()).empty());
}

TEST_CASE("output root comes from the environment") {
  ::setenv(kOutputEnv, "/tmp/somewhere", 1);
  CHECK(output_root() == fs::path("/tmp/somewhere"));
  ::unsetenv(kOutputEnv);
  CHECK(output_root() == fs::path("parp_out"));
}
