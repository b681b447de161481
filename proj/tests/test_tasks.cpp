#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "parp/autonet/gradcheck.hpp"
#include "parp/autonet/optim.hpp"
#include "parp/autonet/schedule.hpp"
#include "parp/binary_io.hpp"
#include "parp/error.hpp"
#include "parp/tasks/objectives.hpp"
#include "parp/tasks/pretrain.hpp"
#include "parp/tasks/regression.hpp"
#include "parp/tasks/tasks.hpp"

using namespace parp;
using namespace parp::tasks;
using autonet::EncoderConfig;

namespace {

TaskSpec small_spec(const std::string& id, Flavor flavor, double noise = 0.5) {
  TaskSpec s = default_task(id, flavor);
  s.noise = noise;
  s.train_size = 60;
  s.dev_size = 20;
  s.test_size = 20;
  return s;
}

bool rows_equal(std::span<const double> a, const std::vector<double>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

std::size_t nearest(std::span<const double> x, const Dictionary& dict) {
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t j = 0; j < dict.size(); ++j) {
    double d = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) d += (x[c] - dict[j][c]) * (x[c] - dict[j][c]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("corpus generation is a pure function of its seed") {
  const Universe u;
  const Corpus a = gen_pretrain_corpus(u, 7, 20, 0.5);
  const Corpus b = gen_pretrain_corpus(u, 7, 20, 0.5);
  const Corpus c = gen_pretrain_corpus(u, 8, 20, 0.5);
  CHECK(a.sequences.front() == b.sequences.front());
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
  CHECK_THROWS_AS(gen_pretrain_corpus(u, 7, 0, 0.5), ConfigError);
}

TEST_CASE("noiseless corpus frames are exactly templates") {
  const Universe u;
  const Dictionary dict = master_dictionary(u);
  const Corpus corpus = gen_pretrain_corpus(u, 3, 30, 0.0);
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    const Tensor& s = corpus.sequences[i];
    CHECK(s.rows() >= 8);
    CHECK(s.rows() <= 24);
    for (std::size_t t = 0; t < s.rows(); ++t)
      REQUIRE(rows_equal(s.row(t), dict[static_cast<std::size_t>(corpus.latent[i][t])]));
  }
}

TEST_CASE("k-means on noiseless frames recovers the master dictionary") {
  const Universe u;
  const Dictionary dict = master_dictionary(u);
  const Corpus corpus = gen_pretrain_corpus(u, 11, 200, 0.0);
  std::set<std::vector<double>> distinct;
  for (const auto& s : corpus.sequences)
    for (std::size_t t = 0; t < s.rows(); ++t) distinct.insert({s.row(t).begin(), s.row(t).end()});
  const std::vector<std::vector<double>> points(distinct.begin(), distinct.end());
  const auto centers = oracle::kmeans(points, u.master_templates);
  std::set<std::size_t> matched;
  for (const auto& c : centers) {
    const std::size_t j = nearest(c, dict);
    for (std::size_t k = 0; k < c.size(); ++k) CHECK(c[k] == doctest::Approx(dict[j][k]).epsilon(1e-12));
    matched.insert(j);
  }
  CHECK(matched.size() == dict.size());
}

TEST_CASE("noiseless frame classification is separable by nearest template") {
  const TaskSpec spec = small_spec("lang-02", Flavor::frame_classification, 0.0);
  const Dataset data = gen_language_task(spec);
  const Dictionary dict = task_dictionary(spec);
  std::size_t frames = 0, correct = 0;
  for (const auto* part : {&data.train, &data.dev, &data.test})
    for (const auto& s : *part)
      for (std::size_t t = 0; t < s.frames.rows(); ++t, ++frames)
        if (static_cast<int>(nearest(s.frames.row(t), dict)) == s.frame_labels[t]) ++correct;
  CHECK(frames > 0);
  CHECK(correct == frames);
}

TEST_CASE("ctc targets are run-length collapsed frame labels") {
  CHECK(collapse_runs({0, 0, 1}) == std::vector<int>{0, 1});
  CHECK(collapse_runs({}).empty());
  CHECK(collapse_runs({2, 2, 2}) == std::vector<int>{2});
  const TaskSpec spec = small_spec("lang-05", Flavor::ctc_sequence);
  const Dataset data = gen_language_task(spec);
  for (const auto& s : data.train) {
    CHECK(s.target == collapse_runs(s.frame_labels));
    CHECK(s.frames.rows() >= spec.min_frames);
    CHECK(s.frames.rows() <= spec.max_frames);
    for (int l : s.frame_labels) {
      CHECK(l >= 0);
      CHECK(l < static_cast<int>(spec.vocab));
    }
    std::size_t run = 1;
    for (std::size_t t = 1; t < s.frame_labels.size(); ++t) {
      run = s.frame_labels[t] == s.frame_labels[t - 1] ? run + 1 : 1;
      CHECK(run <= spec.max_run);
    }
  }
}

TEST_CASE("task ids give distinct dictionaries and identical specs identical data") {
  const TaskSpec a = small_spec("lang-01", Flavor::ctc_sequence);
  TaskSpec b = a;
  b.id = "lang-11";
  CHECK(task_dictionary(a).front() != task_dictionary(b).front());
  CHECK(gen_language_task(a).checksum() == gen_language_task(a).checksum());
  CHECK(gen_language_task(a).checksum() != gen_language_task(b).checksum());
  CHECK(default_task("lang-03").vocab == 7);
  for (int i = 0; i < 10; ++i) {
    const auto v = default_task("lang-0" + std::to_string(i)).vocab;
    CHECK(v >= 4);
    CHECK(v <= 8);
  }
}

TEST_CASE("related tasks share their leading templates") {
  TaskSpec src = small_spec("lang-01", Flavor::ctc_sequence);
  TaskSpec rel = small_spec("lang-06", Flavor::ctc_sequence);
  rel.vocab = src.vocab;
  rel.related_to = src.id;
  rel.overlap = 0.5;
  const Dictionary ds = task_dictionary(src), dr = task_dictionary(rel);
  const auto shared = static_cast<std::size_t>(std::round(0.5 * static_cast<double>(src.vocab)));
  for (std::size_t j = 0; j < src.vocab; ++j) CHECK((ds[j] == dr[j]) == (j < shared));
}

TEST_CASE("spec validation") {
  TaskSpec s = small_spec("lang-00", Flavor::ctc_sequence);
  CHECK_NOTHROW(s.validate());
  CHECK(s.head_width() == s.vocab + 1);
  CHECK(s.blank_id() == static_cast<int>(s.vocab));
  s.vocab = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec("lang-00", Flavor::ctc_sequence);
  s.min_frames = 30;
  CHECK_THROWS_AS(gen_language_task(s), ConfigError);
  CHECK(parse_flavor(flavor_name(Flavor::frame_classification)) == Flavor::frame_classification);
  CHECK_THROWS_AS(parse_flavor("speech"), ConfigError);
}

TEST_CASE("dataset cache round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "parp_test_tasks";
  std::filesystem::create_directories(dir);
  const auto path = dir / "lang.data";
  const Dataset data = gen_language_task(small_spec("lang-04", Flavor::ctc_sequence));
  save_dataset(data, path);
  const Dataset back = load_dataset(path);
  CHECK(back.checksum() == data.checksum());
  CHECK(back.spec.id == data.spec.id);
  CHECK(back.spec.vocab == data.spec.vocab);
  CHECK(back.train.front().frames == data.train.front().frames);

  auto bytes = read_file(path);
  bytes.back() ^= 0x01;
  write_file_atomic(path, bytes);
  CHECK_THROWS_AS(load_dataset(path), FormatError);
  bytes.resize(bytes.size() / 2);
  write_file_atomic(path, bytes);
  CHECK_THROWS_AS(load_dataset(path), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("task objective gradients match finite differences") {
  EncoderConfig cfg;
  cfg.hidden_dim = 6;
  cfg.blocks = 1;
  cfg.nonlinearity = autonet::Nonlinearity::tanh;
  for (auto flavor : {Flavor::frame_classification, Flavor::ctc_sequence}) {
    TaskSpec spec = small_spec("lang-00", flavor);
    spec.max_frames = 10;
    auto data = std::make_shared<const Dataset>(gen_language_task(spec));
    TaskObjective obj(cfg, data);
    auto model = autonet::make_encoder(cfg, Rng(1, "init"));
    attach_task_heads(model, {spec}, 1);
    std::vector<const Sequence*> batch{&data->train[0], &data->train[1]};
    const auto report = autonet::finite_diff_check(
        model.store, [&](autonet::ParamStore& s) { return obj.batch_loss(s, batch, true); });
    CHECK(report.max_rel_error < 1e-5);
  }
}

TEST_CASE("task objective batches and evaluation") {
  EncoderConfig cfg;
  cfg.hidden_dim = 8;
  const TaskSpec spec = small_spec("lang-03", Flavor::ctc_sequence);
  auto data = std::make_shared<const Dataset>(gen_language_task(spec));
  auto obj = std::make_shared<TaskObjective>(cfg, data);
  auto model = autonet::make_encoder(cfg, Rng(2, "init"));
  attach_task_heads(model, {spec}, 2);
  const double l1 = obj->train_loss(model.store, 5, 3, 4);
  model.store.zero_grad();
  CHECK(obj->train_loss(model.store, 5, 3, 4) == l1);
  CHECK(obj->train_loss(model.store, 5, 4, 4) != l1);
  const auto dev = obj->evaluate(model.store, autonet::Split::dev);
  CHECK(std::isfinite(dev.loss));
  CHECK(dev.error_rate >= 0.0);

  // A joint objective over one task is that task.
  JointObjective joint({obj});
  model.store.zero_grad();
  CHECK(joint.train_loss(model.store, 5, 3, 4) == l1);
  CHECK(joint.evaluate(model.store, autonet::Split::dev).loss == dev.loss);

  EncoderConfig wrong = cfg;
  wrong.input_dim = 5;
  CHECK_THROWS_AS(TaskObjective(wrong, data), ConfigError);
}

TEST_CASE("joint objective cycles tasks by update index") {
  EncoderConfig cfg;
  cfg.hidden_dim = 8;
  const TaskSpec a = small_spec("lang-01", Flavor::ctc_sequence);
  const TaskSpec b = small_spec("lang-02", Flavor::frame_classification);
  auto ta = std::make_shared<TaskObjective>(cfg, std::make_shared<const Dataset>(gen_language_task(a)));
  auto tb = std::make_shared<TaskObjective>(cfg, std::make_shared<const Dataset>(gen_language_task(b)));
  auto model = autonet::make_encoder(cfg, Rng(3, "init"));
  attach_task_heads(model, {a, b}, 3);
  JointObjective joint({ta, tb});
  for (std::int64_t t = 1; t <= 4; ++t) {
    const double j = joint.train_loss(model.store, 9, t, 3);
    const double direct = (t % 2 == 1 ? ta : tb)->train_loss(model.store, 9, t, 3);
    CHECK(j == direct);
  }
  CHECK(joint.evaluate_each(model.store, autonet::Split::dev).size() == 2);
}

TEST_CASE("pretraining") {
  EncoderConfig cfg;
  cfg.hidden_dim = 16;
  auto corpus = std::make_shared<const Corpus>(gen_pretrain_corpus(Universe{}, 1, 200, 0.0));

  SUBCASE("zero steps returns the initialization") {
    PretrainConfig p;
    p.steps = 0;
    const auto res = pretrain(cfg, corpus, p);
    const auto init = autonet::make_encoder(cfg, Rng(p.seed, "encoder-init"));
    CHECK(res.encoder.values_equal(init.store));
    CHECK(res.loss_trace.empty());
  }

  SUBCASE("masked reconstruction loss decreases over the first 100 steps") {
    // First 100 updates of a 1000-update schedule, driven by hand.
    EncoderConfig wide;
    PretrainConfig p;
    p.batch_size = 32;
    SslTrainingObjective obj(wide, corpus, p);
    auto model = autonet::make_encoder(wide, Rng(p.seed, "encoder-init"));
    autonet::attach_head(model, obj.head(), wide.input_dim, Rng(p.seed, "ssl-head"));
    autonet::Optimizer opt(autonet::OptimizerKind::adam, model.store);
    const autonet::LRSchedule schedule{2e-3, 1000};
    std::vector<double> trace;
    for (std::int64_t t = 1; t <= 100; ++t) {
      model.store.zero_grad();
      trace.push_back(obj.train_loss(model.store, p.seed, t, p.batch_size));
      opt.step(model.store, autonet::lr_at(schedule, t));
    }
    double prev = 1e300;
    for (std::size_t w = 0; w < 10; ++w) {
      double mean = 0.0;
      for (std::size_t i = 0; i < 10; ++i) mean += trace[w * 10 + i];
      mean /= 10.0;
      CHECK(mean < prev);
      prev = mean;
    }
  }

  SUBCASE("pretraining drops its head") {
    PretrainConfig p;
    p.steps = 5;
    const auto res = pretrain(cfg, corpus, p);
    CHECK(res.loss_trace.size() == 5);
    CHECK(!res.encoder.find("head.recon.weight"));
  }

  SUBCASE("objectives produce different checkpoints") {
    PretrainConfig p;
    p.steps = 20;
    const auto a = pretrain(cfg, corpus, p);
    p.objective = SslObjective::contrastive;
    const auto b = pretrain(cfg, corpus, p);
    CHECK(a.encoder.content_hash() != b.encoder.content_hash());
    CHECK(a.encoder.layout_hash() == b.encoder.layout_hash());
    const auto c = pretrain(cfg, corpus, p);
    CHECK(b.encoder.content_hash() == c.encoder.content_hash());
  }

  CHECK(parse_ssl(ssl_name(SslObjective::contrastive)) == SslObjective::contrastive);
  CHECK_THROWS_AS(parse_ssl("mlm"), ConfigError);
}

TEST_CASE("ssl objectives have correct gradients") {
  EncoderConfig cfg;
  cfg.hidden_dim = 5;
  cfg.blocks = 1;
  cfg.nonlinearity = autonet::Nonlinearity::tanh;
  auto corpus = std::make_shared<const Corpus>(gen_pretrain_corpus(Universe{}, 2, 4, 0.3, 4, 6));
  for (auto kind : {SslObjective::masked_recon, SslObjective::contrastive}) {
    PretrainConfig p;
    p.objective = kind;
    p.projection_dim = 4;
    p.negatives = 3;
    SslTrainingObjective obj(cfg, corpus, p);
    auto model = autonet::make_encoder(cfg, Rng(4, "init"));
    autonet::attach_head(model, obj.head(), kind == SslObjective::contrastive ? 4 : cfg.input_dim,
                         Rng(4, "head"));
    const auto report = autonet::finite_diff_check(
        model.store, [&](autonet::ParamStore& s) { return obj.train_loss(s, 1, 1, 2); });
    CHECK(report.max_rel_error < 1e-5);
  }
}

TEST_CASE("linear regression objective") {
  const Tensor x = Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1});
  LinearRegressionObjective obj(x, {1.0, 2.0, 3.0});
  CHECK(obj.loss({1.0, 2.0}) == 0.0);
  CHECK(obj.loss({0.0, 0.0}) == doctest::Approx(14.0 / 3.0));
  auto store = LinearRegressionObjective::make_store({0.3, -0.2});
  const auto report = autonet::finite_diff_check(
      store, [&](autonet::ParamStore& s) { return obj.train_loss(s, 0, 1, 0); });
  CHECK(report.max_rel_error < 1e-7);
  CHECK_THROWS_AS(LinearRegressionObjective(x, {1.0}), ConfigError);
}
