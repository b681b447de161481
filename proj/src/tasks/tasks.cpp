#include "parp/tasks/tasks.hpp"

#include <cmath>
#include <cstring>

#include "json.hpp"
#include "parp/binary_io.hpp"
#include "parp/error.hpp"
#include "parp/rng.hpp"

namespace parp::tasks {
namespace {

using nlohmann::json;

constexpr char kDataMagic[8] = {'P', 'A', 'R', 'P', 'D', 'A', 'T', 'A'};
constexpr std::uint16_t kDataVersion = 1;

/// Frames made of runs of dictionary symbols, never repeating a symbol across
/// a run boundary.
Sequence draw_sequence(const Dictionary& dict, Rng rng, std::size_t min_frames,
                       std::size_t max_frames, std::size_t max_run, double noise) {
  const std::size_t dim = dict.front().size();
  const std::size_t vocab = dict.size();
  const std::size_t frames = min_frames + rng.below(max_frames - min_frames + 1);
  Sequence seq{Tensor({frames, dim}), {}, {}};
  seq.frame_labels.reserve(frames);
  int prev = -1;
  std::size_t t = 0;
  while (t < frames) {
    int sym;
    if (prev < 0 || vocab == 1) {
      sym = static_cast<int>(rng.below(vocab));
    } else {
      sym = static_cast<int>(rng.below(vocab - 1));
      if (sym >= prev) ++sym;
    }
    const std::size_t run = std::min<std::size_t>(1 + rng.below(max_run), frames - t);
    for (std::size_t r = 0; r < run; ++r, ++t) {
      auto row = seq.frames.row(t);
      const auto& tpl = dict[static_cast<std::size_t>(sym)];
      for (std::size_t c = 0; c < dim; ++c) row[c] = tpl[c] + (noise > 0.0 ? noise * rng.normal() : 0.0);
      seq.frame_labels.push_back(sym);
    }
    prev = sym;
  }
  seq.target = collapse_runs(seq.frame_labels);
  return seq;
}

void hash_sequence(ByteWriter& w, const Sequence& s) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.frames.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.frames.cols()));
  for (double v : s.frames.data()) w.put<double>(v);
  for (int l : s.frame_labels) w.put<std::int32_t>(l);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.target.size()));
  for (int l : s.target) w.put<std::int32_t>(l);
}

json spec_to_json(const TaskSpec& s) {
  return json{{"id", s.id},
              {"flavor", flavor_name(s.flavor)},
              {"vocab", s.vocab},
              {"universe_seed", s.universe.seed},
              {"feature_dim", s.universe.feature_dim},
              {"master_templates", s.universe.master_templates},
              {"template_shift", s.template_shift},
              {"noise", s.noise},
              {"min_frames", s.min_frames},
              {"max_frames", s.max_frames},
              {"max_run", s.max_run},
              {"train_size", s.train_size},
              {"dev_size", s.dev_size},
              {"test_size", s.test_size},
              {"related_to", s.related_to},
              {"overlap", s.overlap}};
}

TaskSpec spec_from_json(const json& j) {
  TaskSpec s;
  s.id = j.at("id").get<std::string>();
  s.flavor = parse_flavor(j.at("flavor").get<std::string>());
  s.vocab = j.at("vocab").get<std::size_t>();
  s.universe.seed = j.at("universe_seed").get<std::uint64_t>();
  s.universe.feature_dim = j.at("feature_dim").get<std::size_t>();
  s.universe.master_templates = j.at("master_templates").get<std::size_t>();
  s.template_shift = j.at("template_shift").get<double>();
  s.noise = j.at("noise").get<double>();
  s.min_frames = j.at("min_frames").get<std::size_t>();
  s.max_frames = j.at("max_frames").get<std::size_t>();
  s.max_run = j.at("max_run").get<std::size_t>();
  s.train_size = j.at("train_size").get<std::size_t>();
  s.dev_size = j.at("dev_size").get<std::size_t>();
  s.test_size = j.at("test_size").get<std::size_t>();
  s.related_to = j.at("related_to").get<std::string>();
  s.overlap = j.at("overlap").get<double>();
  return s;
}

}  // namespace

std::string flavor_name(Flavor f) {
  return f == Flavor::ctc_sequence ? "ctc-sequence" : "frame-classification";
}

Flavor parse_flavor(const std::string& name) {
  if (name == "ctc-sequence" || name == "ctc") return Flavor::ctc_sequence;
  if (name == "frame-classification" || name == "frame") return Flavor::frame_classification;
  throw ConfigError("unknown task flavor: " + name);
}

void TaskSpec::validate() const {
  if (id.empty()) throw ConfigError("task id must not be empty");
  if (vocab < 2) throw ConfigError("task vocab must be at least 2");
  if (vocab > universe.master_templates) throw ConfigError("task vocab exceeds master dictionary");
  if (min_frames == 0 || min_frames > max_frames) throw ConfigError("bad frame range");
  if (max_run == 0) throw ConfigError("max_run must be positive");
  if (!(noise >= 0.0) || !(template_shift >= 0.0)) throw ConfigError("noise levels must be >= 0");
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw ConfigError("overlap must be in [0,1]");
  if (train_size == 0) throw ConfigError("train split must be nonempty");
}

std::size_t TaskSpec::head_width() const {
  return flavor == Flavor::ctc_sequence ? vocab + 1 : vocab;
}

const std::vector<Sequence>& Dataset::split(autonet::Split s) const {
  switch (s) {
    case autonet::Split::train: return train;
    case autonet::Split::dev: return dev;
    case autonet::Split::test: return test;
  }
  return train;
}

Sha256 Dataset::checksum() const {
  ByteWriter w;
  for (const auto* part : {&train, &dev, &test}) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(part->size()));
    for (const auto& s : *part) hash_sequence(w, s);
  }
  return sha256(w.bytes());
}

Sha256 Corpus::checksum() const {
  ByteWriter w;
  for (const auto& s : sequences)
    for (double v : s.data()) w.put<double>(v);
  return sha256(w.bytes());
}

Dictionary master_dictionary(const Universe& universe) {
  Rng rng(universe.seed, "master-dictionary");
  Dictionary dict(universe.master_templates, std::vector<double>(universe.feature_dim));
  for (auto& tpl : dict)
    for (auto& v : tpl) v = rng.normal();
  return dict;
}

Dictionary task_dictionary(const TaskSpec& spec) {
  spec.validate();
  const Dictionary master = master_dictionary(spec.universe);
  Rng rng(spec.universe.seed, "task-dictionary:" + spec.id);
  // Distinct master symbols per task, chosen by a partial shuffle.
  std::vector<std::size_t> order(master.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < spec.vocab; ++i)
    std::swap(order[i], order[i + rng.below(order.size() - i)]);
  Dictionary dict(spec.vocab);
  for (std::size_t j = 0; j < spec.vocab; ++j) {
    dict[j] = master[order[j]];
    for (auto& v : dict[j]) v += spec.template_shift * rng.normal();
  }
  if (!spec.related_to.empty() && spec.overlap > 0.0) {
    TaskSpec source = spec;
    source.id = spec.related_to;
    source.related_to.clear();
    source.overlap = 0.0;
    const Dictionary shared = task_dictionary(source);
    const auto n = static_cast<std::size_t>(std::round(spec.overlap * static_cast<double>(spec.vocab)));
    for (std::size_t j = 0; j < n; ++j) dict[j] = shared[j];
  }
  return dict;
}

Dataset gen_language_task(const TaskSpec& spec) {
  spec.validate();
  const Dictionary dict = task_dictionary(spec);
  Dataset data{spec, {}, {}, {}};
  const Rng base(spec.universe.seed, "task-data:" + spec.id);
  auto fill = [&](std::vector<Sequence>& out, std::string_view name, std::size_t count) {
    const Rng site = base.split(name);
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      out.push_back(draw_sequence(dict, site.split(i), spec.min_frames, spec.max_frames,
                                  spec.max_run, spec.noise));
  };
  fill(data.train, "train", spec.train_size);
  fill(data.dev, "dev", spec.dev_size);
  fill(data.test, "test", spec.test_size);
  return data;
}

Corpus gen_pretrain_corpus(const Universe& universe, std::uint64_t seed, std::size_t size,
                           double noise, std::size_t min_frames, std::size_t max_frames) {
  if (size == 0) throw ConfigError("pretraining corpus size must be positive");
  if (min_frames == 0 || min_frames > max_frames) throw ConfigError("bad frame range");
  const Dictionary dict = master_dictionary(universe);
  const Rng site(seed, "pretrain-corpus");
  Corpus corpus;
  corpus.sequences.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    Sequence s = draw_sequence(dict, site.split(i), min_frames, max_frames, 3, noise);
    corpus.sequences.push_back(std::move(s.frames));
    corpus.latent.push_back(std::move(s.frame_labels));
  }
  return corpus;
}

std::vector<int> collapse_runs(const std::vector<int>& labels) {
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (i == 0 || labels[i] != labels[i - 1]) out.push_back(labels[i]);
  return out;
}

TaskSpec default_task(const std::string& id, Flavor flavor) {
  TaskSpec spec;
  spec.id = id;
  spec.flavor = flavor;
  // Vocab in [4, 8] from the trailing number of the id.
  std::size_t n = 0;
  for (char c : id)
    if (c >= '0' && c <= '9') n = n * 10 + static_cast<std::size_t>(c - '0');
  spec.vocab = 4 + n % 5;
  return spec;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  ByteWriter w;
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kDataMagic), 8));
  w.put<std::uint16_t>(kDataVersion);
  const std::string spec = spec_to_json(data.spec).dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.size()));
  w.put_string(spec);
  w.put_bytes(data.checksum());
  for (const auto* part : {&data.train, &data.dev, &data.test}) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(part->size()));
    for (const auto& s : *part) hash_sequence(w, s);
  }
  write_file_atomic(path, w.bytes());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes);
  if (std::memcmp(r.get_bytes(8).data(), kDataMagic, 8) != 0) throw FormatError("bad dataset magic");
  if (r.get<std::uint16_t>() != kDataVersion) throw FormatError("unsupported dataset version");
  const auto spec_len = r.get<std::uint32_t>();
  Dataset data;
  try {
    data.spec = spec_from_json(json::parse(r.get_string(spec_len)));
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset spec header: ") + e.what());
  }
  Sha256 stored{};
  auto h = r.get_bytes(32);
  std::copy(h.begin(), h.end(), stored.begin());
  for (auto* part : {&data.train, &data.dev, &data.test}) {
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto rows = r.get<std::uint32_t>();
      const auto cols = r.get<std::uint32_t>();
      std::vector<double> values(std::size_t{rows} * cols);
      for (auto& v : values) v = r.get<double>();
      Sequence s{Tensor({rows, cols}, std::move(values)), std::vector<int>(rows), {}};
      for (auto& l : s.frame_labels) l = r.get<std::int32_t>();
      s.target.resize(r.get<std::uint32_t>());
      for (auto& l : s.target) l = r.get<std::int32_t>();
      part->push_back(std::move(s));
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes in dataset file");
  if (data.checksum() != stored) throw FormatError("dataset checksum mismatch");
  return data;
}

}  // namespace parp::tasks
