#include "parp/autonet/model.hpp"

#include <algorithm>
#include <cmath>

#include "parp/error.hpp"

namespace parp::autonet {
namespace {

constexpr std::string_view kHeadPrefix = "head.";

Tensor random_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Tensor t({rows, cols});
  const double sd = scale / std::sqrt(static_cast<double>(rows));
  for (auto& v : t.data()) v = sd * rng.normal();
  return t;
}

std::string norm_gain_name(std::size_t block) {
  return "enc." + std::to_string(block) + ".norm.gain";
}
std::string norm_bias_name(std::size_t block) {
  return "enc." + std::to_string(block) + ".norm.bias";
}

}  // namespace

std::string block_weight_name(std::size_t block) { return "enc." + std::to_string(block) + ".weight"; }
std::string block_bias_name(std::size_t block) { return "enc." + std::to_string(block) + ".bias"; }
std::string head_weight_name(std::string_view head) {
  return std::string(kHeadPrefix) + std::string(head) + ".weight";
}
std::string head_bias_name(std::string_view head) {
  return std::string(kHeadPrefix) + std::string(head) + ".bias";
}

EncoderModel make_encoder(const EncoderConfig& config, Rng rng) {
  if (config.input_dim == 0 || config.hidden_dim == 0 || config.blocks == 0)
    throw ConfigError("encoder dims and block count must be positive");
  EncoderModel model{config, {}};
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::size_t in = b == 0 ? config.stacked_dim() : config.hidden_dim;
    Rng site = rng.split("block").split(b);
    model.store.add(block_weight_name(b),
                    random_matrix(in, config.hidden_dim, config.init_scale, site), true);
    Tensor bias({config.hidden_dim});
    for (auto& v : bias.data()) v = 0.01 * site.normal();
    model.store.add(block_bias_name(b), std::move(bias), config.prune_biases);
    if (config.layer_norm) {
      model.store.add(norm_gain_name(b), Tensor({config.hidden_dim}, 1.0), false);
      model.store.add(norm_bias_name(b), Tensor({config.hidden_dim}, 0.0), false);
    }
  }
  return model;
}

void attach_head(EncoderModel& model, std::string_view name, std::size_t out_dim, Rng rng) {
  if (out_dim == 0) throw ConfigError("head width must be positive");
  detach_head(model, name);
  model.store.add(head_weight_name(name),
                  random_matrix(model.config.hidden_dim, out_dim, 1.0, rng), false);
  model.store.add(head_bias_name(name), Tensor({out_dim}), false);
}

void detach_head(EncoderModel& model, std::string_view name) {
  if (model.store.find(head_weight_name(name))) model.store.remove(head_weight_name(name));
  if (model.store.find(head_bias_name(name))) model.store.remove(head_bias_name(name));
}

bool has_head(const EncoderModel& model, std::string_view name) {
  return model.store.find(head_weight_name(name)) != nullptr;
}

std::vector<std::string> head_names(const EncoderModel& model) {
  std::vector<std::string> out;
  constexpr std::string_view suffix = ".weight";
  for (const auto& p : model.store.params()) {
    if (p.name.starts_with(kHeadPrefix) && p.name.ends_with(suffix))
      out.push_back(p.name.substr(kHeadPrefix.size(),
                                  p.name.size() - kHeadPrefix.size() - suffix.size()));
  }
  return out;
}

Tensor stack_context(const Tensor& frames, std::size_t context) {
  const std::size_t rows = frames.rows(), dim = frames.cols();
  const std::size_t width = dim * (2 * context + 1);
  Tensor out({rows, width});
  for (std::size_t t = 0; t < rows; ++t) {
    auto dst = out.row(t);
    for (std::size_t w = 0; w < 2 * context + 1; ++w) {
      const auto src_t = static_cast<std::int64_t>(t) + static_cast<std::int64_t>(w) -
                         static_cast<std::int64_t>(context);
      if (src_t < 0 || src_t >= static_cast<std::int64_t>(rows)) continue;
      auto src = frames.row(static_cast<std::size_t>(src_t));
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(w * dim));
    }
  }
  return out;
}

Var encode(Tape& tape, EncoderModel& model, const Tensor& stacked) {
  return encode(tape, model.config, model.store, stacked);
}

Var encode(Tape& tape, const EncoderConfig& cfg, ParamStore& store, const Tensor& stacked) {
  if (stacked.cols() != cfg.stacked_dim())
    throw ConfigError("input width " + std::to_string(stacked.cols()) + " does not match model " +
                      std::to_string(cfg.stacked_dim()));
  Var h = tape.constant(stacked);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    h = affine(tape, h, tape.param(store.get(block_weight_name(b))),
               tape.param(store.get(block_bias_name(b))));
    h = activate(tape, h, cfg.nonlinearity);
    if (cfg.layer_norm)
      h = layer_norm(tape, h, tape.param(store.get(norm_gain_name(b))),
                     tape.param(store.get(norm_bias_name(b))));
  }
  return h;
}

Var apply_head(Tape& tape, ParamStore& store, std::string_view head, Var hidden) {
  return affine(tape, hidden, tape.param(store.get(head_weight_name(head))),
                tape.param(store.get(head_bias_name(head))));
}

Var apply_head(Tape& tape, EncoderModel& model, std::string_view head, Var hidden) {
  return apply_head(tape, model.store, head, hidden);
}

Tensor forward(EncoderModel& model, const Tensor& frames, std::string_view head) {
  if (frames.cols() != model.config.input_dim)
    throw ConfigError("frame width " + std::to_string(frames.cols()) + " does not match model " +
                      std::to_string(model.config.input_dim));
  Tape tape;
  Var out = apply_head(tape, model, head, encode(tape, model, stack_context(frames, model.config.context)));
  return tape.value(out);
}

}  // namespace parp::autonet
