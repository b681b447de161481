#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "parp/autonet/ops.hpp"
#include "parp/autonet/param_store.hpp"
#include "parp/rng.hpp"

namespace parp::autonet {

struct EncoderConfig {
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 48;
  std::size_t blocks = 2;
  /// Frames of context stacked on each side before the first block.
  std::size_t context = 1;
  Nonlinearity nonlinearity = Nonlinearity::gelu;
  bool layer_norm = true;
  bool prune_biases = true;
  double init_scale = 1.0;

  std::size_t stacked_dim() const { return input_dim * (2 * context + 1); }
};

/// Stack of (affine, nonlinearity, layer norm) blocks over context-stacked
/// frames, plus any number of named affine heads. Block affine params are
/// prunable; norm params and heads never are.
struct EncoderModel {
  EncoderConfig config;
  ParamStore store;
};

EncoderModel make_encoder(const EncoderConfig& config, Rng rng);

/// Adds (or replaces) head `name` with output width `out_dim`.
void attach_head(EncoderModel& model, std::string_view name, std::size_t out_dim, Rng rng);
void detach_head(EncoderModel& model, std::string_view name);
bool has_head(const EncoderModel& model, std::string_view name);
std::vector<std::string> head_names(const EncoderModel& model);

std::string block_weight_name(std::size_t block);
std::string block_bias_name(std::size_t block);
std::string head_weight_name(std::string_view head);
std::string head_bias_name(std::string_view head);

/// [T x F] frames -> [T x (2c+1)F], zero padded at the sequence edges.
Tensor stack_context(const Tensor& frames, std::size_t context);

/// Encoder output [rows x H] for already context-stacked input.
Var encode(Tape& tape, const EncoderConfig& config, ParamStore& store, const Tensor& stacked);
Var encode(Tape& tape, EncoderModel& model, const Tensor& stacked);
Var apply_head(Tape& tape, ParamStore& store, std::string_view head, Var hidden);
Var apply_head(Tape& tape, EncoderModel& model, std::string_view head, Var hidden);

/// Per-frame head output for one [T x F] sequence, off-tape.
Tensor forward(EncoderModel& model, const Tensor& frames, std::string_view head);

}  // namespace parp::autonet
