#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gem/tensor_ops.hpp"
#include "gem/tokenizer.hpp"

namespace gem {

using Scalar = double;
using Matrix = MatrixR<Scalar>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  Eigen::Index size() const noexcept { return value.size(); }
  void zero_grad() { grad.setZero(); }

  /// Adds to the gradient unless the parameter is frozen.
  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (trainable) grad += g;
  }
};

struct ModelConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int vocab_size = 512;
  int max_positions = 256;
  double init_std = 0.02;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Pre-norm transformer block: attention and GELU feed-forward sublayers.
struct Block {
  Parameter ln1_g, ln1_b;
  Parameter w_qkv, b_qkv;
  Parameter w_o, b_o;
  Parameter ln2_g, ln2_b;
  Parameter w_fc, b_fc;
  Parameter w_proj, b_proj;

  Block() = default;
  Block(const std::string& prefix, const ModelConfig& cfg);

  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

/// Autoregressive LM. The output head is tied to the token embeddings and
/// carries its own bias.
class BaseLm {
 public:
  ModelConfig config;
  Parameter wte;
  Parameter wpe;
  std::vector<Block> blocks;
  Parameter lnf_g, lnf_b;
  Parameter out_bias;

  BaseLm() = default;
  static BaseLm init(const ModelConfig& cfg, std::uint64_t seed);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

/// Base LM extended with a target-word encoder and a past embedding. The
/// shared stack encodes context and present; target_blocks encode target
/// tokens and expose their keys and values to the present rows.
class GemModel {
 public:
  BaseLm shared;
  std::vector<Block> target_blocks;
  Parameter target_wpe;
  Parameter past_embedding;

  const ModelConfig& config() const noexcept { return shared.config; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

/// One supervised sequence. The decoder sees start_token followed by
/// gold[0..n-1) as present tokens and is scored against gold.
struct Example {
  TokenSeq context;
  TokenSeq target;
  TokenSeq gold;
  TokenId start_token = BpeVocab::kEndOfText;
};

struct ParamCounts {
  std::int64_t base_params = 0;
  std::int64_t gem_params = 0;
  double ratio = 0.0;
};

/// Logits for every token, shape len x vocab_size.
Matrix forward_base(const BaseLm& model, const TokenSeq& tokens);

/// Logits for every present position, shape |present| x vocab_size.
Matrix forward_gem(const GemModel& model, const TokenSeq& context, const TokenSeq& target,
                   const TokenSeq& present);

GemModel extend_from_base(const BaseLm& base, std::uint64_t seed);

ParamCounts param_counts(const GemModel& model);
/// Same counts from shapes alone, without allocating the model.
ParamCounts param_counts(const ModelConfig& cfg);

/// Present-side input for an example: start token then gold minus its last token.
TokenSeq teacher_forced_present(const Example& ex);

/// Mean token cross-entropy over all gold positions in the batch. Gradients
/// are accumulated (not zeroed) into trainable parameters. The base LM reads
/// context followed by present and ignores the target.
double loss_and_backward(BaseLm& model, std::span<const Example> batch);
double loss_and_backward(GemModel& model, std::span<const Example> batch);

/// Teacher-forced logits at gold positions, without gradients.
Matrix example_logits(const BaseLm& model, const Example& ex);
Matrix example_logits(const GemModel& model, const Example& ex);

void zero_grad(std::span<Parameter* const> params);

}  // namespace gem
