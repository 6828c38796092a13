#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "gem/model.hpp"
#include "gem/rng.hpp"

namespace gem {

struct GenerationParams {
  double temperature = 1.0;  // 0 selects the argmax
  int top_k = 40;            // 0 disables the top-k restriction
  int max_tokens = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sampling distribution over the vocabulary for the given logits: softmax at
/// the given temperature, restricted to the top_k largest logits. Temperature
/// 0 puts all mass on the argmax (lowest id on ties).
ColVector<Scalar> next_token_distribution(const Eigen::Ref<const RowVector<Scalar>>& logits,
                                          const GenerationParams& params);

TokenId sample_next(const Eigen::Ref<const RowVector<Scalar>>& logits,
                    const GenerationParams& params, Rng& rng);

/// Feeds each sampled token back as present input. Stops after max_tokens
/// tokens or right after emitting end-of-text.
TokenSeq generate(const GemModel& model, const TokenSeq& context, const TokenSeq& target,
                  const GenerationParams& params);

/// Text up to and including the first sentence terminator, with whitespace
/// normalized as the corpus splitter does.
std::string first_sentence(std::string_view text);

}  // namespace gem
