#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gem/model.hpp"
#include "gem/pipeline.hpp"
#include "gem/training.hpp"

namespace gem::testing {

struct TensorGradError {
  std::string name;
  double rel_error = 0.0;  // ||analytic - numeric|| / (||analytic|| + ||numeric||)
  double numeric_norm = 0.0;
};

/// Central differences of the batch loss against the analytic gradient, for
/// every parameter tensor. Frozen tensors are unfrozen for the check.
std::vector<TensorGradError> gradient_check(GemModel& model, const std::vector<Example>& batch,
                                            double step = 1e-5);

/// Fills every parameter with N(0, std); gammas get 1 + N(0, std).
void randomize(GemModel& model, std::uint64_t seed, double std = 0.3);

/// 1-layer, d_model 8, vocab 32 model with a fixed random batch.
GemModel toy_gem(std::uint64_t seed);
std::vector<Example> toy_batch(std::uint64_t seed, int vocab = 32);

/// claim_id,correct,sys1 table with 10000 claims, 8481 correct, 6683 of
/// which fool the single system.
void write_potency_fixture(const std::filesystem::path& path);

/// Emits "The " + target words + " is in the city." regardless of context.
class EchoGenerator final : public ClaimGenerator {
 public:
  explicit EchoGenerator(const BpeVocab& vocab) : vocab_(vocab) {}
  TokenSeq generate(const TokenSeq& context, const TokenSeq& target,
                    const GenerationParams& params) const override;

 private:
  const BpeVocab& vocab_;
};

struct InclusionReport {
  std::size_t hits = 0;
  std::size_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total); }
};

/// Share of non-noise target words (case-insensitive) that appear in the
/// first generated sentence, under greedy decoding.
InclusionReport target_inclusion(const GemModel& model, const BpeVocab& vocab,
                                 const std::vector<TrainingSample>& samples, int max_tokens = 40);

}  // namespace gem::testing
