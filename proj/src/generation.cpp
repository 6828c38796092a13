#include "gem/generation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "gem/corpus.hpp"

namespace gem {

void GenerationParams::validate() const {
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (top_k < 0) throw std::invalid_argument("top_k must be >= 0");
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
}

ColVector<Scalar> next_token_distribution(const Eigen::Ref<const RowVector<Scalar>>& logits,
                                          const GenerationParams& params) {
  params.validate();
  const Eigen::Index V = logits.size();
  ColVector<Scalar> probs = ColVector<Scalar>::Zero(V);
  if (params.temperature == 0.0) {
    probs(argmax_lowest(logits)) = 1.0;
    return probs;
  }

  std::vector<Eigen::Index> keep(static_cast<std::size_t>(V));
  std::iota(keep.begin(), keep.end(), Eigen::Index{0});
  if (params.top_k > 0 && params.top_k < V) {
    std::stable_sort(keep.begin(), keep.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return logits(a) > logits(b); });
    keep.resize(static_cast<std::size_t>(params.top_k));
  }
  Scalar max_scaled = -std::numeric_limits<Scalar>::infinity();
  for (auto i : keep) max_scaled = std::max(max_scaled, logits(i) / params.temperature);
  Scalar sum = 0;
  for (auto i : keep) {
    probs(i) = std::exp(logits(i) / params.temperature - max_scaled);
    sum += probs(i);
  }
  probs /= sum;
  return probs;
}

TokenId sample_next(const Eigen::Ref<const RowVector<Scalar>>& logits,
                    const GenerationParams& params, Rng& rng) {
  if (params.temperature == 0.0) {
    params.validate();
    return static_cast<TokenId>(argmax_lowest(logits));
  }
  const ColVector<Scalar> probs = next_token_distribution(logits, params);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  Eigen::Index last = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) <= 0.0) continue;
    acc += probs(i);
    last = i;
    if (u < acc) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last);  // rounding left u above the final sum
}

TokenSeq generate(const GemModel& model, const TokenSeq& context, const TokenSeq& target,
                  const GenerationParams& params) {
  params.validate();
  const auto needed = context.size() + target.size() + static_cast<std::size_t>(params.max_tokens);
  if (needed > static_cast<std::size_t>(model.config().max_positions)) {
    throw std::length_error("context + target + max_tokens exceeds max_positions");
  }
  Rng rng(params.seed);
  TokenSeq present;
  present.ids.push_back(BpeVocab::kEndOfText);
  TokenSeq out;
  while (out.size() < static_cast<std::size_t>(params.max_tokens)) {
    const Matrix logits = forward_gem(model, context, target, present);
    const TokenId next = sample_next(logits.row(logits.rows() - 1), params, rng);
    out.ids.push_back(next);
    if (next == BpeVocab::kEndOfText) break;
    present.ids.push_back(next);
  }
  return out;
}

std::string first_sentence(std::string_view text) {
  const auto sentences = split_sentences(text);
  return sentences.empty() ? std::string{} : sentences.front();
}

}  // namespace gem
