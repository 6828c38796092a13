#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gem/corpus.hpp"
#include "gem/model.hpp"
#include "gem/rng.hpp"
#include "gem/tokenizer.hpp"

namespace gem {

struct SampleBuilderConfig {
  double select_frac_min = 0.20;
  double select_frac_max = 0.60;
  double noise_frac_max = 0.10;
  std::size_t max_sample_tokens = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Provenance {
  std::string title;
  std::size_t sentence_index = 0;
};

struct TrainingSample {
  TokenSeq context;
  std::vector<std::string> target_words;
  std::vector<bool> is_noise;  // parallel to target_words
  TokenSeq target;
  TokenSeq gold;
  Provenance provenance;
  std::size_t context_first_sentence = 0;  // first sentence kept after truncation
  std::size_t sentence_word_count = 0;     // n, words in the target sentence

  std::size_t selected_count() const;
  std::size_t noise_count() const;
  std::size_t total_tokens() const { return context.size() + target.size() + gold.size(); }
  Example example() const { return Example{context, target, gold}; }
};

/// Inclusive bounds [max(1, ceil(lo*n)), max(1, floor(hi*n))] on how many
/// target words are drawn from an n-word sentence.
std::pair<std::size_t, std::size_t> selection_bounds(std::size_t n, double lo, double hi);

/// Picks between the selection bounds uniformly, then that many distinct word
/// positions uniformly. Returned positions are ascending.
std::vector<std::size_t> select_word_positions(std::size_t n, double lo, double hi, Rng& rng);

/// Encodes words as " w1 w2 ..." tokens.
TokenSeq encode_target_words(const std::vector<std::string>& words, const BpeVocab& vocab);

/// Throws std::invalid_argument when target_idx is 0, the target sentence
/// has fewer than two words, or the encoded target words fill the token budget.
TrainingSample build_sample(const Article& article, std::size_t target_idx,
                            const SampleBuilderConfig& cfg, const BpeVocab& vocab, Rng& rng);

/// Every eligible (article, sentence) pair, `per_sentence` times each, with
/// per-sample seeds derived from cfg.seed, the title and the index.
std::vector<TrainingSample> build_dataset(const ArticleStore& store, const BpeVocab& vocab,
                                          const SampleBuilderConfig& cfg,
                                          std::size_t per_sentence = 1);

/// Plain LM windows over each article's text, for pretraining the base LM.
/// Held-out articles are skipped unless include_held_out is set.
std::vector<Example> build_lm_examples(const ArticleStore& store, const BpeVocab& vocab,
                                       std::size_t max_tokens = 255, bool include_held_out = false);

/// Deterministic 95/5 split keyed on a hash of the article title, so every
/// sample of an article lands on the same side.
bool is_held_out(const std::string& title);
bool is_validation(const Provenance& p);
std::pair<std::vector<Example>, std::vector<Example>> split_dataset(
    const std::vector<TrainingSample>& samples);

std::vector<Example> to_examples(const std::vector<TrainingSample>& samples);

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 1e-5;
  std::size_t epochs = 6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetricRow {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // 1-based global optimizer step
  double loss = 0.0;
  std::optional<double> val_token_accuracy;  // set on the last step of an epoch
};

using MetricHistory = std::vector<MetricRow>;

double epoch_mean_loss(const MetricHistory& history, std::size_t epoch);
void write_metrics_csv(std::ostream& out, const MetricHistory& history);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, const TrainConfig& cfg);
  /// Applies one update from the accumulated gradients and zeroes them.
  void step();
  std::size_t steps() const noexcept { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Teacher-forced accuracy: argmax (lowest id on ties) against each gold token.
double token_accuracy(const BaseLm& model, std::span<const Example> examples);
double token_accuracy(const GemModel& model, std::span<const Example> examples);

using EpochCallback = std::function<void(std::size_t epoch)>;

/// Adam over shuffled batches. Validation accuracy is measured after each
/// epoch when `validation` is non-empty; `on_epoch` runs after that.
MetricHistory train(BaseLm& model, const std::vector<Example>& train_set,
                    const std::vector<Example>& validation, const TrainConfig& cfg,
                    const EpochCallback& on_epoch = {});
MetricHistory train(GemModel& model, const std::vector<Example>& train_set,
                    const std::vector<Example>& validation, const TrainConfig& cfg,
                    const EpochCallback& on_epoch = {});

}  // namespace gem
