#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gem/corpus.hpp"
#include "gem/generation.hpp"
#include "gem/rng.hpp"
#include "gem/tokenizer.hpp"

namespace gem {

struct PairSelection {
  const Article* wiki_a = nullptr;
  const Article* wiki_b = nullptr;
  std::size_t candidate_set_size = 0;  // B-set size after filtering
  std::uint64_t seed = 0;
};

enum class MixingStrategy {
  a_head_b_lead_a_tail,  // leading A sentences, B's first sentence, one trailing A sentence
  b_lead_then_a,         // B's first sentence, then A sentences
};

struct PipelineConfig {
  std::size_t min_len = 30;
  std::size_t max_len = 200;
  double similarity_threshold = 0.35;
  std::size_t context_token_budget = 160;
  MixingStrategy mixing = MixingStrategy::a_head_b_lead_a_tail;
  double select_frac_min = 0.20;
  double select_frac_max = 0.60;
  std::size_t pair_retries = 100;
  std::size_t attempts_per_claim = 50;
  GenerationParams generation;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  void validate() const;
};

struct SentenceRef {
  std::string title;
  std::size_t index = 0;
  bool operator==(const SentenceRef&) const = default;
};

struct ComposedInput {
  std::vector<SentenceRef> context_refs;
  std::string context_text;  // sentences joined, followed by the wiki-A title
  std::string title;
  std::vector<std::string> target_words;
  TokenSeq context;
  TokenSeq target;
};

enum class FilterRule {
  no_final_dot,
  length_bounds,
  endoftext,
  too_similar,
  ungrounded_number_date,
  oov_word,
};

inline constexpr std::array kFilterRules = {
    FilterRule::no_final_dot,    FilterRule::length_bounds,          FilterRule::endoftext,
    FilterRule::too_similar,     FilterRule::ungrounded_number_date, FilterRule::oov_word,
};

const char* rule_name(FilterRule rule);

struct FilterVerdict {
  FilterRule rule;
  bool passed = false;
  std::string detail;
};

using Verdicts = std::array<FilterVerdict, 6>;

bool accepted(const Verdicts& v);

struct ClaimCandidate {
  std::string text;
  std::string wiki_a;
  std::string wiki_b;
  std::vector<SentenceRef> context_refs;
  std::vector<std::string> target_words;
  std::uint64_t seed = 0;
  std::size_t attempt = 0;
  Verdicts verdicts{};
};

/// wiki-A uniformly over the store; B-set from links in A's first five
/// sentences minus titles sharing a word with A's title and minus links whose
/// anchor equals the title; wiki-B uniformly over survivors with at least two
/// sentences. Resamples wiki-A up to cfg.pair_retries times.
PairSelection select_pair(const ArticleStore& store, Rng& rng, const PipelineConfig& cfg = {});

/// Candidate B titles for one wiki-A after both removal rules, sorted.
std::vector<std::string> candidate_set(const ArticleStore& store, const Article& wiki_a);

ComposedInput compose_input(const PairSelection& pair, const PipelineConfig& cfg,
                            const BpeVocab& vocab, Rng& rng);

Verdicts filter_claim(const ClaimCandidate& candidate, const ArticleStore& store,
                      const Vocabulary& vocab, const PipelineConfig& cfg);

/// Produces raw generated text for a composed input.
class ClaimGenerator {
 public:
  virtual ~ClaimGenerator() = default;
  virtual TokenSeq generate(const TokenSeq& context, const TokenSeq& target,
                            const GenerationParams& params) const = 0;
};

class GemClaimGenerator final : public ClaimGenerator {
 public:
  explicit GemClaimGenerator(const GemModel& model) : model_(model) {}
  TokenSeq generate(const TokenSeq& context, const TokenSeq& target,
                    const GenerationParams& params) const override;

 private:
  const GemModel& model_;
};

struct StatPoint {
  std::size_t target_count = 0;
  std::size_t sentence_word_len = 0;
};

struct PipelineResult {
  std::vector<ClaimCandidate> accepted;
  std::vector<ClaimCandidate> generated;  // every generated claim, in attempt order
  std::map<std::string, std::size_t> rejections;  // first failing rule -> count
  std::vector<StatPoint> stats;
  std::size_t attempts = 0;
  std::size_t skipped_attempts = 0;  // composition failed, nothing generated
  bool exhausted = false;            // attempt budget ran out before n_claims
};

/// Runs select_pair -> compose_input -> generate -> first_sentence ->
/// filter_claim per attempt. Attempt i uses seed mix_seed(cfg.seed, i), and
/// results are merged in attempt order, so cfg.jobs does not change output.
PipelineResult run_pipeline(const ArticleStore& store, const ClaimGenerator& generator,
                            const BpeVocab& bpe, const Vocabulary& vocab, std::size_t n_claims,
                            const PipelineConfig& cfg);

void write_claims_jsonl(std::ostream& out, const std::vector<ClaimCandidate>& claims);
void write_stats_csv(std::ostream& out, const std::vector<StatPoint>& stats);
std::vector<StatPoint> read_stats_csv(std::istream& in);

struct ClaimStats {
  std::map<std::size_t, std::size_t> histogram;   // target count -> claims
  std::map<std::size_t, double> mean_length;      // target count -> mean word length
  double spearman = 0.0;                          // NaN when either side is constant
};

ClaimStats claim_stats(const std::vector<StatPoint>& points);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace gem
