#include "gem/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gem/text.hpp"
#include "gem/training.hpp"

namespace gem {

namespace {

constexpr std::size_t kLinkSentences = 5;

bool has_second_sentence(const Article& a) {
  return a.sentences.size() >= 2 && !sentence_words(a.sentences[1].text).empty();
}

bool links_to(const Sentence& s, std::string_view title) {
  return std::any_of(s.links.begin(), s.links.end(),
                     [&](const Link& l) { return l.target_title == title; });
}

std::string join_texts(const std::vector<const Sentence*>& sentences) {
  std::string out;
  for (const Sentence* s : sentences) {
    if (!out.empty()) out += ' ';
    out += s->text;
  }
  return out;
}

std::string context_text_for(const std::vector<const Sentence*>& sentences,
                             const std::string& title) {
  std::string text = join_texts(sentences);
  if (!text.empty()) text += ' ';
  return text + title;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

struct AttemptOutcome {
  bool skipped = false;
  ClaimCandidate candidate;
  StatPoint stat;
};

AttemptOutcome run_attempt(const ArticleStore& store, const ClaimGenerator& generator,
                           const BpeVocab& bpe, const Vocabulary& vocab,
                           const PipelineConfig& cfg, std::size_t attempt) {
  AttemptOutcome out;
  const std::uint64_t seed = mix_seed(cfg.seed, attempt);
  Rng rng(seed);
  const PairSelection pair = select_pair(store, rng, cfg);
  ComposedInput input;
  try {
    input = compose_input(pair, cfg, bpe, rng);
  } catch (const std::invalid_argument&) {
    out.skipped = true;
    return out;
  }
  GenerationParams params = cfg.generation;
  params.seed = rng();
  const TokenSeq generated = generator.generate(input.context, input.target, params);

  ClaimCandidate& c = out.candidate;
  c.text = first_sentence(decode(generated, bpe));
  c.wiki_a = pair.wiki_a->title;
  c.wiki_b = pair.wiki_b->title;
  c.context_refs = std::move(input.context_refs);
  c.target_words = std::move(input.target_words);
  c.seed = seed;
  c.attempt = attempt;
  c.verdicts = filter_claim(c, store, vocab, cfg);
  out.stat = {c.target_words.size(), sentence_words(c.text).size()};
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  if (min_len >= max_len) throw std::invalid_argument("min_len must be below max_len");
  if (!(similarity_threshold > 0.0 && similarity_threshold < 1.0)) {
    throw std::invalid_argument("similarity_threshold must lie in (0, 1)");
  }
  if (context_token_budget == 0) throw std::invalid_argument("context_token_budget must be positive");
  if (!(select_frac_min > 0.0 && select_frac_min <= select_frac_max && select_frac_max <= 1.0)) {
    throw std::invalid_argument("selection fractions must satisfy 0 < min <= max <= 1");
  }
  if (pair_retries == 0) throw std::invalid_argument("pair_retries must be positive");
  if (attempts_per_claim == 0) throw std::invalid_argument("attempts_per_claim must be positive");
  if (jobs == 0) throw std::invalid_argument("jobs must be positive");
  generation.validate();
}

const char* rule_name(FilterRule rule) {
  switch (rule) {
    case FilterRule::no_final_dot: return "no_final_dot";
    case FilterRule::length_bounds: return "length_bounds";
    case FilterRule::endoftext: return "endoftext";
    case FilterRule::too_similar: return "too_similar";
    case FilterRule::ungrounded_number_date: return "ungrounded_number_date";
    case FilterRule::oov_word: return "oov_word";
  }
  return "unknown";
}

bool accepted(const Verdicts& v) {
  return std::all_of(v.begin(), v.end(), [](const FilterVerdict& f) { return f.passed; });
}

std::vector<std::string> candidate_set(const ArticleStore& store, const Article& wiki_a) {
  const auto a_words = word_tokens(wiki_a.title);
  const std::set<std::string> a_title_words(a_words.begin(), a_words.end());

  std::set<std::string> linked, anchor_equal;
  const std::size_t n = std::min(kLinkSentences, wiki_a.sentences.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& link : wiki_a.sentences[i].links) {
      if (link.target_title == wiki_a.title || !store.contains(link.target_title)) continue;
      linked.insert(link.target_title);
      if (link.anchor == link.target_title) anchor_equal.insert(link.target_title);
    }
  }

  std::vector<std::string> out;
  for (const auto& title : linked) {
    if (anchor_equal.contains(title)) continue;
    const auto words = word_tokens(title);
    const bool shares = std::any_of(words.begin(), words.end(),
                                    [&](const std::string& w) { return a_title_words.contains(w); });
    if (!shares) out.push_back(title);
  }
  return out;
}

PairSelection select_pair(const ArticleStore& store, Rng& rng, const PipelineConfig& cfg) {
  if (store.empty()) throw std::invalid_argument("article store is empty");
  for (std::size_t attempt = 0; attempt < cfg.pair_retries; ++attempt) {
    const Article& a = store.nth(uniform_index(rng, 0, store.size() - 1));
    const auto candidates = candidate_set(store, a);
    std::vector<const Article*> usable;
    for (const auto& title : candidates) {
      const Article& b = store.at(title);
      if (has_second_sentence(b)) usable.push_back(&b);
    }
    if (usable.empty()) continue;
    PairSelection p;
    p.wiki_a = &a;
    p.wiki_b = usable[uniform_index(rng, 0, usable.size() - 1)];
    p.candidate_set_size = candidates.size();
    p.seed = rng();
    return p;
  }
  throw std::runtime_error("no valid wiki-A/wiki-B pair after " + std::to_string(cfg.pair_retries) +
                           " retries");
}

ComposedInput compose_input(const PairSelection& pair, const PipelineConfig& cfg,
                            const BpeVocab& vocab, Rng& rng) {
  if (pair.wiki_a == nullptr || pair.wiki_b == nullptr) throw std::invalid_argument("pair is unset");
  const Article& a = *pair.wiki_a;
  const Article& b = *pair.wiki_b;
  if (!has_second_sentence(b)) throw std::invalid_argument("wiki-B has no second sentence");

  std::vector<const Sentence*> eligible;
  for (const auto& s : a.sentences) {
    if (!links_to(s, b.title)) eligible.push_back(&s);
  }
  if (eligible.empty()) throw std::invalid_argument("every wiki-A sentence links to wiki-B");

  std::vector<const Sentence*> head, tail;
  if (eligible.size() >= 2) {
    head.assign(eligible.begin(), eligible.end() - 1);
    tail.push_back(eligible.back());
  } else {
    head = eligible;
  }
  const Sentence* b_lead = &b.sentences[0];

  auto layout = [&] {
    std::vector<const Sentence*> seq;
    if (cfg.mixing == MixingStrategy::a_head_b_lead_a_tail) {
      seq = head;
      seq.push_back(b_lead);
      seq.insert(seq.end(), tail.begin(), tail.end());
    } else {
      seq.push_back(b_lead);
      seq.insert(seq.end(), head.begin(), head.end());
      seq.insert(seq.end(), tail.begin(), tail.end());
    }
    return seq;
  };

  std::vector<const Sentence*> seq = layout();
  TokenSeq context = encode(context_text_for(seq, a.title), vocab, SourceKind::context);
  while (context.size() > cfg.context_token_budget) {
    if (!head.empty()) {
      head.pop_back();
    } else if (!tail.empty()) {
      tail.clear();
    } else {
      throw std::invalid_argument("context does not fit the token budget");
    }
    seq = layout();
    context = encode(context_text_for(seq, a.title), vocab, SourceKind::context);
  }
  if (head.empty() && tail.empty()) throw std::invalid_argument("no wiki-A sentence fits the budget");

  ComposedInput in;
  in.title = a.title;
  in.context_text = context_text_for(seq, a.title);
  for (const Sentence* s : seq) {
    const Article& owner = (s == b_lead) ? b : a;
    in.context_refs.push_back({owner.title, s->index});
  }
  in.context = std::move(context);

  const auto words = sentence_words(b.sentences[1].text);
  for (std::size_t pos : select_word_positions(words.size(), cfg.select_frac_min,
                                               cfg.select_frac_max, rng)) {
    in.target_words.push_back(words[pos]);
  }
  in.target = encode_target_words(in.target_words, vocab);
  return in;
}

Verdicts filter_claim(const ClaimCandidate& candidate, const ArticleStore& store,
                      const Vocabulary& vocab, const PipelineConfig& cfg) {
  const std::string& text = candidate.text;
  const Article& a = store.at(candidate.wiki_a);
  Verdicts v;

  v[0] = {FilterRule::no_final_dot, !text.empty() && text.back() == '.', ""};
  if (!v[0].passed) v[0].detail = "claim does not end with '.'";

  const bool len_ok = text.size() >= cfg.min_len && text.size() <= cfg.max_len;
  v[1] = {FilterRule::length_bounds, len_ok, len_ok ? "" : std::to_string(text.size()) + " chars"};

  const bool eot = text.find(BpeVocab::kEndOfTextMarker) != std::string::npos;
  v[2] = {FilterRule::endoftext, !eot, eot ? "contains end-of-text marker" : ""};

  const std::string& first = a.sentences.front().text;
  const std::size_t longest = std::max(text.size(), first.size());
  const double dist = longest == 0 ? 0.0
                                   : static_cast<double>(levenshtein(text, first)) /
                                         static_cast<double>(longest);
  v[3] = {FilterRule::too_similar, dist >= cfg.similarity_threshold, ""};
  if (!v[3].passed) {
    std::ostringstream d;
    d << "normalized distance " << dist;
    v[3].detail = d.str();
  }

  const auto grounded = extract_numbers_dates(a.text());
  std::string missing;
  for (const auto& item : extract_numbers_dates(text)) {
    if (grounded.contains(item)) continue;
    if (!missing.empty()) missing += ", ";
    missing += item;
  }
  v[4] = {FilterRule::ungrounded_number_date, missing.empty(), missing};

  std::string oov;
  for (const auto& w : word_tokens(text)) {
    if (vocab.contains(w)) continue;
    if (!oov.empty()) oov += ", ";
    oov += w;
  }
  v[5] = {FilterRule::oov_word, oov.empty(), oov};
  return v;
}

TokenSeq GemClaimGenerator::generate(const TokenSeq& context, const TokenSeq& target,
                                     const GenerationParams& params) const {
  const auto room = static_cast<long long>(model_.config().max_positions) -
                    static_cast<long long>(context.size() + target.size());
  if (room <= 0) throw std::length_error("context and target fill every position");
  GenerationParams p = params;
  p.max_tokens = static_cast<int>(std::min<long long>(p.max_tokens, room));
  return gem::generate(model_, context, target, p);
}

PipelineResult run_pipeline(const ArticleStore& store, const ClaimGenerator& generator,
                            const BpeVocab& bpe, const Vocabulary& vocab, std::size_t n_claims,
                            const PipelineConfig& cfg) {
  cfg.validate();
  PipelineResult result;
  if (n_claims == 0) return result;
  for (auto rule : kFilterRules) result.rejections[rule_name(rule)] = 0;

  const std::size_t budget = cfg.attempts_per_claim * n_claims;
  const std::size_t wave = cfg.jobs == 1 ? 1 : cfg.jobs * 2;
  std::size_t next = 0;
  while (result.accepted.size() < n_claims && next < budget) {
    const std::size_t count = std::min(wave, budget - next);
    std::vector<AttemptOutcome> outcomes(count);
    std::vector<std::exception_ptr> errors(count);
    auto work = [&](std::size_t i) {
      try {
        outcomes[i] = run_attempt(store, generator, bpe, vocab, cfg, next + i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    if (count == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      const std::size_t n_threads = std::min<std::size_t>(cfg.jobs, count);
      for (std::size_t t = 0; t < n_threads; ++t) {
        threads.emplace_back([&, t] {
          for (std::size_t i = t; i < count; i += n_threads) work(i);
        });
      }
      for (auto& th : threads) th.join();
    }

    for (std::size_t i = 0; i < count && result.accepted.size() < n_claims; ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);
      ++result.attempts;
      AttemptOutcome& o = outcomes[i];
      if (o.skipped) {
        ++result.skipped_attempts;
        continue;
      }
      result.stats.push_back(o.stat);
      const auto failed = std::find_if(o.candidate.verdicts.begin(), o.candidate.verdicts.end(),
                                       [](const FilterVerdict& f) { return !f.passed; });
      if (failed == o.candidate.verdicts.end()) {
        result.accepted.push_back(o.candidate);
      } else {
        ++result.rejections[rule_name(failed->rule)];
      }
      result.generated.push_back(std::move(o.candidate));
    }
    next += count;
  }
  result.exhausted = result.accepted.size() < n_claims;
  return result;
}

void write_claims_jsonl(std::ostream& out, const std::vector<ClaimCandidate>& claims) {
  for (const auto& c : claims) {
    nlohmann::ordered_json j;
    j["claim"] = c.text;
    j["wiki_a"] = c.wiki_a;
    j["wiki_b"] = c.wiki_b;
    j["target_words"] = c.target_words;
    auto refs = nlohmann::ordered_json::array();
    for (const auto& r : c.context_refs) refs.push_back({{"title", r.title}, {"sentence", r.index}});
    j["context_refs"] = std::move(refs);
    auto verdicts = nlohmann::ordered_json::array();
    for (const auto& v : c.verdicts) {
      verdicts.push_back({{"rule", rule_name(v.rule)}, {"passed", v.passed}, {"detail", v.detail}});
    }
    j["verdicts"] = std::move(verdicts);
    j["seed"] = c.seed;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

void write_stats_csv(std::ostream& out, const std::vector<StatPoint>& stats) {
  out << "target_count,sentence_word_len\n";
  for (const auto& s : stats) out << s.target_count << ',' << s.sentence_word_len << '\n';
}

std::vector<StatPoint> read_stats_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "target_count,sentence_word_len") {
    throw ParseError(1, "expected header target_count,sentence_word_len");
  }
  std::vector<StatPoint> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      std::size_t used_a = 0, used_b = 0;
      const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
      const auto x = std::stoull(a, &used_a);
      const auto y = std::stoull(b, &used_b);
      if (used_a != a.size() || used_b != b.size() || a.front() == '-' || b.front() == '-') {
        throw std::invalid_argument("trailing characters");
      }
      out.push_back({static_cast<std::size_t>(x), static_cast<std::size_t>(y)});
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "expected two non-negative integers");
    }
  }
  return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman inputs differ in length");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

ClaimStats claim_stats(const std::vector<StatPoint>& points) {
  if (points.empty()) throw std::invalid_argument("claim_stats needs at least one point");
  ClaimStats s;
  std::map<std::size_t, double> sums;
  std::vector<double> x, y;
  for (const auto& p : points) {
    ++s.histogram[p.target_count];
    sums[p.target_count] += static_cast<double>(p.sentence_word_len);
    x.push_back(static_cast<double>(p.target_count));
    y.push_back(static_cast<double>(p.sentence_word_len));
  }
  for (const auto& [k, total] : sums) s.mean_length[k] = total / static_cast<double>(s.histogram[k]);
  s.spearman = spearman(x, y);
  return s;
}

}  // namespace gem
