// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "checks.hpp"
#include "cli_runner.hpp"
#include "gem/eval.hpp"
#include "gem/generation.hpp"
#include "gem/pipeline.hpp"
#include "gem/text.hpp"
#include "gem/training.hpp"
#include "toy_corpus.hpp"

using namespace gem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

Outcome metric_reproduction() {
  Outcome o;
  const auto path = std::filesystem::temp_directory_path() / "gem_acceptance_metrics.csv";
  testing::write_potency_fixture(path);
  std::ifstream in(path);
  const auto m = attack_metrics(read_records_csv(in));
  o.require(std::abs(m.correct_rate - 0.8481) <= 1e-4, "correct rate 0.8481");
  o.require(std::abs(m.raw_potency - 0.7880) <= 1e-4, "raw potency 0.7880");
  o.require(std::abs(m.potency - 0.6683) <= 1e-4, "potency 0.6683");
  o.require(std::abs(0.8481 * 0.7880 - 0.6683) <= 1e-4, "potency equals rate product");
  const double bound = accuracy_bound(5, 1.0, 0.43);
  const double first = invert_bound(0.53, 0.43, 5).acc_first;
  o.require(std::abs(bound - 0.544) <= 1e-12, "accuracy_bound(5, 1.0, 0.43) = 0.544");
  o.require(std::abs(first - 0.93) <= 1e-12, "invert_bound(0.53, 0.43, 5) = 0.93");
  o.note(format_metrics(m) + ", bound " + fmt("%.4f", bound) + ", first " + fmt("%.4f", first));
  return o;
}

Outcome gradient_suite() {
  Outcome o;
  auto model = testing::toy_gem(101);
  const auto batch = testing::toy_batch(102);
  double worst = 0.0;
  std::size_t tensors = 0;
  for (const auto& e : testing::gradient_check(model, batch, 1e-5)) {
    ++tensors;
    worst = std::max(worst, e.rel_error);
    o.require(e.rel_error < 1e-4, e.name + " rel error " + fmt("%.3g", e.rel_error));
  }
  o.note(std::to_string(tensors) + " tensors, worst rel error " + fmt("%.3g", worst));
  return o;
}

Outcome architecture_invariants() {
  Outcome o;
  ModelConfig cfg;
  cfg.d_model = 32;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  cfg.d_ff = 64;
  cfg.vocab_size = 300;
  const auto base = BaseLm::init(cfg, 201);
  auto g = extend_from_base(base, 202);

  const TokenSeq present{{256, 17, 99, 4, 250, 31, 8}, SourceKind::present};
  const double equiv = (forward_gem(g, {}, {}, present) - forward_base(base, present)).cwiseAbs().maxCoeff();
  o.require(equiv <= 1e-9, "forward_gem(empty, empty, p) == forward_base(p)");

  testing::randomize(g, 203, 0.1);
  const TokenSeq ctx{{5, 6, 7, 8}, SourceKind::context};
  const TokenSeq tgt{{40, 41, 42}, SourceKind::target};
  bool exact = true;
  const Matrix full = forward_gem(g, ctx, tgt, present);
  for (std::size_t j = 1; j < present.size(); ++j) {
    TokenSeq changed = present;
    for (std::size_t k = j; k < changed.size(); ++k) changed.ids[k] = (changed.ids[k] + 1) % 300;
    const Matrix other = forward_gem(g, ctx, tgt, changed);
    exact = exact && full.topRows(static_cast<Eigen::Index>(j)) == other.topRows(static_cast<Eigen::Index>(j));
  }
  o.require(exact, "earlier present rows bit-identical when later tokens change");

  std::int64_t counted = 0, base_counted = 0;
  for (const auto* p : g.parameters()) counted += p->size();
  for (const auto* p : base.parameters()) base_counted += p->size();
  std::int64_t extra = g.target_wpe.size() + g.past_embedding.size();
  for (const auto& b : g.target_blocks) {
    std::vector<const Parameter*> ps;
    b.collect(ps);
    for (const auto* p : ps) extra += p->size();
  }
  const auto counts = param_counts(g);
  o.require(counts.base_params == base_counted && counts.gem_params == counted &&
                counts.gem_params == counts.base_params + extra,
            "parameter counts add up exactly");

  auto trained = extend_from_base(base, 204);
  const Matrix wte = trained.shared.wte.value;
  std::vector<Example> examples;
  for (int i = 0; i < 4; ++i) {
    examples.push_back({TokenSeq{{static_cast<TokenId>(3 + i), 9}, SourceKind::context},
                        TokenSeq{{static_cast<TokenId>(20 + i)}, SourceKind::target},
                        TokenSeq{{static_cast<TokenId>(50 + i), 60, 61}, SourceKind::present}});
  }
  TrainConfig tc;
  tc.batch_size = 4;
  tc.learning_rate = 1e-2;
  tc.epochs = 10;
  const auto history = train(trained, examples, {}, tc);
  o.require(history.size() == 10, "ten optimizer steps");
  o.require(trained.shared.wte.value == wte, "frozen token embeddings bit-stable");
  o.require(!(trained.past_embedding.value.isZero(0.0)), "past embedding trained");
  o.note("equivalence error " + fmt("%.2g", equiv) + ", gem params " + std::to_string(counts.gem_params));
  return o;
}

Outcome size_ratio() {
  Outcome o;
  ModelConfig cfg;
  cfg.d_model = 768;
  cfg.n_layers = 12;
  cfg.n_heads = 12;
  cfg.d_ff = 3072;
  cfg.vocab_size = 50257;
  cfg.max_positions = 1024;
  const auto c = param_counts(cfg);
  o.require(c.ratio >= 1.6 && c.ratio <= 2.0, "ratio within [1.6, 2.0]");
  o.note("base " + std::to_string(c.base_params) + ", gem " + std::to_string(c.gem_params) + ", ratio " +
         fmt("%.4f", c.ratio));
  return o;
}

Outcome controlled_generation() {
  Outcome o;
  const auto start = Clock::now();
  const auto store = testing::toy_corpus(2000, 7);
  const auto bpe = train_bpe(store, 512);

  ModelConfig mcfg;
  mcfg.d_model = 64;
  mcfg.n_layers = 2;
  mcfg.n_heads = 4;
  mcfg.d_ff = 256;
  mcfg.vocab_size = static_cast<int>(bpe.size());
  auto base = BaseLm::init(mcfg, 501);
  TrainConfig pre;
  pre.learning_rate = 3e-3;
  pre.epochs = 12;
  pre.seed = 502;
  train(base, build_lm_examples(store, bpe), {}, pre);

  SampleBuilderConfig scfg;
  scfg.seed = 503;
  const auto samples = build_dataset(store, bpe, scfg);
  const auto [train_set, validation] = split_dataset(samples);

  TrainConfig fine = pre;
  fine.epochs = 12;
  fine.seed = 504;
  auto gem_model = extend_from_base(base, 505);
  const auto gem_history = train(gem_model, train_set, validation, fine);
  const double train_seconds = seconds_since(start);

  auto base_tuned = base;
  const auto base_history = train(base_tuned, train_set, validation, fine);

  std::vector<TrainingSample> held_out;
  for (const auto& s : samples) {
    if (is_validation(s.provenance)) held_out.push_back(s);
  }
  const auto inclusion = testing::target_inclusion(gem_model, bpe, held_out);
  const double gem_acc = *gem_history.back().val_token_accuracy;
  const double base_acc = *base_history.back().val_token_accuracy;

  o.require(inclusion.rate() >= 0.80, "target-word inclusion >= 0.80");
  o.require(gem_acc > base_acc, "GEM validation accuracy above the base LM");
  o.require(train_seconds <= 1800.0, "GEM training within 30 minutes");
  o.note("inclusion " + fmt("%.4f", inclusion.rate()) + " (" + std::to_string(inclusion.hits) + "/" +
         std::to_string(inclusion.total) + "), val acc gem " + fmt("%.4f", gem_acc) + " vs base " +
         fmt("%.4f", base_acc) + ", gem training " + fmt("%.0f", train_seconds) + " s");
  return o;
}

Outcome sample_statistics() {
  Outcome o;
  const auto store = testing::toy_corpus(2000, 601);
  const auto bpe = train_bpe(store, 400);
  // A long article makes the 256-token cap bind.
  ArticleStore with_long = store;
  Article long_article;
  long_article.title = "Longform";
  std::string filler;
  for (int i = 0; i < 70; ++i) filler += std::string(i % 2 ? " river" : " harbour") + std::to_string(i);
  for (std::size_t i = 0; i < 6; ++i) long_article.sentences.push_back({i, "Part" + filler + " ends.", {}});
  with_long.add(long_article);

  std::vector<std::pair<const Article*, std::size_t>> slots;
  for (const auto& [_, a] : with_long) {
    for (std::size_t i = 1; i < a.sentences.size(); ++i) slots.emplace_back(&a, i);
  }
  SampleBuilderConfig cfg;
  SampleBuilderConfig unbounded = cfg;
  unbounded.max_sample_tokens = 1 << 20;
  std::size_t bad_fraction = 0, bad_noise = 0, noise_in_target = 0, too_long = 0, capped = 0;
  std::size_t refused = 0, wrongly_refused = 0;
  for (std::uint64_t n = 0; n < 10000; ++n) {
    Rng rng(mix_seed(602, n));
    const auto& [article, idx] = slots[uniform_index(rng, 0, slots.size() - 1)];
    const Rng before = rng;
    TrainingSample s;
    try {
      s = build_sample(*article, idx, cfg, bpe, rng);
    } catch (const std::invalid_argument&) {
      ++refused;
      Rng replay = before;
      if (build_sample(*article, idx, unbounded, bpe, replay).target.size() < 256) ++wrongly_refused;
      continue;
    }
    const auto words = sentence_words(article->sentences[idx].text);
    const auto [lo, hi] = selection_bounds(words.size(), 0.2, 0.6);
    if (s.selected_count() < lo || s.selected_count() > hi) ++bad_fraction;
    if (s.noise_count() > static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(words.size())))) ++bad_noise;
    std::set<std::string> lowered;
    for (const auto& w : words) lowered.insert(to_lower_ascii(w));
    for (std::size_t i = 0; i < s.target_words.size(); ++i) {
      if (s.is_noise[i] && lowered.contains(to_lower_ascii(s.target_words[i]))) ++noise_in_target;
    }
    if (s.total_tokens() > 256) ++too_long;
    if (s.total_tokens() == 256) ++capped;
  }
  o.require(bad_fraction == 0, std::to_string(bad_fraction) + " samples outside selection bounds");
  o.require(bad_noise == 0, std::to_string(bad_noise) + " samples with too much noise");
  o.require(noise_in_target == 0, std::to_string(noise_in_target) + " noise words from the target sentence");
  o.require(too_long == 0, std::to_string(too_long) + " samples over 256 tokens");
  o.require(wrongly_refused == 0, std::to_string(wrongly_refused) + " refusals whose target words fit");
  o.require(capped > 0, "the token cap never bound");
  o.note("10000 draws, " + std::to_string(refused) + " refused as unfittable, " + std::to_string(capped) +
         " at the 256-token cap");
  return o;
}

Outcome filter_suite() {
  Outcome o;
  ArticleStore store;
  store.add({"Joseph Cao",
             {{0, "Anh Quang Cao is an American politician born March 13, 1967 in Saigon.", {}},
              {1, "He is a member of the Republican Party.", {{"Republican Party", "Republican Party (United States)"}}}}});
  store.add({"Republican Party (United States)",
             {{0, "The Republican Party is a major party.", {}}, {1, "It was founded in 1854.", {}}}});
  const auto vocab = build_vocabulary(store);
  const PipelineConfig cfg;
  auto verdict = [&](const std::string& text, FilterRule rule) {
    ClaimCandidate c;
    c.text = text;
    c.wiki_a = "Joseph Cao";
    c.wiki_b = "Republican Party (United States)";
    for (const auto& v : filter_claim(c, store, vocab, cfg)) {
      if (v.rule == rule) return v.passed;
    }
    return false;
  };
  auto padded = [](std::size_t n) {
    std::string s = "He is a member";
    std::size_t rest = n - 1 - s.size();
    if (rest % 2 == 1) {
      s += " is";
      rest -= 3;
    }
    for (; rest > 0; rest -= 2) s += " a";
    return s + ".";
  };
  o.require(!verdict(padded(29), FilterRule::length_bounds), "29 characters rejected");
  o.require(verdict(padded(30), FilterRule::length_bounds), "30 characters accepted");
  o.require(verdict(padded(200), FilterRule::length_bounds), "200 characters accepted");
  o.require(!verdict(padded(201), FilterRule::length_bounds), "201 characters rejected");
  o.require(!verdict("He is a member of the Republican Party", FilterRule::no_final_dot), "missing dot rejected");
  o.require(!verdict(store.at("Joseph Cao").sentences[0].text, FilterRule::too_similar), "distance 0 rejected");
  o.require(!verdict("Cao was born in 1799 as a member of the party.", FilterRule::ungrounded_number_date),
            "ungrounded number rejected");
  o.require(verdict("Cao was born in 1967 as a member of the party.", FilterRule::ungrounded_number_date),
            "grounded number accepted");
  o.require(!verdict("Cao is a member of the Zorblax Party.", FilterRule::oov_word), "OOV word rejected");
  o.require(!verdict("He is a member of the party.<|endoftext|>", FilterRule::endoftext), "end-of-text rejected");

  o.require(levenshtein("kitten", "sitting") == 3, "levenshtein(kitten, sitting) = 3");
  Rng rng(701);
  std::size_t violations = 0;
  auto word = [&] {
    std::string s;
    for (std::size_t i = 0, n = uniform_index(rng, 0, 12); i < n; ++i) {
      s.push_back(static_cast<char>('a' + uniform_index(rng, 0, 3)));
    }
    return s;
  };
  for (int t = 0; t < 1000; ++t) {
    const std::string a = word(), b = word(), c = word();
    const auto ab = levenshtein(a, b), ba = levenshtein(b, a), bc = levenshtein(b, c), ac = levenshtein(a, c);
    if (levenshtein(a, a) != 0 || ab != ba || ac > ab + bc || ((ab == 0) != (a == b))) ++violations;
  }
  o.require(violations == 0, std::to_string(violations) + " metric-axiom violations");
  o.note("1000 random triples checked");
  return o;
}

Outcome length_trend() {
  Outcome o;
  const auto hand = claim_stats({{2, 5}, {2, 7}, {4, 10}});
  o.require(hand.histogram == std::map<std::size_t, std::size_t>{{2, 2}, {4, 1}}, "hand histogram");
  o.require(hand.mean_length.at(2) == 6.0 && hand.mean_length.at(4) == 10.0, "hand means");

  const auto store = testing::toy_corpus(2000, 801);
  const auto bpe = train_bpe(store, 400);
  testing::EchoGenerator echo(bpe);
  PipelineConfig cfg;
  cfg.seed = 802;
  const auto r = run_pipeline(store, echo, bpe, build_vocabulary(store), 200, cfg);
  const auto s = claim_stats(r.stats);
  o.require(!std::isnan(s.spearman) && s.spearman > 0.9, "Spearman above 0.9");
  std::string hist;
  for (const auto& [k, n] : s.histogram) hist += (hist.empty() ? "" : " ") + std::to_string(k) + ":" + std::to_string(n);
  o.note("spearman " + fmt("%.4f", s.spearman) + " over " + std::to_string(r.stats.size()) + " claims, histogram " + hist);
  return o;
}

Outcome end_to_end_determinism() {
  Outcome o;
  const auto start = Clock::now();
  auto walkthrough = [&](const std::string& name) {
    const auto dir = testing::scratch_dir(name);
    auto q = [&](const char* file) { return "'" + (dir / file).string() + "'"; };
    {
      std::ofstream out(dir / "raw.jsonl");
      write_corpus(out, testing::toy_corpus(400, 901));
    }
    const std::string model_flags = " --d-model 64 --layers 2 --heads 4 --d-ff 256";
    const std::vector<std::string> steps = {
        "ingest --corpus " + q("raw.jsonl") + " --out " + q("corpus.jsonl") + " --vocab " + q("vocab.txt"),
        "train-bpe --corpus " + q("corpus.jsonl") + " --vocab-size 400 --out " + q("bpe.txt"),
        "pretrain --corpus " + q("corpus.jsonl") + " --bpe " + q("bpe.txt") + model_flags +
            " --epochs 8 --lr 3e-3 --out " + q("base.ckpt"),
        "extend --model " + q("base.ckpt") + " --out " + q("gem.ckpt"),
        "finetune --corpus " + q("corpus.jsonl") + " --bpe " + q("bpe.txt") + " --model " + q("gem.ckpt") +
            " --epochs 6 --lr 3e-3 --out " + q("tuned.ckpt"),
        "pipeline --corpus " + q("corpus.jsonl") + " --bpe " + q("bpe.txt") + " --model " + q("tuned.ckpt") +
            " --vocab " + q("vocab.txt") + " --n-claims 3 --max-tokens 40 --jobs 2 --out " + q("claims.jsonl") +
            " --stats " + q("stats.csv"),
    };
    std::string codes;
    for (const auto& step : steps) {
      const auto r = testing::run_gem(step + " --seed 5", dir);
      codes += std::to_string(r.exit_code);
      if (r.exit_code != 0) o.note(name + ": '" + step.substr(0, step.find(' ')) + "' exited " +
                                   std::to_string(r.exit_code) + ": " + r.err.substr(0, 200));
    }
    return std::make_tuple(codes, testing::read_file(dir / "claims.jsonl"), testing::read_file(dir / "stats.csv"),
                           testing::read_file(dir / "tuned.ckpt"));
  };
  const auto [codes_a, claims_a, stats_a, ckpt_a] = walkthrough("walk_a");
  const auto [codes_b, claims_b, stats_b, ckpt_b] = walkthrough("walk_b");
  o.require(codes_a == "000000" && codes_b == "000000", "every step exits 0");
  o.require(!claims_a.empty() && claims_a == claims_b, "claims files byte-identical");
  o.require(stats_a.size() > 32 && stats_a == stats_b, "stats files byte-identical");
  o.require(!ckpt_a.empty() && ckpt_a == ckpt_b, "checkpoints byte-identical");
  const double elapsed = seconds_since(start);
  o.require(elapsed <= 2700.0, "within 45 minutes");
  o.note(std::to_string(std::count(claims_a.begin(), claims_a.end(), '\n')) + " claims, " +
         fmt("%.0f", elapsed) + " s for both runs");
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "metric reproduction", metric_reproduction},
      {2, "gradient suite", gradient_suite},
      {3, "architecture invariants", architecture_invariants},
      {4, "size-ratio consistency", size_ratio},
      {5, "controlled-generation efficacy", controlled_generation},
      {6, "sample-builder statistics", sample_statistics},
      {7, "filter-chain unit suite", filter_suite},
      {8, "length-trend reproduction", length_trend},
      {9, "end-to-end determinism", end_to_end_determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, seconds_since(start),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
