// Command-line driver: ingest -> train-bpe -> pretrain -> extend -> finetune
// -> generate / pipeline, plus eval and stats over result files.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gem/checkpoint.hpp"
#include "gem/corpus.hpp"
#include "gem/eval.hpp"
#include "gem/generation.hpp"
#include "gem/pipeline.hpp"
#include "gem/tokenizer.hpp"
#include "gem/training.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config-file keys and the flag each one feeds.
const std::map<std::string, std::string>& config_keys() {
  static const std::map<std::string, std::string> keys = {
      {"seed", "--seed"},
      {"corpus.path", "--corpus"},
      {"tokenizer.vocab_size", "--vocab-size"},
      {"tokenizer.path", "--bpe"},
      {"model.d_model", "--d-model"},
      {"model.n_layers", "--layers"},
      {"model.n_heads", "--heads"},
      {"model.d_ff", "--d-ff"},
      {"model.max_positions", "--max-positions"},
      {"training.batch_size", "--batch-size"},
      {"training.learning_rate", "--lr"},
      {"training.epochs", "--epochs"},
      {"training.select_frac_min", "--select-min"},
      {"training.select_frac_max", "--select-max"},
      {"training.noise_frac_max", "--noise-max"},
      {"training.samples_per_sentence", "--samples-per-sentence"},
      {"generation.temperature", "--temperature"},
      {"generation.top_k", "--top-k"},
      {"generation.max_tokens", "--max-tokens"},
      {"pipeline.n_claims", "--n-claims"},
      {"pipeline.min_len", "--min-len"},
      {"pipeline.max_len", "--max-len"},
      {"pipeline.similarity_threshold", "--similarity"},
      {"pipeline.context_token_budget", "--context-budget"},
      {"pipeline.attempts_per_claim", "--attempts-per-claim"},
      {"pipeline.jobs", "--jobs"},
      {"eval.mode", "--mode"},
  };
  return keys;
}

std::string json_scalar(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    std::ostringstream s;
    s.precision(17);
    s << v.get<double>();
    return s.str();
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  throw UsageError("config key '" + key + "' must hold a scalar");
}

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) throw UsageError(path + ":" + std::to_string(lineno) + ": expected an object");
    for (const auto& [key, value] : j.items()) {
      if (!config_keys().contains(key)) throw UsageError("unknown config key '" + key + "'");
      out[key] = json_scalar(value, key);
    }
  }
  return out;
}

bool flag_given(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.starts_with(flag + "=")) return true;
  }
  return false;
}

// Appends config values for flags the subcommand knows and argv lacks.
std::vector<std::string> merge_config(std::vector<std::string> args, CLI::App& app) {
  std::string config_path;
  CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].starts_with("--config=")) config_path = args[i].substr(9);
    if (sub == nullptr && !args[i].starts_with("-")) sub = app.get_subcommand_no_throw(args[i]);
  }
  if (config_path.empty() || sub == nullptr) return args;
  for (const auto& [key, value] : read_config(config_path)) {
    const std::string& flag = config_keys().at(key);
    if (sub->get_option_no_throw(flag) == nullptr || flag_given(args, flag)) continue;
    args.push_back(flag);
    args.push_back(value);
  }
  return args;
}

template <typename T>
void write_file(const std::string& path, const T& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  writer(out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

gem::Vocabulary read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return gem::Vocabulary::read(in);
}

void report_history(const gem::MetricHistory& history, std::size_t epochs) {
  for (std::size_t e = 1; e <= epochs; ++e) {
    std::fprintf(stderr, "epoch %zu loss %.4f", e, gem::epoch_mean_loss(history, e));
    for (const auto& row : history) {
      if (row.epoch == e && row.val_token_accuracy) {
        std::fprintf(stderr, " val_acc %.4f", *row.val_token_accuracy);
      }
    }
    std::fputc('\n', stderr);
  }
}

struct TrainFlags {
  gem::TrainConfig cfg;
  std::string metrics;

  void add(CLI::App& sc, double default_lr) {
    cfg.learning_rate = default_lr;
    sc.add_option("--batch-size", cfg.batch_size, "examples per optimizer step");
    sc.add_option("--lr", cfg.learning_rate, "Adam learning rate");
    sc.add_option("--epochs", cfg.epochs, "passes over the training set");
    sc.add_option("--metrics", metrics, "optional per-step metrics CSV");
  }
};

int run(int argc, char** argv) {
  CLI::App app{"GEM: target-word controlled generation and adversarial claims"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  std::uint64_t seed = 0;
  std::string config_path;
  auto add_common = [&](CLI::App* sc) {
    sc->option_defaults()->always_capture_default();
    sc->add_option("--seed", seed, "master seed");
    sc->add_option("--config", config_path, "JSONL file of namespaced keys; flags win");
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a corpus, write it normalized plus its word vocabulary");
  add_common(ingest);
  std::string corpus, out_path, vocab_path;
  ingest->add_option("--corpus", corpus, "input corpus (JSONL)")->required();
  ingest->add_option("--out", out_path, "normalized corpus output")->required();
  ingest->add_option("--vocab", vocab_path, "word vocabulary output")->required();

  // train-bpe
  auto* tbpe = app.add_subcommand("train-bpe", "learn byte-level BPE merges from a corpus");
  add_common(tbpe);
  std::size_t vocab_size = 512;
  tbpe->add_option("--corpus", corpus, "input corpus (JSONL)")->required();
  tbpe->add_option("--vocab-size", vocab_size, "target vocabulary size including bytes and end-of-text");
  tbpe->add_option("--out", out_path, "tokenizer output")->required();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "train the base LM on plain article text");
  add_common(pre);
  std::string bpe_path;
  gem::ModelConfig mcfg;
  TrainFlags pre_train;
  pre->add_option("--corpus", corpus, "input corpus (JSONL)")->required();
  pre->add_option("--bpe", bpe_path, "tokenizer file")->required();
  pre->add_option("--out", out_path, "base checkpoint output")->required();
  pre->add_option("--d-model", mcfg.d_model, "hidden size");
  pre->add_option("--layers", mcfg.n_layers, "transformer blocks");
  pre->add_option("--heads", mcfg.n_heads, "attention heads");
  pre->add_option("--d-ff", mcfg.d_ff, "feed-forward width");
  pre->add_option("--max-positions", mcfg.max_positions, "position table size");
  pre_train.add(*pre, 1e-3);

  // extend
  auto* ext = app.add_subcommand("extend", "add the target encoder and past embedding to a base LM");
  add_common(ext);
  std::string model_path;
  ext->add_option("--model", model_path, "base checkpoint")->required();
  ext->add_option("--out", out_path, "GEM checkpoint output")->required();

  // finetune
  auto* fine = app.add_subcommand("finetune", "train a GEM checkpoint on target-word samples");
  add_common(fine);
  gem::SampleBuilderConfig scfg;
  std::size_t per_sentence = 1;
  TrainFlags fine_train;
  fine->add_option("--corpus", corpus, "input corpus (JSONL)")->required();
  fine->add_option("--bpe", bpe_path, "tokenizer file")->required();
  fine->add_option("--model", model_path, "GEM checkpoint")->required();
  fine->add_option("--out", out_path, "fine-tuned checkpoint output")->required();
  fine->add_option("--select-min", scfg.select_frac_min, "minimum selected-word fraction");
  fine->add_option("--select-max", scfg.select_frac_max, "maximum selected-word fraction");
  fine->add_option("--noise-max", scfg.noise_frac_max, "maximum noise-word fraction");
  fine->add_option("--samples-per-sentence", per_sentence, "samples drawn per eligible sentence");
  fine_train.add(*fine, 1e-3);

  // generate
  auto* gen = app.add_subcommand("generate", "decode from a GEM checkpoint");
  add_common(gen);
  gem::GenerationParams gparams;
  std::string context_text, targets_text;
  gen->add_option("--model", model_path, "GEM checkpoint")->required();
  gen->add_option("--bpe", bpe_path, "tokenizer file")->required();
  gen->add_option("--context", context_text, "context text");
  gen->add_option("--targets", targets_text, "space-separated target words");
  gen->add_option("--temperature", gparams.temperature, "softmax temperature; 0 is greedy");
  gen->add_option("--top-k", gparams.top_k, "sample among the k largest logits; 0 disables");
  gen->add_option("--max-tokens", gparams.max_tokens, "token cap");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "generate and filter adversarial claims");
  add_common(pipe);
  gem::PipelineConfig pcfg;
  std::size_t n_claims = 10;
  std::string stats_path, rejected_path;
  pipe->add_option("--corpus", corpus, "input corpus (JSONL)")->required();
  pipe->add_option("--bpe", bpe_path, "tokenizer file")->required();
  pipe->add_option("--model", model_path, "GEM checkpoint")->required();
  pipe->add_option("--vocab", vocab_path, "word vocabulary; built from the corpus when omitted");
  pipe->add_option("--out", out_path, "accepted claims output (JSONL)")->required();
  pipe->add_option("--stats", stats_path, "target-count/length CSV output");
  pipe->add_option("--rejected", rejected_path, "rejected claims output (JSONL)");
  pipe->add_option("--n-claims", n_claims, "accepted claims wanted");
  pipe->add_option("--min-len", pcfg.min_len, "shortest accepted claim in characters");
  pipe->add_option("--max-len", pcfg.max_len, "longest accepted claim in characters");
  pipe->add_option("--similarity", pcfg.similarity_threshold,
                   "minimum normalized edit distance to wiki-A's first sentence");
  pipe->add_option("--context-budget", pcfg.context_token_budget, "context token budget");
  pipe->add_option("--attempts-per-claim", pcfg.attempts_per_claim, "attempt budget per wanted claim");
  pipe->add_option("--jobs", pcfg.jobs, "parallel claim attempts");
  pipe->add_option("--temperature", pcfg.generation.temperature, "softmax temperature; 0 is greedy");
  pipe->add_option("--top-k", pcfg.generation.top_k, "sample among the k largest logits; 0 disables");
  pipe->add_option("--max-tokens", pcfg.generation.max_tokens, "token cap per claim");

  // eval
  auto* ev = app.add_subcommand("eval", "correct rate, raw potency and potency from a verdict CSV");
  add_common(ev);
  std::string in_path, mode = "correct-only";
  ev->add_option("--in", in_path, "CSV claim_id,correct,sys1..sysK")->required();
  ev->add_option("--mode", mode, "raw potency over correct claims or all claims")
      ->check(CLI::IsMember({"correct-only", "all-claims"}));

  // stats
  auto* st = app.add_subcommand("stats", "target-word histogram, mean lengths and rank correlation");
  add_common(st);
  st->add_option("--in", in_path, "CSV target_count,sentence_word_len")->required();

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = merge_config(args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  if (ingest->parsed()) {
    const auto store = gem::ingest_corpus(corpus);
    const auto vocab = gem::build_vocabulary(store);
    write_file(out_path, [&](std::ostream& o) { gem::write_corpus(o, store); });
    write_file(vocab_path, [&](std::ostream& o) { vocab.write(o); });
    std::fprintf(stderr, "%zu articles, %zu vocabulary words\n", store.size(), vocab.size());
  } else if (tbpe->parsed()) {
    const auto bpe = gem::train_bpe(gem::ingest_corpus(corpus), vocab_size);
    bpe.save(out_path);
    std::fprintf(stderr, "%zu tokens%s\n", bpe.size(), bpe.truncated() ? " (no pairs left)" : "");
  } else if (pre->parsed()) {
    const auto store = gem::ingest_corpus(corpus);
    const auto bpe = gem::BpeVocab::load(bpe_path);
    mcfg.vocab_size = static_cast<int>(bpe.size());
    auto model = gem::BaseLm::init(mcfg, gem::mix_seed(seed, 1));
    const auto examples = gem::build_lm_examples(store, bpe);
    pre_train.cfg.seed = gem::mix_seed(seed, 2);
    const auto history = gem::train(model, examples, {}, pre_train.cfg);
    report_history(history, pre_train.cfg.epochs);
    if (!pre_train.metrics.empty()) {
      write_file(pre_train.metrics, [&](std::ostream& o) { gem::write_metrics_csv(o, history); });
    }
    gem::save_checkpoint(out_path, model);
  } else if (ext->parsed()) {
    const auto gem_model = gem::extend_from_base(gem::load_base(model_path), gem::mix_seed(seed, 3));
    gem::save_checkpoint(out_path, gem_model);
    const auto counts = gem::param_counts(gem_model);
    std::fprintf(stderr, "base %lld params, gem %lld params, ratio %.4f\n",
                 static_cast<long long>(counts.base_params),
                 static_cast<long long>(counts.gem_params), counts.ratio);
  } else if (fine->parsed()) {
    const auto store = gem::ingest_corpus(corpus);
    const auto bpe = gem::BpeVocab::load(bpe_path);
    auto model = gem::load_gem(model_path);
    scfg.seed = gem::mix_seed(seed, 4);
    const auto samples = gem::build_dataset(store, bpe, scfg, per_sentence);
    const auto [train_set, validation] = gem::split_dataset(samples);
    fine_train.cfg.seed = gem::mix_seed(seed, 5);
    const auto history = gem::train(model, train_set, validation, fine_train.cfg);
    report_history(history, fine_train.cfg.epochs);
    if (!fine_train.metrics.empty()) {
      write_file(fine_train.metrics, [&](std::ostream& o) { gem::write_metrics_csv(o, history); });
    }
    gem::save_checkpoint(out_path, model);
  } else if (gen->parsed()) {
    const auto bpe = gem::BpeVocab::load(bpe_path);
    const auto model = gem::load_gem(model_path);
    std::istringstream words(targets_text);
    std::vector<std::string> targets;
    for (std::string w; words >> w;) targets.push_back(w);
    gparams.seed = seed;
    const auto ids = gem::generate(model, gem::encode(context_text, bpe, gem::SourceKind::context),
                                   gem::encode_target_words(targets, bpe), gparams);
    std::cout << gem::decode(ids, bpe) << '\n';
  } else if (pipe->parsed()) {
    const auto store = gem::ingest_corpus(corpus);
    const auto bpe = gem::BpeVocab::load(bpe_path);
    const auto model = gem::load_gem(model_path);
    const auto vocab = vocab_path.empty() ? gem::build_vocabulary(store) : read_vocabulary(vocab_path);
    pcfg.seed = seed;
    const gem::GemClaimGenerator generator(model);
    const auto result = gem::run_pipeline(store, generator, bpe, vocab, n_claims, pcfg);
    write_file(out_path, [&](std::ostream& o) { gem::write_claims_jsonl(o, result.accepted); });
    if (!stats_path.empty()) {
      write_file(stats_path, [&](std::ostream& o) { gem::write_stats_csv(o, result.stats); });
    }
    if (!rejected_path.empty()) {
      std::vector<gem::ClaimCandidate> rejected;
      for (const auto& c : result.generated) {
        if (!gem::accepted(c.verdicts)) rejected.push_back(c);
      }
      write_file(rejected_path, [&](std::ostream& o) { gem::write_claims_jsonl(o, rejected); });
    }
    std::fprintf(stderr, "attempts %zu, generated %zu, accepted %zu\n", result.attempts,
                 result.generated.size(), result.accepted.size());
    for (const auto& [rule, count] : result.rejections) {
      std::fprintf(stderr, "  rejected by %s: %zu\n", rule.c_str(), count);
    }
    if (result.exhausted) {
      std::fprintf(stderr, "error: attempt budget exhausted with %zu of %zu claims\n",
                   result.accepted.size(), n_claims);
      return 1;
    }
  } else if (ev->parsed()) {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open " + in_path);
    const auto records = gem::read_records_csv(in);
    const auto m = gem::attack_metrics(
        records, mode == "all-claims" ? gem::PotencyMode::all_claims : gem::PotencyMode::correct_only);
    std::cout << gem::format_metrics(m) << '\n';
  } else if (st->parsed()) {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open " + in_path);
    const auto s = gem::claim_stats(gem::read_stats_csv(in));
    std::printf("target_count,claims,mean_sentence_word_len\n");
    for (const auto& [k, n] : s.histogram) std::printf("%zu,%zu,%.4f\n", k, n, s.mean_length.at(k));
    if (std::isnan(s.spearman)) {
      std::printf("spearman,nan\n");
    } else {
      std::printf("spearman,%.4f\n", s.spearman);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
