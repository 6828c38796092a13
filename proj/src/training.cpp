#include "gem/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "gem/text.hpp"

namespace gem {

namespace {

std::string join_sentences(const Article& a, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += a.sentences[i].text;
  }
  return out;
}

template <typename Model>
double token_accuracy_impl(const Model& model, std::span<const Example> examples) {
  if (examples.empty()) throw std::invalid_argument("token_accuracy needs at least one sample");
  std::size_t matches = 0, total = 0;
  for (const auto& ex : examples) {
    if (ex.gold.empty()) continue;
    const Matrix logits = example_logits(model, ex);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      if (argmax_lowest(logits.row(i)) == ex.gold.ids[static_cast<std::size_t>(i)]) ++matches;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("samples have no gold tokens");
  return static_cast<double>(matches) / static_cast<double>(total);
}

template <typename Model>
MetricHistory train_impl(Model& model, const std::vector<Example>& train_set,
                         const std::vector<Example>& validation, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  Adam opt(model.parameters(), cfg);
  zero_grad(model.parameters());

  MetricHistory history;
  std::vector<std::size_t> order(train_set.size());
  std::vector<Example> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
      const double loss = loss_and_backward(model, batch);
      opt.step();
      history.push_back({epoch, opt.steps(), loss, std::nullopt});
    }
    if (!validation.empty()) history.back().val_token_accuracy = token_accuracy(model, validation);
    if (on_epoch) on_epoch(epoch);
  }
  return history;
}

}  // namespace

void SampleBuilderConfig::validate() const {
  if (!(select_frac_min > 0.0 && select_frac_min <= select_frac_max && select_frac_max <= 1.0)) {
    throw std::invalid_argument("selection fractions must satisfy 0 < min <= max <= 1");
  }
  if (!(noise_frac_max >= 0.0 && noise_frac_max <= 1.0)) {
    throw std::invalid_argument("noise fraction must lie in [0, 1]");
  }
  if (max_sample_tokens == 0) throw std::invalid_argument("max_sample_tokens must be positive");
}

void TrainConfig::validate() const {
  if (batch_size == 0 || epochs == 0 || !(learning_rate > 0.0) || !(eps > 0.0) ||
      !(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("training hyperparameters must be positive");
  }
}

std::size_t TrainingSample::selected_count() const {
  return static_cast<std::size_t>(std::count(is_noise.begin(), is_noise.end(), false));
}

std::size_t TrainingSample::noise_count() const {
  return static_cast<std::size_t>(std::count(is_noise.begin(), is_noise.end(), true));
}

std::pair<std::size_t, std::size_t> selection_bounds(std::size_t n, double lo, double hi) {
  // The epsilon keeps products such as 0.2 * 15 from rounding past an integer.
  const double nd = static_cast<double>(n);
  const auto k_lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(lo * nd - 1e-9)));
  const auto k_hi = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(hi * nd + 1e-9)));
  return {k_lo, std::max(k_lo, k_hi)};
}

std::vector<std::size_t> select_word_positions(std::size_t n, double lo, double hi, Rng& rng) {
  if (n == 0) return {};
  auto [k_lo, k_hi] = selection_bounds(n, lo, hi);
  const std::size_t k = std::min(n, uniform_index(rng, k_lo, k_hi));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[uniform_index(rng, i, n - 1)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

TokenSeq encode_target_words(const std::vector<std::string>& words, const BpeVocab& vocab) {
  TokenSeq out;
  out.kind = SourceKind::target;
  for (const auto& w : words) {
    const auto t = encode(" " + w, vocab);
    out.ids.insert(out.ids.end(), t.ids.begin(), t.ids.end());
  }
  return out;
}

TrainingSample build_sample(const Article& article, std::size_t target_idx,
                            const SampleBuilderConfig& cfg, const BpeVocab& vocab, Rng& rng) {
  cfg.validate();
  if (target_idx == 0) throw std::invalid_argument("target sentence needs a preceding context");
  if (target_idx >= article.sentences.size()) throw std::out_of_range("target index out of range");
  const auto words = sentence_words(article.sentences[target_idx].text);
  const std::size_t n = words.size();
  if (n < 2) throw std::invalid_argument("target sentence has fewer than two words");

  TrainingSample s;
  s.provenance = {article.title, target_idx};
  s.sentence_word_count = n;

  for (std::size_t pos : select_word_positions(n, cfg.select_frac_min, cfg.select_frac_max, rng)) {
    s.target_words.push_back(words[pos]);
    s.is_noise.push_back(false);
  }

  std::set<std::string> in_target;
  for (const auto& w : words) in_target.insert(to_lower_ascii(w));
  std::set<std::string> noise_pool;
  for (const auto& sent : article.sentences) {
    if (sent.index == target_idx) continue;
    for (auto& w : sentence_words(sent.text)) {
      if (!in_target.contains(to_lower_ascii(w))) noise_pool.insert(std::move(w));
    }
  }
  const auto noise_max = static_cast<std::size_t>(std::floor(cfg.noise_frac_max * static_cast<double>(n) + 1e-9));
  const std::size_t m = std::min(uniform_index(rng, 0, noise_max), noise_pool.size());
  std::vector<std::string> pool(noise_pool.begin(), noise_pool.end());
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(pool[i], pool[uniform_index(rng, i, pool.size() - 1)]);
    const std::size_t at = uniform_index(rng, 0, s.target_words.size());
    s.target_words.insert(s.target_words.begin() + static_cast<std::ptrdiff_t>(at), pool[i]);
    s.is_noise.insert(s.is_noise.begin() + static_cast<std::ptrdiff_t>(at), true);
  }
  s.target = encode_target_words(s.target_words, vocab);

  const std::size_t budget = cfg.max_sample_tokens;
  if (s.target.size() >= budget) {
    throw std::invalid_argument("target words leave no room for gold tokens within " +
                                std::to_string(budget) + " tokens");
  }
  TokenSeq head = encode(" " + article.sentences[target_idx].text, vocab);

  // Keep as many trailing context sentences as fit beside the target sentence.
  std::size_t first = target_idx;
  s.context.kind = SourceKind::context;
  while (first > 0) {
    auto candidate = encode(join_sentences(article, first - 1, target_idx), vocab, SourceKind::context);
    if (candidate.size() + s.target.size() + head.size() > budget) break;
    s.context = std::move(candidate);
    --first;
  }
  s.context_first_sentence = first;

  const std::string gold_text = " " + join_sentences(article, target_idx, article.sentences.size());
  s.gold = encode(gold_text, vocab);
  const std::size_t room = budget > s.context.size() + s.target.size()
                               ? budget - s.context.size() - s.target.size()
                               : 0;
  if (s.gold.size() > room) s.gold.ids.resize(room);
  return s;
}

std::vector<TrainingSample> build_dataset(const ArticleStore& store, const BpeVocab& vocab,
                                          const SampleBuilderConfig& cfg,
                                          std::size_t per_sentence) {
  std::vector<TrainingSample> out;
  for (const auto& [title, article] : store) {
    for (std::size_t idx = 1; idx < article.sentences.size(); ++idx) {
      if (sentence_words(article.sentences[idx].text).size() < 2) continue;
      for (std::size_t r = 0; r < per_sentence; ++r) {
        Rng rng(mix_seed(mix_seed(fnv1a(title), cfg.seed), idx * 1000003ULL + r));
        TrainingSample sample;
        try {
          sample = build_sample(article, idx, cfg, vocab, rng);
        } catch (const std::invalid_argument&) {
          continue;
        }
        if (!sample.gold.empty()) out.push_back(std::move(sample));
      }
    }
  }
  return out;
}

std::vector<Example> build_lm_examples(const ArticleStore& store, const BpeVocab& vocab,
                                       std::size_t max_tokens, bool include_held_out) {
  if (max_tokens == 0) throw std::invalid_argument("max_tokens must be positive");
  std::vector<Example> out;
  for (const auto& [title, article] : store) {
    if (!include_held_out && is_held_out(title)) continue;
    const TokenSeq all = encode(" " + article.text(), vocab);
    for (std::size_t start = 0; start < all.size(); start += max_tokens) {
      Example ex;
      ex.gold.ids.assign(all.ids.begin() + static_cast<std::ptrdiff_t>(start),
                         all.ids.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), start + max_tokens)));
      out.push_back(std::move(ex));
    }
  }
  return out;
}

bool is_held_out(const std::string& title) { return mix_seed(fnv1a(title), 20) % 20 == 0; }

bool is_validation(const Provenance& p) { return is_held_out(p.title); }

std::pair<std::vector<Example>, std::vector<Example>> split_dataset(
    const std::vector<TrainingSample>& samples) {
  std::pair<std::vector<Example>, std::vector<Example>> out;
  for (const auto& s : samples) {
    (is_validation(s.provenance) ? out.second : out.first).push_back(s.example());
  }
  return out;
}

std::vector<Example> to_examples(const std::vector<TrainingSample>& samples) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.example());
  return out;
}

double epoch_mean_loss(const MetricHistory& history, std::size_t epoch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : history) {
    if (row.epoch == epoch) {
      sum += row.loss;
      ++n;
    }
  }
  if (n == 0) throw std::out_of_range("no history for epoch " + std::to_string(epoch));
  return sum / static_cast<double>(n);
}

void write_metrics_csv(std::ostream& out, const MetricHistory& history) {
  out << "epoch,step,loss,val_token_accuracy\n";
  for (const auto& row : history) {
    out << row.epoch << ',' << row.step << ',' << std::setprecision(10) << row.loss << ',';
    if (row.val_token_accuracy) out << std::setprecision(6) << *row.val_token_accuracy;
    out << '\n';
  }
}

Adam::Adam(std::vector<Parameter*> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps) {
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.trainable) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    p.zero_grad();
  }
}

double token_accuracy(const BaseLm& model, std::span<const Example> examples) {
  return token_accuracy_impl(model, examples);
}

double token_accuracy(const GemModel& model, std::span<const Example> examples) {
  return token_accuracy_impl(model, examples);
}

MetricHistory train(BaseLm& model, const std::vector<Example>& train_set,
                    const std::vector<Example>& validation, const TrainConfig& cfg,
                    const EpochCallback& on_epoch) {
  return train_impl(model, train_set, validation, cfg, on_epoch);
}

MetricHistory train(GemModel& model, const std::vector<Example>& train_set,
                    const std::vector<Example>& validation, const TrainConfig& cfg,
                    const EpochCallback& on_epoch) {
  return train_impl(model, train_set, validation, cfg, on_epoch);
}

}  // namespace gem
