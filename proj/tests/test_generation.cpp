#include <doctest.h>

#include <cmath>

#include "checks.hpp"
#include "gem/generation.hpp"

using namespace gem;

namespace {

RowVector<double> logits(std::initializer_list<double> v) {
  RowVector<double> r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

GemModel tiny_model() {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.vocab_size = 260;
  auto model = extend_from_base(BaseLm::init(cfg, 1), 2);
  testing::randomize(model, 3, 0.3);
  return model;
}

}  // namespace

TEST_CASE("temperature and top-k shape the distribution") {
  const auto l = logits({1.0, 3.0, 2.0, 3.0});
  GenerationParams p;
  p.top_k = 0;
  p.temperature = 1.0;
  auto probs = next_token_distribution(l, p);
  const double z = std::exp(1.0) + 2 * std::exp(3.0) + std::exp(2.0);
  CHECK(probs(0) == doctest::Approx(std::exp(1.0) / z));
  CHECK(probs(1) == doctest::Approx(std::exp(3.0) / z));
  CHECK(probs.sum() == doctest::Approx(1.0));

  p.temperature = 0.5;
  probs = next_token_distribution(l, p);
  const double z2 = std::exp(2.0) + 2 * std::exp(6.0) + std::exp(4.0);
  CHECK(probs(2) == doctest::Approx(std::exp(4.0) / z2));

  p.temperature = 1.0;
  p.top_k = 2;
  probs = next_token_distribution(l, p);
  CHECK(probs(0) == 0.0);
  CHECK(probs(2) == 0.0);
  CHECK(probs(1) == doctest::Approx(0.5));

  p.top_k = 1;
  probs = next_token_distribution(l, p);
  CHECK(probs(1) == 1.0);
  CHECK(probs(3) == 0.0);

  p.top_k = 40;
  p.temperature = 0.0;
  probs = next_token_distribution(l, p);
  CHECK(probs(1) == 1.0);
  CHECK(probs.sum() == 1.0);
}

TEST_CASE("invalid sampling parameters are rejected") {
  GenerationParams p;
  p.temperature = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.top_k = -2;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.max_tokens = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("sample frequencies follow the distribution") {
  const auto l = logits({0.0, 1.0, 2.0, -1.0, 0.5});
  GenerationParams p;
  p.top_k = 3;
  const auto probs = next_token_distribution(l, p);
  Rng rng(17);
  std::vector<int> counts(5, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_next(l, p, rng))];
  for (int k = 0; k < 5; ++k) CHECK(counts[k] / double(n) == doctest::Approx(probs(k)).epsilon(0.03));
  CHECK(counts[0] == 0);
  CHECK(counts[3] == 0);
}

TEST_CASE("generate honours max_tokens, seeds and end-of-text") {
  const auto model = tiny_model();
  const TokenSeq ctx{{1, 2, 3}, SourceKind::context};
  const TokenSeq tgt{{4, 5}, SourceKind::target};
  GenerationParams p;
  p.max_tokens = 1;
  CHECK(generate(model, ctx, tgt, p).size() == 1);
  p.max_tokens = 12;
  p.seed = 5;
  const auto a = generate(model, ctx, tgt, p);
  CHECK(a.size() == 12);
  CHECK(generate(model, ctx, tgt, p) == a);
  p.max_tokens = 300;
  CHECK_THROWS_AS(generate(model, ctx, tgt, p), std::length_error);
}

TEST_CASE("generation stops right after emitting end-of-text") {
  auto model = tiny_model();
  model.shared.out_bias.value(0, BpeVocab::kEndOfText) = 1e3;
  GenerationParams p;
  p.max_tokens = 20;
  const auto out = generate(model, {}, {}, p);
  CHECK(out.ids == std::vector<TokenId>{BpeVocab::kEndOfText});
}

TEST_CASE("first_sentence") {
  CHECK(first_sentence(" He was born in 1923. He died later.") == "He was born in 1923.");
  CHECK(first_sentence("no end") == "no end");
  CHECK(first_sentence("Dr. Cao spoke.  Then left.") == "Dr. Cao spoke.");
  CHECK(first_sentence("").empty());
  CHECK(first_sentence("   ").empty());
}
