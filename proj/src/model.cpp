#include "gem/model.hpp"

#include <random>
#include <stdexcept>

namespace gem {

namespace {

using Vector = ColVector<Scalar>;

void init_normal(Parameter& p, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
}

void init_block(Block& b, std::mt19937_64& rng, double stddev) {
  init_normal(b.w_qkv, rng, stddev);
  init_normal(b.w_o, rng, stddev);
  init_normal(b.w_fc, rng, stddev);
  init_normal(b.w_proj, rng, stddev);
}

std::int64_t block_param_count(std::int64_t d, std::int64_t ff) {
  return 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d);
}

// Row layout of the joint sequence: shared rows (context then present)
// followed by target rows.
struct Layout {
  Eigen::Index n_ctx = 0;
  Eigen::Index n_present = 0;
  Eigen::Index n_target = 0;

  Eigen::Index n_shared() const { return n_ctx + n_present; }
  Eigen::Index total() const { return n_shared() + n_target; }

  bool allowed(Eigen::Index r, Eigen::Index c) const {
    const Eigen::Index ns = n_shared();
    if (r < ns) {
      if (c < ns) return c <= r;
      return r >= n_ctx;  // only present rows see the target
    }
    return c >= ns;  // target rows attend bidirectionally among themselves
  }
};

struct ConstRefs {
  const BaseLm* shared = nullptr;
  const std::vector<Block>* target_blocks = nullptr;
  const Parameter* target_wpe = nullptr;
  const Parameter* past = nullptr;
};

struct MutRefs {
  BaseLm* shared = nullptr;
  std::vector<Block>* target_blocks = nullptr;
  Parameter* target_wpe = nullptr;
  Parameter* past = nullptr;
};

struct LayerCache {
  Matrix x_in;
  Matrix ln1_hat, ln1_out;
  Vector ln1_rstd;
  Matrix qkv;
  std::vector<Matrix> probs;
  Matrix att_out;
  Matrix x_mid;
  Matrix ln2_hat, ln2_out;
  Vector ln2_rstd;
  Matrix h_pre, h_act;
};

struct Cache {
  Layout layout;
  std::vector<TokenId> ctx, tgt, present;
  std::vector<LayerCache> layers;
  Matrix lnf_hat, lnf_out;
  Vector lnf_rstd;
};

template <typename Fn>
void for_segments(const Layout& lay, const BaseLm& shared, const std::vector<Block>* target,
                  std::size_t layer, Fn&& fn) {
  fn(Eigen::Index{0}, lay.n_shared(), shared.blocks[layer]);
  if (lay.n_target > 0) fn(lay.n_shared(), lay.n_target, (*target)[layer]);
}

template <typename Fn>
void for_segments_mut(const Layout& lay, BaseLm& shared, std::vector<Block>* target,
                      std::size_t layer, Fn&& fn) {
  fn(Eigen::Index{0}, lay.n_shared(), shared.blocks[layer]);
  if (lay.n_target > 0) fn(lay.n_shared(), lay.n_target, (*target)[layer]);
}

void check_ids(std::span<const TokenId> ids, int vocab) {
  for (TokenId id : ids) {
    if (id < 0 || id >= vocab) throw std::out_of_range("invalid token id " + std::to_string(id));
  }
}

Matrix forward_joint(const ConstRefs& refs, std::span<const TokenId> ctx,
                     std::span<const TokenId> tgt, std::span<const TokenId> present,
                     Cache* cache) {
  const BaseLm& base = *refs.shared;
  const ModelConfig& cfg = base.config;
  if (present.empty()) throw std::invalid_argument("present sequence is empty");
  if (!tgt.empty() && refs.target_blocks == nullptr) {
    throw std::invalid_argument("model has no target encoder");
  }
  const auto combined = ctx.size() + tgt.size() + present.size();
  if (combined > static_cast<std::size_t>(cfg.max_positions)) {
    throw std::length_error("sequence of " + std::to_string(combined) +
                            " tokens exceeds max_positions " + std::to_string(cfg.max_positions));
  }
  check_ids(ctx, cfg.vocab_size);
  check_ids(tgt, cfg.vocab_size);
  check_ids(present, cfg.vocab_size);

  Layout lay;
  lay.n_ctx = static_cast<Eigen::Index>(ctx.size());
  lay.n_present = static_cast<Eigen::Index>(present.size());
  lay.n_target = static_cast<Eigen::Index>(tgt.size());
  const Eigen::Index N = lay.total();
  const Eigen::Index d = cfg.d_model;
  const Eigen::Index H = cfg.n_heads;
  const Eigen::Index dh = d / H;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  Matrix x(N, d);
  for (Eigen::Index i = 0; i < lay.n_ctx; ++i) {
    x.row(i) = base.wte.value.row(ctx[i]) + base.wpe.value.row(i);
    if (refs.past != nullptr) x.row(i) += refs.past->value;
  }
  for (Eigen::Index j = 0; j < lay.n_present; ++j) {
    x.row(lay.n_ctx + j) = base.wte.value.row(present[j]) + base.wpe.value.row(lay.n_ctx + j);
  }
  for (Eigen::Index j = 0; j < lay.n_target; ++j) {
    x.row(lay.n_shared() + j) = base.wte.value.row(tgt[j]) + refs.target_wpe->value.row(j);
  }

  if (cache != nullptr) {
    cache->layout = lay;
    cache->ctx.assign(ctx.begin(), ctx.end());
    cache->tgt.assign(tgt.begin(), tgt.end());
    cache->present.assign(present.begin(), present.end());
    cache->layers.assign(base.blocks.size(), LayerCache{});
  }

  for (std::size_t l = 0; l < base.blocks.size(); ++l) {
    LayerCache lc;
    lc.x_in = x;
    lc.ln1_hat.resize(N, d);
    lc.ln1_out.resize(N, d);
    lc.ln1_rstd.resize(N);
    lc.qkv.resize(N, 3 * d);
    for_segments(lay, base, refs.target_blocks, l,
                 [&](Eigen::Index r0, Eigen::Index n, const Block& blk) {
                   layer_norm(x.middleRows(r0, n), blk.ln1_g.value, blk.ln1_b.value,
                              lc.ln1_out.middleRows(r0, n), lc.ln1_hat.middleRows(r0, n),
                              lc.ln1_rstd.segment(r0, n));
                   lc.qkv.middleRows(r0, n).noalias() = lc.ln1_out.middleRows(r0, n) * blk.w_qkv.value;
                   lc.qkv.middleRows(r0, n).rowwise() += blk.b_qkv.value.row(0);
                 });

    lc.att_out.resize(N, d);
    lc.probs.resize(static_cast<std::size_t>(H));
    for (Eigen::Index h = 0; h < H; ++h) {
      const auto q = lc.qkv.middleCols(h * dh, dh);
      const auto k = lc.qkv.middleCols(d + h * dh, dh);
      const auto v = lc.qkv.middleCols(2 * d + h * dh, dh);
      Matrix scores = (q * k.transpose()) * scale;
      for (Eigen::Index r = 0; r < N; ++r) {
        for (Eigen::Index c = 0; c < N; ++c) {
          if (!lay.allowed(r, c)) scores(r, c) = -std::numeric_limits<Scalar>::infinity();
        }
      }
      Matrix& p = lc.probs[static_cast<std::size_t>(h)];
      p = softmax_rows(scores);
      lc.att_out.middleCols(h * dh, dh).noalias() = p * v;
    }

    lc.x_mid = x;
    lc.ln2_hat.resize(N, d);
    lc.ln2_out.resize(N, d);
    lc.ln2_rstd.resize(N);
    lc.h_pre.resize(N, cfg.d_ff);
    lc.h_act.resize(N, cfg.d_ff);
    for_segments(lay, base, refs.target_blocks, l,
                 [&](Eigen::Index r0, Eigen::Index n, const Block& blk) {
                   lc.x_mid.middleRows(r0, n).noalias() += lc.att_out.middleRows(r0, n) * blk.w_o.value;
                   lc.x_mid.middleRows(r0, n).rowwise() += blk.b_o.value.row(0);
                   layer_norm(lc.x_mid.middleRows(r0, n), blk.ln2_g.value, blk.ln2_b.value,
                              lc.ln2_out.middleRows(r0, n), lc.ln2_hat.middleRows(r0, n),
                              lc.ln2_rstd.segment(r0, n));
                   lc.h_pre.middleRows(r0, n).noalias() = lc.ln2_out.middleRows(r0, n) * blk.w_fc.value;
                   lc.h_pre.middleRows(r0, n).rowwise() += blk.b_fc.value.row(0);
                   lc.h_act.middleRows(r0, n) = gelu(lc.h_pre.middleRows(r0, n));
                   x.middleRows(r0, n) = lc.x_mid.middleRows(r0, n);
                   x.middleRows(r0, n).noalias() += lc.h_act.middleRows(r0, n) * blk.w_proj.value;
                   x.middleRows(r0, n).rowwise() += blk.b_proj.value.row(0);
                 });
    if (cache != nullptr) cache->layers[l] = std::move(lc);
  }

  const auto final_rows = x.middleRows(lay.n_ctx, lay.n_present);
  Matrix lnf_hat(lay.n_present, d), lnf_out(lay.n_present, d);
  Vector lnf_rstd(lay.n_present);
  layer_norm(final_rows, base.lnf_g.value, base.lnf_b.value, lnf_out, lnf_hat, lnf_rstd);

  Matrix logits = lnf_out * base.wte.value.transpose();
  logits.rowwise() += base.out_bias.value.row(0);

  if (cache != nullptr) {
    cache->lnf_hat = std::move(lnf_hat);
    cache->lnf_out = std::move(lnf_out);
    cache->lnf_rstd = std::move(lnf_rstd);
  }
  return logits;
}

void backward_joint(const MutRefs& refs, const Cache& cache, const Matrix& dlogits) {
  BaseLm& base = *refs.shared;
  const ModelConfig& cfg = base.config;
  const Layout& lay = cache.layout;
  const Eigen::Index N = lay.total();
  const Eigen::Index d = cfg.d_model;
  const Eigen::Index H = cfg.n_heads;
  const Eigen::Index dh = d / H;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  base.wte.accumulate(dlogits.transpose() * cache.lnf_out);
  base.out_bias.accumulate(dlogits.colwise().sum());
  const Matrix dlnf_out = dlogits * base.wte.value;
  base.lnf_g.accumulate(dlnf_out.cwiseProduct(cache.lnf_hat).colwise().sum());
  base.lnf_b.accumulate(dlnf_out.colwise().sum());

  Matrix dx = Matrix::Zero(N, d);
  dx.middleRows(lay.n_ctx, lay.n_present) = layer_norm_input_grad(
      (dlnf_out.array().rowwise() * base.lnf_g.value.row(0).array()).matrix(), cache.lnf_hat,
      cache.lnf_rstd);

  for (std::size_t li = base.blocks.size(); li-- > 0;) {
    const LayerCache& lc = cache.layers[li];

    Matrix dh_act(N, cfg.d_ff);
    for_segments_mut(lay, base, refs.target_blocks, li,
                     [&](Eigen::Index r0, Eigen::Index n, Block& blk) {
                       const auto g = dx.middleRows(r0, n);
                       blk.b_proj.accumulate(g.colwise().sum());
                       blk.w_proj.accumulate(lc.h_act.middleRows(r0, n).transpose() * g);
                       dh_act.middleRows(r0, n).noalias() = g * blk.w_proj.value.transpose();
                     });
    const Matrix dh_pre = dh_act.cwiseProduct(gelu_derivative(lc.h_pre).eval());

    Matrix dx_mid = dx;
    for_segments_mut(lay, base, refs.target_blocks, li,
                     [&](Eigen::Index r0, Eigen::Index n, Block& blk) {
                       const auto g = dh_pre.middleRows(r0, n);
                       blk.b_fc.accumulate(g.colwise().sum());
                       blk.w_fc.accumulate(lc.ln2_out.middleRows(r0, n).transpose() * g);
                       const Matrix dln2 = g * blk.w_fc.value.transpose();
                       const auto hat = lc.ln2_hat.middleRows(r0, n);
                       blk.ln2_g.accumulate(dln2.cwiseProduct(hat).colwise().sum());
                       blk.ln2_b.accumulate(dln2.colwise().sum());
                       const Matrix dxhat =
                           (dln2.array().rowwise() * blk.ln2_g.value.row(0).array()).matrix();
                       dx_mid.middleRows(r0, n) +=
                           layer_norm_input_grad(dxhat, hat, lc.ln2_rstd.segment(r0, n));
                     });

    Matrix datt(N, d);
    for_segments_mut(lay, base, refs.target_blocks, li,
                     [&](Eigen::Index r0, Eigen::Index n, Block& blk) {
                       const auto g = dx_mid.middleRows(r0, n);
                       blk.b_o.accumulate(g.colwise().sum());
                       blk.w_o.accumulate(lc.att_out.middleRows(r0, n).transpose() * g);
                       datt.middleRows(r0, n).noalias() = g * blk.w_o.value.transpose();
                     });

    Matrix dqkv(N, 3 * d);
    for (Eigen::Index h = 0; h < H; ++h) {
      const Matrix& p = lc.probs[static_cast<std::size_t>(h)];
      const auto q = lc.qkv.middleCols(h * dh, dh);
      const auto k = lc.qkv.middleCols(d + h * dh, dh);
      const auto v = lc.qkv.middleCols(2 * d + h * dh, dh);
      const auto d_out = datt.middleCols(h * dh, dh);
      const Matrix dp = d_out * v.transpose();
      dqkv.middleCols(2 * d + h * dh, dh).noalias() = p.transpose() * d_out;
      const Vector row_dot = p.cwiseProduct(dp).rowwise().sum();
      const Matrix ds = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
      dqkv.middleCols(h * dh, dh).noalias() = ds * k;
      dqkv.middleCols(d + h * dh, dh).noalias() = ds.transpose() * q;
    }

    Matrix dx_in = dx_mid;
    for_segments_mut(lay, base, refs.target_blocks, li,
                     [&](Eigen::Index r0, Eigen::Index n, Block& blk) {
                       const auto g = dqkv.middleRows(r0, n);
                       blk.b_qkv.accumulate(g.colwise().sum());
                       blk.w_qkv.accumulate(lc.ln1_out.middleRows(r0, n).transpose() * g);
                       const Matrix dln1 = g * blk.w_qkv.value.transpose();
                       const auto hat = lc.ln1_hat.middleRows(r0, n);
                       blk.ln1_g.accumulate(dln1.cwiseProduct(hat).colwise().sum());
                       blk.ln1_b.accumulate(dln1.colwise().sum());
                       const Matrix dxhat =
                           (dln1.array().rowwise() * blk.ln1_g.value.row(0).array()).matrix();
                       dx_in.middleRows(r0, n) +=
                           layer_norm_input_grad(dxhat, hat, lc.ln1_rstd.segment(r0, n));
                     });
    dx = std::move(dx_in);
  }

  if (base.wte.trainable) {
    for (Eigen::Index i = 0; i < lay.n_ctx; ++i) base.wte.grad.row(cache.ctx[i]) += dx.row(i);
    for (Eigen::Index j = 0; j < lay.n_present; ++j) {
      base.wte.grad.row(cache.present[j]) += dx.row(lay.n_ctx + j);
    }
    for (Eigen::Index j = 0; j < lay.n_target; ++j) {
      base.wte.grad.row(cache.tgt[j]) += dx.row(lay.n_shared() + j);
    }
  }
  if (base.wpe.trainable) {
    base.wpe.grad.topRows(lay.n_shared()) += dx.topRows(lay.n_shared());
  }
  if (refs.past != nullptr && lay.n_ctx > 0) {
    refs.past->accumulate(dx.topRows(lay.n_ctx).colwise().sum());
  }
  if (lay.n_target > 0 && refs.target_wpe->trainable) {
    refs.target_wpe->grad.topRows(lay.n_target) += dx.bottomRows(lay.n_target);
  }
}

ConstRefs refs_of(const BaseLm& m) { return ConstRefs{&m, nullptr, nullptr, nullptr}; }
ConstRefs refs_of(const GemModel& m) {
  return ConstRefs{&m.shared, &m.target_blocks, &m.target_wpe, &m.past_embedding};
}
MutRefs mut_refs_of(BaseLm& m) { return MutRefs{&m, nullptr, nullptr, nullptr}; }
MutRefs mut_refs_of(GemModel& m) {
  return MutRefs{&m.shared, &m.target_blocks, &m.target_wpe, &m.past_embedding};
}

std::span<const TokenId> target_ids(const BaseLm&, const Example&) { return {}; }
std::span<const TokenId> target_ids(const GemModel&, const Example& ex) { return ex.target.ids; }

template <typename Model>
double loss_and_backward_impl(Model& model, std::span<const Example> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::size_t total = 0;
  for (const auto& ex : batch) total += ex.gold.size();
  if (total == 0) throw std::invalid_argument("batch has no gold tokens");

  double loss = 0.0;
  const Scalar inv_total = Scalar(1) / static_cast<Scalar>(total);
  for (const auto& ex : batch) {
    if (ex.gold.empty()) continue;
    const TokenSeq present = teacher_forced_present(ex);
    Cache cache;
    const Matrix logits =
        forward_joint(refs_of(model), ex.context.ids, target_ids(model, ex), present.ids, &cache);
    Matrix dlogits = softmax_rows(logits);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const TokenId label = ex.gold.ids[static_cast<std::size_t>(i)];
      loss += log_sum_exp(logits.row(i)) - logits(i, label);
      dlogits(i, label) -= Scalar(1);
    }
    dlogits *= inv_total;
    backward_joint(mut_refs_of(model), cache, dlogits);
  }
  return loss * inv_total;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || vocab_size <= 0 ||
      max_positions <= 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw std::invalid_argument("d_model must be divisible by n_heads");
  if (max_positions < 256) throw std::invalid_argument("max_positions must be at least 256");
  if (!(init_std > 0.0)) throw std::invalid_argument("init_std must be positive");
}

Block::Block(const std::string& prefix, const ModelConfig& cfg) {
  const Eigen::Index d = cfg.d_model, ff = cfg.d_ff;
  ln1_g = Parameter(prefix + ".ln1.g", 1, d);
  ln1_b = Parameter(prefix + ".ln1.b", 1, d);
  w_qkv = Parameter(prefix + ".attn.w_qkv", d, 3 * d);
  b_qkv = Parameter(prefix + ".attn.b_qkv", 1, 3 * d);
  w_o = Parameter(prefix + ".attn.w_o", d, d);
  b_o = Parameter(prefix + ".attn.b_o", 1, d);
  ln2_g = Parameter(prefix + ".ln2.g", 1, d);
  ln2_b = Parameter(prefix + ".ln2.b", 1, d);
  w_fc = Parameter(prefix + ".mlp.w_fc", d, ff);
  b_fc = Parameter(prefix + ".mlp.b_fc", 1, ff);
  w_proj = Parameter(prefix + ".mlp.w_proj", ff, d);
  b_proj = Parameter(prefix + ".mlp.b_proj", 1, d);
  ln1_g.value.setOnes();
  ln2_g.value.setOnes();
}

void Block::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&ln1_g, &ln1_b, &w_qkv, &b_qkv, &w_o, &b_o, &ln2_g, &ln2_b, &w_fc, &b_fc,
                       &w_proj, &b_proj}) {
    out.push_back(p);
  }
}

void Block::collect(std::vector<const Parameter*>& out) const {
  for (const Parameter* p : {&ln1_g, &ln1_b, &w_qkv, &b_qkv, &w_o, &b_o, &ln2_g, &ln2_b, &w_fc,
                             &b_fc, &w_proj, &b_proj}) {
    out.push_back(p);
  }
}

BaseLm BaseLm::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BaseLm m;
  m.config = cfg;
  std::mt19937_64 rng(seed);
  m.wte = Parameter("wte", cfg.vocab_size, cfg.d_model);
  m.wpe = Parameter("wpe", cfg.max_positions, cfg.d_model);
  init_normal(m.wte, rng, cfg.init_std);
  init_normal(m.wpe, rng, cfg.init_std);
  for (int l = 0; l < cfg.n_layers; ++l) {
    m.blocks.emplace_back("h" + std::to_string(l), cfg);
    init_block(m.blocks.back(), rng, cfg.init_std);
  }
  m.lnf_g = Parameter("ln_f.g", 1, cfg.d_model);
  m.lnf_g.value.setOnes();
  m.lnf_b = Parameter("ln_f.b", 1, cfg.d_model);
  m.out_bias = Parameter("out_bias", 1, cfg.vocab_size);
  return m;
}

std::vector<Parameter*> BaseLm::parameters() {
  std::vector<Parameter*> out{&wte, &wpe};
  for (auto& b : blocks) b.collect(out);
  out.insert(out.end(), {&lnf_g, &lnf_b, &out_bias});
  return out;
}

std::vector<const Parameter*> BaseLm::parameters() const {
  std::vector<const Parameter*> out{&wte, &wpe};
  for (const auto& b : blocks) b.collect(out);
  out.insert(out.end(), {&lnf_g, &lnf_b, &out_bias});
  return out;
}

std::vector<Parameter*> GemModel::parameters() {
  auto out = shared.parameters();
  for (auto& b : target_blocks) b.collect(out);
  out.insert(out.end(), {&target_wpe, &past_embedding});
  return out;
}

std::vector<const Parameter*> GemModel::parameters() const {
  auto out = shared.parameters();
  for (const auto& b : target_blocks) b.collect(out);
  out.insert(out.end(), {&target_wpe, &past_embedding});
  return out;
}

Matrix forward_base(const BaseLm& model, const TokenSeq& tokens) {
  return forward_joint(refs_of(model), {}, {}, tokens.ids, nullptr);
}

Matrix forward_gem(const GemModel& model, const TokenSeq& context, const TokenSeq& target,
                   const TokenSeq& present) {
  return forward_joint(refs_of(model), context.ids, target.ids, present.ids, nullptr);
}

GemModel extend_from_base(const BaseLm& base, std::uint64_t seed) {
  const ModelConfig& cfg = base.config;
  GemModel gem;
  gem.shared = base;
  for (Parameter* p : gem.shared.parameters()) p->zero_grad();
  gem.shared.wte.trainable = false;

  std::mt19937_64 rng(seed);
  for (int l = 0; l < cfg.n_layers; ++l) {
    gem.target_blocks.emplace_back("target.h" + std::to_string(l), cfg);
    init_block(gem.target_blocks.back(), rng, cfg.init_std);
  }
  gem.target_wpe = Parameter("target.wpe", cfg.max_positions, cfg.d_model);
  init_normal(gem.target_wpe, rng, cfg.init_std);
  gem.past_embedding = Parameter("past_embedding", 1, cfg.d_model);
  return gem;
}

ParamCounts param_counts(const GemModel& model) {
  ParamCounts c;
  for (const Parameter* p : model.shared.parameters()) c.base_params += p->size();
  c.gem_params = c.base_params;
  for (const auto& b : model.target_blocks) {
    std::vector<const Parameter*> ps;
    b.collect(ps);
    for (const Parameter* p : ps) c.gem_params += p->size();
  }
  c.gem_params += model.target_wpe.size() + model.past_embedding.size();
  c.ratio = static_cast<double>(c.gem_params) / static_cast<double>(c.base_params);
  return c;
}

ParamCounts param_counts(const ModelConfig& cfg) {
  const std::int64_t d = cfg.d_model, ff = cfg.d_ff, L = cfg.n_layers, V = cfg.vocab_size,
                     P = cfg.max_positions;
  ParamCounts c;
  c.base_params = V * d + P * d + L * block_param_count(d, ff) + 2 * d + V;
  c.gem_params = c.base_params + L * block_param_count(d, ff) + P * d + d;
  c.ratio = static_cast<double>(c.gem_params) / static_cast<double>(c.base_params);
  return c;
}

TokenSeq teacher_forced_present(const Example& ex) {
  TokenSeq present;
  present.kind = SourceKind::present;
  present.ids.reserve(ex.gold.size());
  present.ids.push_back(ex.start_token);
  if (!ex.gold.empty()) present.ids.insert(present.ids.end(), ex.gold.ids.begin(), ex.gold.ids.end() - 1);
  return present;
}

double loss_and_backward(BaseLm& model, std::span<const Example> batch) {
  return loss_and_backward_impl(model, batch);
}

double loss_and_backward(GemModel& model, std::span<const Example> batch) {
  return loss_and_backward_impl(model, batch);
}

Matrix example_logits(const BaseLm& model, const Example& ex) {
  return forward_joint(refs_of(model), ex.context.ids, {}, teacher_forced_present(ex).ids, nullptr);
}

Matrix example_logits(const GemModel& model, const Example& ex) {
  return forward_joint(refs_of(model), ex.context.ids, ex.target.ids,
                       teacher_forced_present(ex).ids, nullptr);
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace gem
