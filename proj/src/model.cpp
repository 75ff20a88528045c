// SPDX-License-Identifier: Apache-2.0
#include "ssran/model.hpp"

#include <cmath>
#include <tuple>

#include "ssran/ops.hpp"
#include "ssran/rng.hpp"

namespace ssran {

void ModelConfig::validate() const {
  if (d_model == 0 || d_ff == 0 || heads == 0) throw ValueError("config: zero dimension");
  if (d_model % heads != 0) throw ValueError("config: heads must divide d_model");
  if (rel_clip < 0) throw ValueError("config: negative relative-position clip");
  if (vocab_size < 2) throw ValueError("config: vocab must hold at least PAD and UNK");
  if (num_slots == 0 || num_intents == 0) throw ValueError("config: empty label vocab");
  if (dropout < 0.0 || dropout >= 1.0) throw ValueError("config: dropout must be in [0,1)");
}

namespace {

Var maybe_dropout(const Var& x, const DropoutCtx& dr) {
  return dr.active() ? ops::dropout(x, dr.rate, *dr.rng) : x;
}

}  // namespace

Var mha(const Var& q_in, const Var& k_in, const Var& v_in, const Mask& mask, const AttnParams& p,
        std::size_t heads, const Var& rel_k, const Var& rel_v, int clip, const DropoutCtx& dr) {
  Var q = ops::linear(q_in, p.wq, p.bq);
  Var k = ops::linear(k_in, p.wk, p.bk);
  Var v = ops::linear(v_in, p.wv, p.bv);
  const std::size_t d = q->value.dim(1);
  if (d % heads != 0) throw ShapeError("mha: head count must divide model width");
  const std::size_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = ops::slice_cols(q, h * dh, dh);
    Var kh = ops::slice_cols(k, h * dh, dh);
    Var vh = ops::slice_cols(v, h * dh, dh);
    Var scores = ops::matmul_nt(qh, kh);
    if (rel_k) scores = ops::add(scores, ops::rel_scores(qh, rel_k, clip));
    scores = ops::scale(scores, sc);
    Var w = ops::masked_softmax_rows(scores, mask);
    w = maybe_dropout(w, dr);
    Var oh = ops::attn_mix(w, vh, mask);
    if (rel_v) oh = ops::add(oh, ops::rel_values(w, rel_v, clip, mask));
    outs.push_back(oh);
  }
  Var cat = heads == 1 ? outs[0] : ops::concat_cols(outs);
  return ops::zero_masked_rows(ops::linear(cat, p.wo, p.bo), mask);
}

Var ffn_block(const Var& x, const FfnParams& p, const DropoutCtx& dr) {
  Var h = ops::relu(ops::linear(x, p.w1, p.b1));
  h = maybe_dropout(h, dr);
  return ops::linear(h, p.w2, p.b2);
}

Var encoder_layer(const Var& x, const Mask& mask, const EncLayerParams& p, std::size_t heads,
                  int clip, const DropoutCtx& dr) {
  Var a = mha(x, x, x, mask, p.attn, heads, p.rel_k, p.rel_v, clip, dr);
  Var h1 = ops::layer_norm(ops::add(x, a), p.norm1.gain, p.norm1.bias);
  Var f = ffn_block(h1, p.ffn, dr);
  return ops::layer_norm(ops::add(h1, f), p.norm2.gain, p.norm2.bias);
}

std::pair<Var, Var> result_heads(const Var& h, const Mask& mask, const SharedClassifier& clf) {
  Var pooled = ops::mean_pool_rows(h, mask);
  Var cat = ops::concat_rowvec(h, pooled);
  return {ops::linear(cat, clf.ws, clf.bs), ops::linear(cat, clf.wi, clf.bi)};
}

std::pair<Var, Var> embed_results(const Var& slot_logits, const Var& intent_logits, const Var& es,
                                  const Var& ei, const Mask& mask) {
  Var s = ops::matmul_nt(ops::softmax_rows(slot_logits), es);
  Var i = ops::matmul_nt(ops::softmax_rows(intent_logits), ei);
  return {ops::zero_masked_rows(s, mask), ops::zero_masked_rows(i, mask)};
}

Var scope_weights(const Var& h, const Var& s, const Var& i, const Mask& mask, const Var& w1,
                  const Var& w2) {
  const std::size_t d = h->value.dim(1);
  Var q = ops::matmul(h, w1);
  Var k = ops::matmul(ops::add(ops::add(h, i), s), w2);
  Var alpha = ops::scale(ops::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
  return ops::masked_softmax_rows(alpha, mask);
}

Var apply_scope(const Var& v, const Var& w, const Mask& mask) {
  return ops::add(v, ops::attn_mix(w, v, mask));
}

RanState ran_init(const Var& s_hat, const Var& i_hat) {
  return {s_hat, i_hat, ops::add(i_hat, s_hat)};
}

RanState ran_layer(const RanState& st, const Mask& mask, const RanLayerParams& p, std::size_t heads,
                   const DropoutCtx& dr) {
  Var none;
  Var r_att = ops::layer_norm(
      ops::add(st.r, mha(st.r, st.r, st.r, mask, p.self_attn, heads, none, none, 0, dr)),
      p.norm_att.gain, p.norm_att.bias);
  Var s2 = ops::layer_norm(
      ops::add(st.s, mha(st.s, r_att, st.i, mask, p.s_cross, heads, none, none, 0, dr)),
      p.norm_s.gain, p.norm_s.bias);
  Var i2 = ops::layer_norm(
      ops::add(st.i, mha(st.i, r_att, st.s, mask, p.i_cross, heads, none, none, 0, dr)),
      p.norm_i.gain, p.norm_i.bias);
  Var rt = ops::add(s2, i2);
  Var r2 = ops::layer_norm(ops::add(rt, ffn_block(rt, p.ffn, dr)), p.norm_r.gain, p.norm_r.bias);
  return {s2, i2, r2};
}

Var merge_states(const Var& h_hat, const Var& r, const Mask& mask, const FfnParams& ffn,
                 const NormParams& norm, const DropoutCtx& dr) {
  Var pooled = ops::mean_pool_rows(h_hat, mask);
  Var f = ffn_block(pooled, ffn, dr);
  return ops::layer_norm(ops::add_rowvec(ops::add(h_hat, r), f), norm.gain, norm.bias);
}

Var inp_head(const Var& hd, const Mask& mask, const Var& wn, const Var& bn) {
  return ops::linear(ops::mean_pool_rows(hd, mask), wn, bn);
}

Var sct_head(const Var& hd, const Var& wt, const Var& bt) {
  return ops::softmax_rows(ops::linear(hd, wt, bt));
}

Var Model::reg(const std::string& name, Tensor t) {
  for (const auto& [existing, p] : params_)
    if (existing == name) throw ValueError("duplicate parameter name " + name);
  Var v = make_leaf(std::move(t), true);
  params_.emplace_back(name, v);
  return v;
}

Var Model::reg_xavier(const std::string& name, std::size_t dout, std::size_t din,
                      std::mt19937_64& rng) {
  Tensor t({dout, din});
  const double limit = std::sqrt(6.0 / static_cast<double>(din + dout));
  for (auto& v : t.values()) v = (2.0 * unit_uniform(rng) - 1.0) * limit;
  return reg(name, std::move(t));
}

Var Model::reg_gauss(const std::string& name, std::size_t rows, std::size_t cols, double stddev,
                     std::mt19937_64& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = stddev * unit_gauss(rng);
  return reg(name, std::move(t));
}

Var Model::reg_zeros(const std::string& name, std::size_t n) { return reg(name, Tensor({n})); }

Var Model::reg_ones(const std::string& name, std::size_t n) {
  return reg(name, Tensor({n}, 1.0));
}

AttnParams Model::make_attn(const std::string& prefix, std::mt19937_64& rng) {
  AttnParams p;
  const std::size_t d = cfg_.d_model;
  p.wq = reg_xavier(prefix + ".wq", d, d, rng);
  p.bq = reg_zeros(prefix + ".bq", d);
  p.wk = reg_xavier(prefix + ".wk", d, d, rng);
  p.bk = reg_zeros(prefix + ".bk", d);
  p.wv = reg_xavier(prefix + ".wv", d, d, rng);
  p.bv = reg_zeros(prefix + ".bv", d);
  p.wo = reg_xavier(prefix + ".wo", d, d, rng);
  p.bo = reg_zeros(prefix + ".bo", d);
  return p;
}

FfnParams Model::make_ffn(const std::string& prefix, std::mt19937_64& rng) {
  FfnParams p;
  p.w1 = reg_xavier(prefix + ".w1", cfg_.d_ff, cfg_.d_model, rng);
  p.b1 = reg_zeros(prefix + ".b1", cfg_.d_ff);
  p.w2 = reg_xavier(prefix + ".w2", cfg_.d_model, cfg_.d_ff, rng);
  p.b2 = reg_zeros(prefix + ".b2", cfg_.d_model);
  return p;
}

NormParams Model::make_norm(const std::string& prefix) {
  NormParams p;
  p.gain = reg_ones(prefix + ".gain", cfg_.d_model);
  p.bias = reg_zeros(prefix + ".bias", cfg_.d_model);
  return p;
}

EncLayerParams Model::make_enc_layer(const std::string& prefix, std::mt19937_64& rng) {
  EncLayerParams p;
  const std::size_t dh = cfg_.d_model / cfg_.heads;
  const std::size_t span = 2 * static_cast<std::size_t>(cfg_.rel_clip) + 1;
  const double std_rel = 1.0 / std::sqrt(static_cast<double>(dh));
  p.attn = make_attn(prefix + ".attn", rng);
  p.rel_k = reg_gauss(prefix + ".rel_k", span, dh, std_rel, rng);
  p.rel_v = reg_gauss(prefix + ".rel_v", span, dh, std_rel, rng);
  p.norm1 = make_norm(prefix + ".norm1");
  p.ffn = make_ffn(prefix + ".ffn", rng);
  p.norm2 = make_norm(prefix + ".norm2");
  return p;
}

RanLayerParams Model::make_ran_layer(const std::string& prefix, std::mt19937_64& rng) {
  RanLayerParams p;
  p.self_attn = make_attn(prefix + ".self", rng);
  p.norm_att = make_norm(prefix + ".norm_att");
  p.s_cross = make_attn(prefix + ".cross_s", rng);
  p.norm_s = make_norm(prefix + ".norm_s");
  p.i_cross = make_attn(prefix + ".cross_i", rng);
  p.norm_i = make_norm(prefix + ".norm_i");
  p.ffn = make_ffn(prefix + ".ffn", rng);
  p.norm_r = make_norm(prefix + ".norm_r");
  return p;
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg_.d_model;
  const double std_emb = 1.0 / std::sqrt(static_cast<double>(d));

  tok_emb_ = reg_gauss("embed.tok", cfg_.vocab_size, d, std_emb, rng);
  for (std::size_t l = 0; l < cfg_.encoder_layers; ++l)
    enc_.push_back(make_enc_layer("enc." + std::to_string(l), rng));

  clf_.ws = reg_xavier("clf.ws", cfg_.num_slots, 2 * d, rng);
  clf_.bs = reg_zeros("clf.bs", cfg_.num_slots);
  clf_.wi = reg_xavier("clf.wi", cfg_.num_intents, 2 * d, rng);
  clf_.bi = reg_zeros("clf.bi", cfg_.num_intents);

  if (!cfg_.basic_model) {
    es_ = reg_gauss("embed.slot_result", d, cfg_.num_slots, std_emb, rng);
    ei_ = reg_gauss("embed.intent_result", d, cfg_.num_intents, std_emb, rng);
    if (!cfg_.no_sr) {
      sr_w1_ = reg_xavier("sr.w1", d, d, rng);
      sr_w2_ = reg_xavier("sr.w2", d, d, rng);
    }
    if (!cfg_.no_ran)
      for (std::size_t l = 0; l < cfg_.ran_layers; ++l)
        ran_.push_back(make_ran_layer("ran." + std::to_string(l), rng));
    merge_ffn_ = make_ffn("merge.ffn", rng);
    merge_norm_ = make_norm("merge.norm");
  }

  for (std::size_t l = 0; l < cfg_.decoder_layers; ++l)
    dec_.push_back(make_enc_layer("dec." + std::to_string(l), rng));

  wn_ = reg_xavier("inp.w", cfg_.d_n(), d, rng);
  bn_ = reg_zeros("inp.b", cfg_.d_n());
  wt_ = reg_xavier("sct.w", 3, d, rng);
  bt_ = reg_zeros("sct.b", 3);
}

Var Model::param(const std::string& name) const {
  for (const auto& [n, p] : params_)
    if (n == name) return p;
  throw ValueError("unknown parameter " + name);
}

ModelOutput Model::forward(const std::vector<int>& token_ids, const Mask& mask, bool training,
                           std::mt19937_64* rng) const {
  if (token_ids.empty()) throw ValueError("forward: empty utterance");
  if (mask.size() != token_ids.size()) throw ShapeError("forward: mask length mismatch");
  DropoutCtx dr{training, cfg_.dropout, rng};

  ModelOutput out;
  Var x = ops::embedding_rows(tok_emb_, token_ids);

  if (cfg_.basic_model) {
    for (const auto& layer : enc_) x = encoder_layer(x, mask, layer, cfg_.heads, cfg_.rel_clip, dr);
    for (const auto& layer : dec_) x = encoder_layer(x, mask, layer, cfg_.heads, cfg_.rel_clip, dr);
    out.hd = x;
  } else {
    for (const auto& layer : enc_) x = encoder_layer(x, mask, layer, cfg_.heads, cfg_.rel_clip, dr);
    out.h = x;
    std::tie(out.prelim_slot, out.prelim_intent) = result_heads(out.h, mask, clf_);
    std::tie(out.s_emb, out.i_emb) = embed_results(out.prelim_slot, out.prelim_intent, es_, ei_, mask);

    if (cfg_.no_sr) {
      out.h_hat = out.h;
      out.s_hat = out.s_emb;
      out.i_hat = out.i_emb;
    } else {
      out.scope = scope_weights(out.h, out.s_emb, out.i_emb, mask, sr_w1_, sr_w2_);
      out.h_hat = apply_scope(out.h, out.scope, mask);
      out.s_hat = apply_scope(out.s_emb, out.scope, mask);
      out.i_hat = apply_scope(out.i_emb, out.scope, mask);
    }

    if (cfg_.no_ran) {
      out.r = make_const(Tensor({token_ids.size(), cfg_.d_model}));
    } else {
      RanState st = ran_init(out.s_hat, out.i_hat);
      for (const auto& layer : ran_) st = ran_layer(st, mask, layer, cfg_.heads, dr);
      out.r = st.r;
    }

    out.hrs = merge_states(out.h_hat, out.r, mask, merge_ffn_, merge_norm_, dr);
    x = out.hrs;
    for (const auto& layer : dec_) x = encoder_layer(x, mask, layer, cfg_.heads, cfg_.rel_clip, dr);
    out.hd = x;
  }

  std::tie(out.slot_logits, out.intent_logits) = result_heads(out.hd, mask, clf_);
  out.inp_logits = inp_head(out.hd, mask, wn_, bn_);
  out.sct_probs = sct_head(out.hd, wt_, bt_);
  return out;
}

}  // namespace ssran
