// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ssran/autograd.hpp"
#include "ssran/tensor.hpp"

namespace ssran {

struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t d_ff = 512;
  std::size_t heads = 8;
  std::size_t encoder_layers = 2;
  std::size_t ran_layers = 3;
  std::size_t decoder_layers = 4;
  int rel_clip = 16;
  double dropout = 0.1;
  std::size_t vocab_size = 0;
  std::size_t num_slots = 0;
  std::size_t num_intents = 0;
  bool no_sr = false;
  bool no_ran = false;
  bool no_aux = false;
  bool basic_model = false;

  // The intent-count head has one class per possible count.
  std::size_t d_n() const { return num_intents; }
  void validate() const;
};

struct AttnParams {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FfnParams {
  Var w1, b1, w2, b2;
};

struct NormParams {
  Var gain, bias;
};

struct EncLayerParams {
  AttnParams attn;
  Var rel_k, rel_v;  // relative-position tables, shared across heads
  NormParams norm1, norm2;
  FfnParams ffn;
};

struct RanLayerParams {
  AttnParams self_attn, s_cross, i_cross;
  NormParams norm_att, norm_s, norm_i, norm_r;
  FfnParams ffn;
};

struct SharedClassifier {
  Var ws, bs, wi, bi;  // one storage, read by preliminary and final heads
};

// Carries dropout state through a forward pass; inactive by default.
struct DropoutCtx {
  bool training = false;
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return training && rate > 0.0 && rng != nullptr; }
};

// Multi-head scaled dot-product attention. Masked key positions are excluded
// from the softmax and masked query rows come out as zero vectors. rel_k and
// rel_v may be null (content-only attention).
Var mha(const Var& q_in, const Var& k_in, const Var& v_in, const Mask& mask, const AttnParams& p,
        std::size_t heads, const Var& rel_k, const Var& rel_v, int clip, const DropoutCtx& dr);

Var ffn_block(const Var& x, const FfnParams& p, const DropoutCtx& dr);

Var encoder_layer(const Var& x, const Mask& mask, const EncLayerParams& p, std::size_t heads,
                  int clip, const DropoutCtx& dr);

// Per-token logits from h_j concatenated with the masked mean-pool of H.
// Serves as both the preliminary and the final head.
std::pair<Var, Var> result_heads(const Var& h, const Mask& mask, const SharedClassifier& clf);

// Expected label embeddings under the softmaxed logits; masked rows zeroed.
std::pair<Var, Var> embed_results(const Var& slot_logits, const Var& intent_logits, const Var& es,
                                  const Var& ei, const Mask& mask);

// Row-stochastic scope matrix over unmasked columns; masked columns exactly 0.
Var scope_weights(const Var& h, const Var& s, const Var& i, const Mask& mask, const Var& w1,
                  const Var& w2);

// Residual plus scope-weighted mixture: out_j = v_j + sum_k w_jk v_k.
Var apply_scope(const Var& v, const Var& w, const Mask& mask);

struct RanState {
  Var s, i, r;
};

RanState ran_init(const Var& s_hat, const Var& i_hat);
RanState ran_layer(const RanState& st, const Mask& mask, const RanLayerParams& p, std::size_t heads,
                   const DropoutCtx& dr);

// Norm(h_hat + r + FFN(Pool(h_hat))) with the pooled FFN output broadcast to
// every row.
Var merge_states(const Var& h_hat, const Var& r, const Mask& mask, const FfnParams& ffn,
                 const NormParams& norm, const DropoutCtx& dr);

Var inp_head(const Var& hd, const Mask& mask, const Var& wn, const Var& bn);
Var sct_head(const Var& hd, const Var& wt, const Var& bt);  // returns probabilities

struct ModelOutput {
  Var h;                            // encoder hidden states
  Var prelim_slot, prelim_intent;   // preliminary logits
  Var s_emb, i_emb;                 // result embeddings
  Var scope;                        // scope weight matrix, null when SR is off
  Var h_hat, s_hat, i_hat;          // scope-sensitive states
  Var r;                            // result-semantic vector
  Var hrs;                          // merged states
  Var hd;                           // decoder output
  Var slot_logits, intent_logits;   // final logits
  Var inp_logits;                   // intent-count logits
  Var sct_probs;                    // chunk-tag probabilities
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& cfg() const { return cfg_; }

  // Dropout runs only when training is true and a generator is supplied; the
  // rate comes from the config.
  ModelOutput forward(const std::vector<int>& token_ids, const Mask& mask, bool training = false,
                      std::mt19937_64* rng = nullptr) const;

  std::vector<std::pair<std::string, Var>>& params() { return params_; }
  const std::vector<std::pair<std::string, Var>>& params() const { return params_; }
  Var param(const std::string& name) const;  // throws if unknown

  const SharedClassifier& classifier() const { return clf_; }

 private:
  Var reg(const std::string& name, Tensor t);
  Var reg_xavier(const std::string& name, std::size_t dout, std::size_t din, std::mt19937_64& rng);
  Var reg_gauss(const std::string& name, std::size_t rows, std::size_t cols, double stddev,
                std::mt19937_64& rng);
  Var reg_zeros(const std::string& name, std::size_t n);
  Var reg_ones(const std::string& name, std::size_t n);
  AttnParams make_attn(const std::string& prefix, std::mt19937_64& rng);
  FfnParams make_ffn(const std::string& prefix, std::mt19937_64& rng);
  NormParams make_norm(const std::string& prefix);
  EncLayerParams make_enc_layer(const std::string& prefix, std::mt19937_64& rng);
  RanLayerParams make_ran_layer(const std::string& prefix, std::mt19937_64& rng);

  ModelConfig cfg_;
  Var tok_emb_;
  std::vector<EncLayerParams> enc_;
  SharedClassifier clf_;
  Var es_, ei_;
  Var sr_w1_, sr_w2_;
  std::vector<RanLayerParams> ran_;
  FfnParams merge_ffn_;
  NormParams merge_norm_;
  std::vector<EncLayerParams> dec_;
  Var wn_, bn_, wt_, bt_;
  std::vector<std::pair<std::string, Var>> params_;
};

}  // namespace ssran
