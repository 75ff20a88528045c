// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <vector>

#include "oracles.hpp"
#include "ssran/grad_check.hpp"
#include "ssran/model.hpp"
#include "ssran/ops.hpp"
#include "support.hpp"

using namespace ssran;
using testing_support::rand_leaf;
using testing_support::tiny_config;

TEST_CASE("forward produces the right shapes for several lengths") {
  auto cfg = tiny_config();
  Model m(cfg, 1);
  for (std::size_t n : {std::size_t(1), std::size_t(2), std::size_t(7)}) {
    std::vector<int> ids(n, 2);
    Mask mask(n, 1);
    auto out = m.forward(ids, mask);
    CHECK(out.h->value.shape() == std::vector<std::size_t>{n, cfg.d_model});
    CHECK(out.prelim_slot->value.shape() == std::vector<std::size_t>{n, cfg.num_slots});
    CHECK(out.prelim_intent->value.shape() == std::vector<std::size_t>{n, cfg.num_intents});
    CHECK(out.scope->value.shape() == std::vector<std::size_t>{n, n});
    CHECK(out.hd->value.shape() == std::vector<std::size_t>{n, cfg.d_model});
    CHECK(out.slot_logits->value.shape() == std::vector<std::size_t>{n, cfg.num_slots});
    CHECK(out.intent_logits->value.shape() == std::vector<std::size_t>{n, cfg.num_intents});
    CHECK(out.inp_logits->value.shape() == std::vector<std::size_t>{cfg.d_n()});
    CHECK(out.sct_probs->value.shape() == std::vector<std::size_t>{n, 3});
  }
}

TEST_CASE("same seed gives bit-identical models and forwards") {
  auto cfg = tiny_config();
  Model a(cfg, 7), b(cfg, 7);
  REQUIRE(a.params().size() == b.params().size());
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params()[i].first == b.params()[i].first);
    CHECK(testing_support::max_abs_diff(a.params()[i].second->value, b.params()[i].second->value) ==
          0.0);
  }
  std::vector<int> ids = {2, 5, 3, 2};
  Mask mask = {1, 1, 1, 1};
  auto oa = a.forward(ids, mask);
  auto ob = b.forward(ids, mask);
  CHECK(testing_support::max_abs_diff(oa.slot_logits->value, ob.slot_logits->value) == 0.0);
  Model c(cfg, 8);
  auto oc = c.forward(ids, mask);
  CHECK(testing_support::max_abs_diff(oa.slot_logits->value, oc.slot_logits->value) > 0.0);
}

TEST_CASE("token order matters to the encoder") {
  auto cfg = tiny_config();
  Model m(cfg, 3);
  Mask mask(3, 1);
  auto fwd = m.forward({2, 3, 4}, mask);
  auto swapped = m.forward({4, 3, 2}, mask);
  // Same bag of tokens, different order: position information must show up.
  CHECK(testing_support::max_abs_diff(fwd.h->value, swapped.h->value) > 1e-8);
}

TEST_CASE("padding never changes the real positions") {
  auto cfg = tiny_config();
  Model m(cfg, 5);
  std::vector<int> ids = {2, 7, 3};
  Mask mask3(3, 1);
  auto trim = m.forward(ids, mask3);

  std::vector<int> padded = {2, 7, 3, 0, 0, 0};
  Mask mask6 = {1, 1, 1, 0, 0, 0};
  auto pad = m.forward(padded, mask6);

  auto rows_equal = [](const Tensor& a, const Tensor& b, std::size_t rows) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < a.cols(); ++j)
        if (a.at(i, j) != b.at(i, j)) return false;
    return true;
  };
  CHECK(rows_equal(trim.h->value, pad.h->value, 3));
  CHECK(rows_equal(trim.slot_logits->value, pad.slot_logits->value, 3));
  CHECK(rows_equal(trim.intent_logits->value, pad.intent_logits->value, 3));
  CHECK(rows_equal(trim.sct_probs->value, pad.sct_probs->value, 3));
  for (std::size_t c = 0; c < cfg.d_n(); ++c)
    CHECK(trim.inp_logits->value.at(c) == pad.inp_logits->value.at(c));
  // Scope rows/cols at real positions too.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(trim.scope->value.at(i, j) == pad.scope->value.at(i, j));
}

TEST_CASE("shared head with zero weights yields the bias everywhere") {
  auto cfg = tiny_config();
  Model m(cfg, 2);
  std::mt19937_64 rng(4);
  auto h = rand_leaf({4, cfg.d_model}, rng, false);
  Mask mask(4, 1);
  SharedClassifier clf;
  clf.ws = make_const(Tensor({cfg.num_slots, 2 * cfg.d_model}));
  clf.wi = make_const(Tensor({cfg.num_intents, 2 * cfg.d_model}));
  Tensor bs({cfg.num_slots});
  for (std::size_t i = 0; i < cfg.num_slots; ++i) bs.at(i) = 0.1 * double(i + 1);
  Tensor bi({cfg.num_intents});
  for (std::size_t i = 0; i < cfg.num_intents; ++i) bi.at(i) = -0.2 * double(i + 1);
  clf.bs = make_const(bs);
  clf.bi = make_const(bi);
  auto [slot, intent] = result_heads(h, mask, clf);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < cfg.num_slots; ++c)
      CHECK(slot->value.at(i, c) == doctest::Approx(bs.at(c)).epsilon(1e-12));
    for (std::size_t c = 0; c < cfg.num_intents; ++c)
      CHECK(intent->value.at(i, c) == doctest::Approx(bi.at(c)).epsilon(1e-12));
  }
}

TEST_CASE("shared head scores h_j next to the utterance pool") {
  // Hand-checkable case at d_model = 1: logit = w0 * h_j + w1 * mean(h) + b.
  auto h = make_const(Tensor({3, 1}, {1.0, 2.0, 6.0}));
  Mask mask(3, 1);
  SharedClassifier clf;
  clf.ws = make_const(Tensor({1, 2}, {10.0, 1.0}));
  clf.bs = make_const(Tensor::scalar(0.5));
  clf.wi = make_const(Tensor({1, 2}, {0.0, 3.0}));
  clf.bi = make_const(Tensor::scalar(-1.0));
  auto [slot, intent] = result_heads(h, mask, clf);
  // mean(h) = 3.0
  CHECK(slot->value.at(0, 0) == doctest::Approx(10.0 * 1.0 + 3.0 + 0.5).epsilon(1e-12));
  CHECK(slot->value.at(1, 0) == doctest::Approx(10.0 * 2.0 + 3.0 + 0.5).epsilon(1e-12));
  CHECK(slot->value.at(2, 0) == doctest::Approx(10.0 * 6.0 + 3.0 + 0.5).epsilon(1e-12));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(intent->value.at(i, 0) == doctest::Approx(3.0 * 3.0 - 1.0).epsilon(1e-12));
}

TEST_CASE("equal hidden rows get equal preliminary logits") {
  auto cfg = tiny_config();
  Model m(cfg, 9);
  Tensor h({3, cfg.d_model});
  std::mt19937_64 rng(5);
  for (std::size_t j = 0; j < cfg.d_model; ++j) {
    double v = unit_uniform(rng);
    h.at(0, j) = h.at(1, j) = h.at(2, j) = v;
  }
  auto [slot, intent] = result_heads(make_const(h), Mask(3, 1), m.classifier());
  for (std::size_t c = 0; c < cfg.num_slots; ++c) {
    CHECK(slot->value.at(0, c) == slot->value.at(1, c));
    CHECK(slot->value.at(0, c) == slot->value.at(2, c));
  }
  for (std::size_t c = 0; c < cfg.num_intents; ++c)
    CHECK(intent->value.at(0, c) == intent->value.at(2, c));
}

TEST_CASE("result embeddings are probability mixtures of label embeddings") {
  std::mt19937_64 rng(6);
  std::size_t n = 4, ds = 5, di = 3, d = 6;
  auto slot_logits = rand_leaf({n, ds}, rng, false, -2, 2);
  auto intent_logits = rand_leaf({n, di}, rng, false, -2, 2);
  // Tables hold one label embedding per column: [d x labels].
  auto es = rand_leaf({d, ds}, rng, false);
  auto ei = rand_leaf({d, di}, rng, false);
  Mask mask = {1, 0, 1, 1};
  auto [s, i] = embed_results(slot_logits, intent_logits, es, ei, mask);

  auto transpose = [](const Tensor& t) {
    oracle::Rows r(t.cols(), std::vector<double>(t.rows()));
    for (std::size_t a = 0; a < t.rows(); ++a)
      for (std::size_t b = 0; b < t.cols(); ++b) r[b][a] = t.at(a, b);
    return r;
  };
  auto s_ref = oracle::embed_results(oracle::to_rows(slot_logits->value), transpose(es->value), mask);
  auto i_ref =
      oracle::embed_results(oracle::to_rows(intent_logits->value), transpose(ei->value), mask);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      CHECK(s->value.at(r, c) == doctest::Approx(s_ref[r][c]).epsilon(1e-9));
      CHECK(i->value.at(r, c) == doctest::Approx(i_ref[r][c]).epsilon(1e-9));
    }
  // Masked rows are exactly zero.
  for (std::size_t c = 0; c < d; ++c) {
    CHECK(s->value.at(1, c) == 0.0);
    CHECK(i->value.at(1, c) == 0.0);
  }
}

TEST_CASE("uniform logits embed to the centroid; a dominant logit selects its column") {
  std::size_t ds = 4, d = 3;
  Tensor logits({2, ds});
  logits.fill(0.7);
  logits.at(1, 2) = 60.0;  // overwhelms the softmax in row 1
  std::mt19937_64 rng(7);
  auto es = rand_leaf({d, ds}, rng, false);
  auto [s, i] = embed_results(make_const(logits), make_const(logits), es, es, Mask(2, 1));
  (void)i;
  for (std::size_t c = 0; c < d; ++c) {
    double centroid = 0.0;
    for (std::size_t a = 0; a < ds; ++a) centroid += es->value.at(c, a) / double(ds);
    CHECK(s->value.at(0, c) == doctest::Approx(centroid).epsilon(1e-9));
    CHECK(s->value.at(1, c) == doctest::Approx(es->value.at(c, 2)).epsilon(1e-6));
  }
}

TEST_CASE("attention with zero values returns only the output bias") {
  auto cfg = tiny_config();
  std::mt19937_64 rng(8);
  std::size_t n = 4, d = cfg.d_model;
  AttnParams p;
  p.wq = rand_leaf({d, d}, rng, false);
  p.wk = rand_leaf({d, d}, rng, false);
  p.wv = rand_leaf({d, d}, rng, false);
  p.wo = rand_leaf({d, d}, rng, false);
  p.bq = make_const(Tensor({d}));
  p.bk = make_const(Tensor({d}));
  p.bv = make_const(Tensor({d}));
  p.bo = make_const(Tensor({d}));
  auto q = rand_leaf({n, d}, rng, false);
  auto k = rand_leaf({n, d}, rng, false);
  auto v = make_const(Tensor({n, d}));  // all zeros
  Var none;
  auto out = mha(q, k, v, Mask(n, 1), p, cfg.heads, none, none, 0, DropoutCtx{});
  for (std::size_t idx = 0; idx < n * d; ++idx) CHECK(out->value.at(idx) == 0.0);
}

TEST_CASE("attention rows of masked queries come out zero") {
  auto cfg = tiny_config();
  std::mt19937_64 rng(9);
  std::size_t n = 5, d = cfg.d_model;
  AttnParams p;
  for (Var* w : {&p.wq, &p.wk, &p.wv, &p.wo}) *w = rand_leaf({d, d}, rng, false);
  for (Var* b : {&p.bq, &p.bk, &p.bv, &p.bo}) *b = rand_leaf({d}, rng, false);
  auto x = rand_leaf({n, d}, rng, false);
  Mask mask = {1, 0, 1, 1, 0};
  Var none;
  auto out = mha(x, x, x, mask, p, cfg.heads, none, none, 0, DropoutCtx{});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (!mask[i]) CHECK(out->value.at(i, j) == 0.0);
}

TEST_CASE("encoder layer gradients agree with finite differences") {
  auto cfg = tiny_config();
  std::mt19937_64 rng(10);
  std::size_t n = 3, d = cfg.d_model;
  Model m(cfg, 11);
  auto x = rand_leaf({n, d}, rng, true, -0.5, 0.5);
  Mask mask = {1, 1, 0};
  std::vector<std::pair<std::string, Var>> leaves = {{"x", x}};
  for (const auto& [name, p] : m.params())
    if (name.rfind("enc.0.", 0) == 0) leaves.emplace_back(name, p);
  EncLayerParams lp{
      {m.param("enc.0.attn.wq"), m.param("enc.0.attn.bq"), m.param("enc.0.attn.wk"),
       m.param("enc.0.attn.bk"), m.param("enc.0.attn.wv"), m.param("enc.0.attn.bv"),
       m.param("enc.0.attn.wo"), m.param("enc.0.attn.bo")},
      m.param("enc.0.rel_k"),
      m.param("enc.0.rel_v"),
      {m.param("enc.0.norm1.gain"), m.param("enc.0.norm1.bias")},
      {m.param("enc.0.norm2.gain"), m.param("enc.0.norm2.bias")},
      {m.param("enc.0.ffn.w1"), m.param("enc.0.ffn.b1"), m.param("enc.0.ffn.w2"),
       m.param("enc.0.ffn.b2")}};
  auto rep = grad_check(leaves, [&] {
    auto y = encoder_layer(x, mask, lp, cfg.heads, cfg.rel_clip, DropoutCtx{});
    return ops::sum_all(y);
  });
  INFO("worst ", rep.worst_param, " rel ", rep.max_rel_err);
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("ablation flags prune exactly the unused parameter groups") {
  auto cfg = tiny_config();
  auto has_prefix = [](const Model& m, const std::string& prefix) {
    for (const auto& [name, p] : m.params())
      if (name.rfind(prefix, 0) == 0) return true;
    return false;
  };
  Model full(cfg, 1);
  CHECK(has_prefix(full, "sr."));
  CHECK(has_prefix(full, "ran."));
  CHECK(has_prefix(full, "inp."));
  CHECK(has_prefix(full, "merge."));

  auto c1 = cfg;
  c1.no_sr = true;
  CHECK(!has_prefix(Model(c1, 1), "sr."));

  auto c2 = cfg;
  c2.no_ran = true;
  CHECK(!has_prefix(Model(c2, 1), "ran."));

  auto c3 = cfg;
  c3.no_aux = true;
  Model ma(c3, 1);
  CHECK(has_prefix(ma, "inp."));  // heads stay, their loss weight goes to zero

  auto c4 = cfg;
  c4.basic_model = true;
  Model mb(c4, 1);
  CHECK(!has_prefix(mb, "sr."));
  CHECK(!has_prefix(mb, "ran."));
  CHECK(!has_prefix(mb, "merge."));
  CHECK(!has_prefix(mb, "embed.slot_result"));
  CHECK(has_prefix(mb, "enc."));
  CHECK(has_prefix(mb, "dec."));
  CHECK(has_prefix(mb, "clf."));

  std::vector<int> ids = {2, 3, 4};
  Mask mask(3, 1);
  for (Model* mm : {&ma, &mb}) {
    auto out = mm->forward(ids, mask);
    CHECK(out.slot_logits->value.rows() == 3);
    CHECK(out.intent_logits->value.rows() == 3);
  }
  CHECK(!mb.forward(ids, mask).scope);
  Model ms(c1, 1);
  auto os = ms.forward(ids, mask);
  CHECK(!os.scope);
  // Identity pass-through: scope-sensitive states equal their inputs.
  CHECK(testing_support::max_abs_diff(os.h_hat->value, os.h->value) == 0.0);
  CHECK(testing_support::max_abs_diff(os.s_hat->value, os.s_emb->value) == 0.0);
  CHECK(testing_support::max_abs_diff(os.i_hat->value, os.i_emb->value) == 0.0);
}
