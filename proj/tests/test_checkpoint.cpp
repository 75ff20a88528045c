// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "ssran/checkpoint.hpp"
#include "ssran/synthetic.hpp"
#include "support.hpp"

using namespace ssran;
using testing_support::tiny_config;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

struct Fixture {
  std::vector<Utterance> utts;
  Vocabs vocabs;
  ModelConfig mcfg;
  Fixture() : utts(synthetic_corpus(12, 3)), vocabs(build_vocabs(utts)) {
    mcfg = tiny_config(vocabs.tokens.size(), vocabs.slots.size(), vocabs.intents.size());
  }
};

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("a checkpoint round trip preserves every bit and every list") {
  Fixture f;
  Model m(f.mcfg, 21);
  TempFile tmp("tmp_ckpt_roundtrip.bin");
  save_checkpoint(tmp.path, m, f.vocabs);
  auto [back, vocabs] = load_checkpoint(tmp.path);

  CHECK(vocabs.tokens == f.vocabs.tokens);
  CHECK(vocabs.slots == f.vocabs.slots);
  CHECK(vocabs.intents == f.vocabs.intents);
  CHECK(vocabs.token_id("never-seen") == vocabs.unk_id);

  REQUIRE(back.params().size() == m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    CHECK(back.params()[i].first == m.params()[i].first);
    CHECK(testing_support::max_abs_diff(back.params()[i].second->value,
                                        m.params()[i].second->value) == 0.0);
  }
  CHECK(back.cfg().d_model == f.mcfg.d_model);
  CHECK(back.cfg().rel_clip == f.mcfg.rel_clip);
  CHECK(back.cfg().dropout == f.mcfg.dropout);

  // Same inputs, bit-identical outputs.
  std::vector<int> ids = {2, 3, 4};
  Mask mask(3, 1);
  auto a = m.forward(ids, mask);
  auto b = back.forward(ids, mask);
  CHECK(testing_support::max_abs_diff(a.slot_logits->value, b.slot_logits->value) == 0.0);
  CHECK(testing_support::max_abs_diff(a.scope->value, b.scope->value) == 0.0);
}

TEST_CASE("variant flags survive the round trip") {
  Fixture f;
  for (int variant = 0; variant < 4; ++variant) {
    auto mcfg = f.mcfg;
    if (variant == 0) mcfg.no_sr = true;
    if (variant == 1) mcfg.no_ran = true;
    if (variant == 2) mcfg.no_aux = true;
    if (variant == 3) mcfg.basic_model = true;
    Model m(mcfg, 4);
    TempFile tmp("tmp_ckpt_variant.bin");
    save_checkpoint(tmp.path, m, f.vocabs);
    auto [back, vocabs] = load_checkpoint(tmp.path);
    CHECK(back.cfg().no_sr == mcfg.no_sr);
    CHECK(back.cfg().no_ran == mcfg.no_ran);
    CHECK(back.cfg().no_aux == mcfg.no_aux);
    CHECK(back.cfg().basic_model == mcfg.basic_model);
    CHECK(back.params().size() == m.params().size());
  }
}

TEST_CASE("the reloaded classifier storage is still shared between heads") {
  Fixture f;
  Model m(f.mcfg, 5);
  TempFile tmp("tmp_ckpt_shared.bin");
  save_checkpoint(tmp.path, m, f.vocabs);
  auto [back, vocabs] = load_checkpoint(tmp.path);
  std::vector<int> ids = {2, 3, 4};
  Mask mask(3, 1);
  auto before = back.forward(ids, mask);
  back.param("clf.bs")->value.at(0) += 0.5;
  auto after = back.forward(ids, mask);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(after.prelim_slot->value.at(j, 0) ==
          doctest::Approx(before.prelim_slot->value.at(j, 0) + 0.5).epsilon(1e-9));
  CHECK(testing_support::max_abs_diff(before.slot_logits->value, after.slot_logits->value) > 0.0);
}

TEST_CASE("corrupt files are refused with a reason") {
  Fixture f;
  Model m(f.mcfg, 6);
  TempFile tmp("tmp_ckpt_corrupt.bin");
  save_checkpoint(tmp.path, m, f.vocabs);
  auto bytes = slurp(tmp.path);
  REQUIRE(bytes.size() > 64);

  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    spit(tmp.path, b);
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.path), doctest::Contains("magic"), ValueError);
  }
  SUBCASE("truncated header") {
    spit(tmp.path, {bytes.begin(), bytes.begin() + 20});
    CHECK_THROWS_AS(load_checkpoint(tmp.path), ValueError);
  }
  SUBCASE("truncated tensor data") {
    spit(tmp.path, {bytes.begin(), bytes.end() - 37});
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.path), doctest::Contains("end of file"), ValueError);
  }
  SUBCASE("trailing garbage") {
    auto b = bytes;
    b.push_back('z');
    spit(tmp.path, b);
    CHECK_THROWS_AS(load_checkpoint(tmp.path), ValueError);
  }
  SUBCASE("non-finite parameter value") {
    auto b = bytes;
    // Overwrite the final 8 bytes (last stored value) with an IEEE NaN.
    const unsigned char nan_bytes[8] = {0, 0, 0, 0, 0, 0, 0xF8, 0x7F};
    for (int i = 0; i < 8; ++i) b[b.size() - 8 + std::size_t(i)] = char(nan_bytes[i]);
    spit(tmp.path, b);
    CHECK_THROWS_AS(load_checkpoint(tmp.path), ValueError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_checkpoint("definitely_not_here_7b.bin"),
                         doctest::Contains("definitely_not_here_7b.bin"), ValueError);
  }
}

TEST_CASE("evaluating with mismatched label vocabularies fails loudly") {
  Fixture f;
  Model m(f.mcfg, 7);
  TempFile tmp("tmp_ckpt_vocab.bin");
  save_checkpoint(tmp.path, m, f.vocabs);
  auto [back, vocabs] = load_checkpoint(tmp.path);
  // A corpus with an intent the stored vocab never saw.
  auto alien = parse_corpus("hello O\ntotally_new_intent\n");
  CHECK_THROWS_WITH_AS(encode_batch(alien, vocabs, 4), doctest::Contains("totally_new_intent"),
                       ValueError);
}

TEST_CASE("files written through a directory path that does not exist fail cleanly") {
  Fixture f;
  Model m(f.mcfg, 8);
  CHECK_THROWS_AS(save_checkpoint("no_such_dir_xyz/ckpt.bin", m, f.vocabs), ValueError);
}
