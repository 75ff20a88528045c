// SPDX-License-Identifier: Apache-2.0
#include "ssran/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ssran {

namespace {

bool valid_bio(const std::string& s) {
  if (s == "O") return true;
  if (s.size() > 2 && (s[0] == 'B' || s[0] == 'I') && s[1] == '-') return true;
  return false;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

void finish_block(std::vector<std::pair<std::size_t, std::string>>& block,
                  std::vector<Utterance>& out) {
  if (block.empty()) return;
  if (block.size() < 2) fail(block.front().first, "block needs at least one token line and an intent line");
  Utterance u;
  for (std::size_t i = 0; i + 1 < block.size(); ++i) {
    const auto& [line_no, line] = block[i];
    const auto sp = line.find(' ');
    if (sp == std::string::npos) fail(line_no, "expected \"<token> <slot>\", got \"" + line + "\"");
    std::string tok = line.substr(0, sp);
    std::string slot = line.substr(sp + 1);
    if (tok.empty() || slot.empty() || slot.find(' ') != std::string::npos)
      fail(line_no, "expected exactly one space between token and slot");
    if (!valid_bio(slot)) fail(line_no, "bad BIO slot label \"" + slot + "\"");
    u.tokens.push_back(std::move(tok));
    u.slots.push_back(std::move(slot));
  }
  const auto& [line_no, intent_line] = block.back();
  if (intent_line.find(' ') != std::string::npos)
    fail(line_no, "intent line must not contain spaces (is the intent line missing?)");
  std::size_t start = 0;
  while (start <= intent_line.size()) {
    auto sep = intent_line.find('#', start);
    if (sep == std::string::npos) sep = intent_line.size();
    std::string part = intent_line.substr(start, sep - start);
    if (part.empty()) fail(line_no, "empty intent name in \"" + intent_line + "\"");
    if (std::find(u.intents.begin(), u.intents.end(), part) == u.intents.end())
      u.intents.push_back(std::move(part));
    start = sep + 1;
  }
  block.clear();
  out.push_back(std::move(u));
}

}  // namespace

int Vocabs::token_id(const std::string& t) const {
  auto it = token_to_id.find(t);
  return it == token_to_id.end() ? unk_id : it->second;
}

int Vocabs::slot_id(const std::string& s) const {
  auto it = slot_to_id.find(s);
  if (it == slot_to_id.end()) throw ValueError("unseen slot label \"" + s + "\"");
  return it->second;
}

int Vocabs::intent_id(const std::string& s) const {
  auto it = intent_to_id.find(s);
  if (it == intent_to_id.end()) throw ValueError("unseen intent label \"" + s + "\"");
  return it->second;
}

std::vector<Utterance> parse_corpus(const std::string& raw_text) {
  std::vector<Utterance> out;
  std::vector<std::pair<std::size_t, std::string>> block;
  std::size_t line_no = 0;
  std::istringstream in(raw_text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank)
      finish_block(block, out);
    else
      block.emplace_back(line_no, line);
  }
  finish_block(block, out);
  return out;
}

std::vector<Utterance> load_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValueError("cannot open corpus file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

Vocabs build_vocabs(const std::vector<Utterance>& train) {
  if (train.empty()) throw ValueError("build_vocabs: empty training corpus");
  Vocabs v;
  auto add = [](std::vector<std::string>& list, std::unordered_map<std::string, int>& map,
                const std::string& s) {
    if (map.emplace(s, static_cast<int>(list.size())).second) list.push_back(s);
  };
  add(v.tokens, v.token_to_id, kPadToken);
  add(v.tokens, v.token_to_id, kUnkToken);
  for (const auto& u : train) {
    for (const auto& t : u.tokens) add(v.tokens, v.token_to_id, t);
    for (const auto& s : u.slots) add(v.slots, v.slot_to_id, s);
    for (const auto& i : u.intents) add(v.intents, v.intent_to_id, i);
  }
  return v;
}

std::vector<int> derive_sct_labels(const std::vector<std::string>& slots) {
  std::vector<int> out(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    out[i] = s == "O" ? kChunkO : (s[0] == 'B' ? kChunkB : kChunkI);
  }
  return out;
}

int derive_inp_label(std::size_t intent_count, std::size_t d_n) {
  if (intent_count == 0) throw ValueError("derive_inp_label: empty intent set");
  if (intent_count > d_n)
    throw ValueError("derive_inp_label: " + std::to_string(intent_count) +
                     " intents exceeds the " + std::to_string(d_n) + "-class range");
  return static_cast<int>(intent_count) - 1;
}

Batch encode_batch(const std::vector<Utterance>& utts, const Vocabs& vocabs, std::size_t n_max) {
  const std::size_t d_i = vocabs.intents.size();
  Batch b;
  for (const auto& u : utts) {
    if (u.tokens.size() > n_max)
      throw ValueError("encode_batch: utterance of length " + std::to_string(u.tokens.size()) +
                       " exceeds n_max=" + std::to_string(n_max));
    std::vector<int> toks(n_max, vocabs.pad_id), slots(n_max, 0), chunks(n_max, 0);
    Mask m(n_max, 0);
    const auto sct = derive_sct_labels(u.slots);
    for (std::size_t j = 0; j < u.tokens.size(); ++j) {
      toks[j] = vocabs.token_id(u.tokens[j]);
      slots[j] = vocabs.slot_id(u.slots[j]);
      chunks[j] = sct[j];
      m[j] = 1;
    }
    std::vector<double> hot(d_i, 0.0);
    for (const auto& name : u.intents) hot[static_cast<std::size_t>(vocabs.intent_id(name))] = 1.0;
    b.token_ids.push_back(std::move(toks));
    b.slot_ids.push_back(std::move(slots));
    b.chunk_ids.push_back(std::move(chunks));
    b.intent_multihot.push_back(std::move(hot));
    b.intent_count.push_back(static_cast<int>(u.intents.size()));
    b.mask.push_back(std::move(m));
    b.lengths.push_back(u.tokens.size());
  }
  return b;
}

std::size_t filter_overlong(std::vector<Utterance>& utts, std::size_t max_len) {
  const auto before = utts.size();
  utts.erase(std::remove_if(utts.begin(), utts.end(),
                            [max_len](const Utterance& u) { return u.tokens.size() > max_len; }),
             utts.end());
  return before - utts.size();
}

void write_vocab_file(const std::string& path, const std::vector<std::string>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot write vocab file " + path);
  for (const auto& e : entries) out << e << '\n';
}

std::vector<std::string> read_vocab_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValueError("cannot open vocab file " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

}  // namespace ssran
