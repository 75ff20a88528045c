// SPDX-License-Identifier: Apache-2.0
#include "ssran/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace ssran {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'R', 'A', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void corrupt(const std::string& what) {
  throw ValueError("corrupted checkpoint: " + what);
}

void put_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& o, std::uint64_t v) { o.write(reinterpret_cast<const char*>(&v), 8); }
void put_i32(std::ostream& o, std::int32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
void put_f64(std::ostream& o, double v) { o.write(reinterpret_cast<const char*>(&v), 8); }

void put_str(std::ostream& o, const std::string& s) {
  put_u64(o, s.size());
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_list(std::ostream& o, const std::vector<std::string>& v) {
  put_u64(o, v.size());
  for (const auto& s : v) put_str(o, s);
}

std::uint32_t get_u32(std::istream& i) {
  std::uint32_t v;
  if (!i.read(reinterpret_cast<char*>(&v), 4)) corrupt("unexpected end of file");
  return v;
}

std::uint64_t get_u64(std::istream& i) {
  std::uint64_t v;
  if (!i.read(reinterpret_cast<char*>(&v), 8)) corrupt("unexpected end of file");
  return v;
}

std::int32_t get_i32(std::istream& i) {
  std::int32_t v;
  if (!i.read(reinterpret_cast<char*>(&v), 4)) corrupt("unexpected end of file");
  return v;
}

double get_f64(std::istream& i) {
  double v;
  if (!i.read(reinterpret_cast<char*>(&v), 8)) corrupt("unexpected end of file");
  return v;
}

std::string get_str(std::istream& i) {
  const std::uint64_t len = get_u64(i);
  if (len > (1u << 20)) corrupt("implausible string length");
  std::string s(len, '\0');
  if (len && !i.read(s.data(), static_cast<std::streamsize>(len)))
    corrupt("unexpected end of file");
  return s;
}

std::vector<std::string> get_list(std::istream& i) {
  const std::uint64_t n = get_u64(i);
  if (n > (1u << 24)) corrupt("implausible list length");
  std::vector<std::string> v;
  v.reserve(n);
  for (std::uint64_t j = 0; j < n; ++j) v.push_back(get_str(i));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const Vocabs& vocabs) {
  const ModelConfig& c = model.cfg();
  if (vocabs.tokens.size() != c.vocab_size || vocabs.slots.size() != c.num_slots ||
      vocabs.intents.size() != c.num_intents)
    throw ValueError("save_checkpoint: vocab sizes disagree with the model config");
  std::ofstream o(path, std::ios::binary);
  if (!o) throw ValueError("cannot write checkpoint " + path);
  o.write(kMagic, 8);
  put_u32(o, kVersion);
  put_u64(o, c.d_model);
  put_u64(o, c.d_ff);
  put_u64(o, c.heads);
  put_u64(o, c.encoder_layers);
  put_u64(o, c.ran_layers);
  put_u64(o, c.decoder_layers);
  put_i32(o, c.rel_clip);
  put_f64(o, c.dropout);
  put_u64(o, c.vocab_size);
  put_u64(o, c.num_slots);
  put_u64(o, c.num_intents);
  const std::uint32_t flags = (c.no_sr ? 1u : 0u) | (c.no_ran ? 2u : 0u) | (c.no_aux ? 4u : 0u) |
                              (c.basic_model ? 8u : 0u);
  put_u32(o, flags);
  put_i32(o, vocabs.pad_id);
  put_i32(o, vocabs.unk_id);
  put_list(o, vocabs.tokens);
  put_list(o, vocabs.slots);
  put_list(o, vocabs.intents);
  put_u64(o, model.params().size());
  for (const auto& [name, p] : model.params()) {
    put_str(o, name);
    const Tensor& t = p->value;
    put_u32(o, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d = 0; d < t.rank(); ++d) put_u64(o, t.dim(d));
    o.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!o) throw ValueError("write failure on checkpoint " + path);
}

std::pair<Model, Vocabs> load_checkpoint(const std::string& path) {
  std::ifstream i(path, std::ios::binary);
  if (!i) throw ValueError("cannot open checkpoint " + path);
  char magic[8];
  if (!i.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) corrupt("bad magic");
  if (get_u32(i) != kVersion) corrupt("unsupported version");

  ModelConfig c;
  c.d_model = get_u64(i);
  c.d_ff = get_u64(i);
  c.heads = get_u64(i);
  c.encoder_layers = get_u64(i);
  c.ran_layers = get_u64(i);
  c.decoder_layers = get_u64(i);
  c.rel_clip = get_i32(i);
  c.dropout = get_f64(i);
  c.vocab_size = get_u64(i);
  c.num_slots = get_u64(i);
  c.num_intents = get_u64(i);
  const std::uint32_t flags = get_u32(i);
  c.no_sr = flags & 1u;
  c.no_ran = flags & 2u;
  c.no_aux = flags & 4u;
  c.basic_model = flags & 8u;

  Vocabs v;
  v.pad_id = get_i32(i);
  v.unk_id = get_i32(i);
  v.tokens = get_list(i);
  v.slots = get_list(i);
  v.intents = get_list(i);
  if (v.tokens.size() != c.vocab_size || v.slots.size() != c.num_slots ||
      v.intents.size() != c.num_intents)
    corrupt("vocab lists disagree with header sizes");
  for (std::size_t j = 0; j < v.tokens.size(); ++j) v.token_to_id[v.tokens[j]] = static_cast<int>(j);
  for (std::size_t j = 0; j < v.slots.size(); ++j) v.slot_to_id[v.slots[j]] = static_cast<int>(j);
  for (std::size_t j = 0; j < v.intents.size(); ++j)
    v.intent_to_id[v.intents[j]] = static_cast<int>(j);
  if (v.token_to_id.size() != v.tokens.size() || v.slot_to_id.size() != v.slots.size() ||
      v.intent_to_id.size() != v.intents.size())
    corrupt("duplicate vocab entries");

  Model model(c, 0);
  const std::uint64_t n_params = get_u64(i);
  if (n_params != model.params().size())
    corrupt("parameter count " + std::to_string(n_params) + " does not match the architecture (" +
            std::to_string(model.params().size()) + " expected)");
  std::vector<std::string> seen;
  for (std::uint64_t j = 0; j < n_params; ++j) {
    const std::string name = get_str(i);
    if (std::find(seen.begin(), seen.end(), name) != seen.end())
      corrupt("parameter " + name + " appears twice");
    seen.push_back(name);
    Var p = model.param(name);  // throws on unknown name
    const std::uint32_t rank = get_u32(i);
    if (rank != p->value.rank()) corrupt("rank mismatch for " + name);
    for (std::size_t d = 0; d < rank; ++d)
      if (get_u64(i) != p->value.dim(d)) corrupt("shape mismatch for " + name);
    if (!i.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.numel() * sizeof(double))))
      corrupt("unexpected end of file in values of " + name);
    check_finite(p->value, "checkpoint load");
  }
  i.peek();
  if (!i.eof()) corrupt("trailing bytes after last parameter");
  return {std::move(model), std::move(v)};
}

}  // namespace ssran
