// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssran/tensor.hpp"

namespace ssran {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Utterance {
  std::vector<std::string> tokens;
  std::vector<std::string> slots;
  std::vector<std::string> intents;  // deduplicated, first-seen order
};

inline constexpr int kChunkO = 0;
inline constexpr int kChunkB = 1;
inline constexpr int kChunkI = 2;
inline const std::vector<std::string> kChunkNames{"O", "B", "I"};

struct Vocabs {
  std::vector<std::string> tokens;  // id 0 = PAD, id 1 = UNK
  std::vector<std::string> slots;
  std::vector<std::string> intents;
  std::unordered_map<std::string, int> token_to_id;
  std::unordered_map<std::string, int> slot_to_id;
  std::unordered_map<std::string, int> intent_to_id;
  int pad_id = 0;
  int unk_id = 1;

  int token_id(const std::string& t) const;  // falls back to unk_id
  int slot_id(const std::string& s) const;   // unseen label throws
  int intent_id(const std::string& s) const; // unseen label throws
};

inline const std::string kPadToken = "<PAD>";
inline const std::string kUnkToken = "<UNK>";

struct Batch {
  std::vector<std::vector<int>> token_ids;       // [B][n_max]
  std::vector<std::vector<int>> slot_ids;        // [B][n_max]
  std::vector<std::vector<int>> chunk_ids;       // [B][n_max]
  std::vector<std::vector<double>> intent_multihot;  // [B][d_i]
  std::vector<int> intent_count;                 // [B]
  std::vector<Mask> mask;                        // [B][n_max]
  std::vector<std::size_t> lengths;              // [B]

  std::size_t size() const { return token_ids.size(); }
  std::size_t n_max() const { return token_ids.empty() ? 0 : token_ids[0].size(); }
};

std::vector<Utterance> parse_corpus(const std::string& raw_text);
std::vector<Utterance> load_corpus_file(const std::string& path);

Vocabs build_vocabs(const std::vector<Utterance>& train);

std::vector<int> derive_sct_labels(const std::vector<std::string>& slots);
int derive_inp_label(std::size_t intent_count, std::size_t d_n);

Batch encode_batch(const std::vector<Utterance>& utts, const Vocabs& vocabs, std::size_t n_max);

// Removes utterances longer than max_len; returns how many were removed.
std::size_t filter_overlong(std::vector<Utterance>& utts, std::size_t max_len);

void write_vocab_file(const std::string& path, const std::vector<std::string>& entries);
std::vector<std::string> read_vocab_file(const std::string& path);

}  // namespace ssran
