// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <tuple>
#include <vector>

#include "ssran/data.hpp"
#include "ssran/model.hpp"
#include "ssran/tensor.hpp"

namespace ssran {

enum class DecodeMode { kAuto, kTopk, kThreshold };

// kAuto picks threshold decoding for variants whose intent-count head is
// untrained (aux loss off), top-k otherwise.
DecodeMode resolve_decode_mode(DecodeMode mode, const ModelConfig& cfg);
const char* decode_mode_name(DecodeMode mode);

struct Prediction {
  std::vector<std::string> slots;
  std::vector<std::string> intents;  // ascending label-id order
  int k = 0;
  Tensor scope;  // filled only on request; empty otherwise
};

struct Chunk {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;
  auto operator<=>(const Chunk&) const = default;
};

std::vector<std::string> decode_slots(const Tensor& slot_logits, const Mask& mask,
                                      const Vocabs& vocabs);
std::vector<std::string> decode_intents_topk(const Tensor& intent_logits, const Tensor& inp_logits,
                                             const Mask& mask, const Vocabs& vocabs);
std::vector<std::string> decode_intents_threshold(const Tensor& intent_logits, const Mask& mask,
                                                  double threshold, const Vocabs& vocabs);

// strict=false opens a chunk at an orphan I- label (conlleval behavior);
// strict=true ignores orphan I- labels instead.
std::vector<Chunk> extract_chunks(const std::vector<std::string>& slots, bool strict = false);

struct PrSummary {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

PrSummary slot_f1(const std::vector<std::vector<std::string>>& gold,
                  const std::vector<std::vector<std::string>>& pred, bool strict = false);
double intent_accuracy(const std::vector<std::vector<std::string>>& gold,
                       const std::vector<std::vector<std::string>>& pred);
double overall_accuracy(const std::vector<Utterance>& gold, const std::vector<Prediction>& preds);
double uncoordinated_slot_rate(const std::vector<std::vector<std::string>>& preds);

struct MetricReport {
  double intent_accuracy = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double slot_f1 = 0.0;
  double overall_accuracy = 0.0;
  double uncoordinated_slot_rate = 0.0;
};

Prediction predict_utterance(const Model& model, const std::vector<std::string>& tokens,
                             const Vocabs& vocabs, DecodeMode mode, double threshold,
                             bool want_scope = false);
std::vector<Prediction> predict_corpus(const Model& model, const std::vector<Utterance>& utts,
                                       const Vocabs& vocabs, DecodeMode mode, double threshold,
                                       bool want_scope = false);
MetricReport score_predictions(const std::vector<Utterance>& gold,
                               const std::vector<Prediction>& preds);
MetricReport evaluate(const Model& model, const std::vector<Utterance>& utts, const Vocabs& vocabs,
                      DecodeMode mode, double threshold);

std::string format_report_table(const MetricReport& r);
std::string format_report_kv(const MetricReport& r);

// One line per utterance: "token:slot token:slot<TAB>intentA#intentB".
void write_predictions(std::ostream& out, const std::vector<Utterance>& inputs,
                       const std::vector<Prediction>& preds);

}  // namespace ssran
