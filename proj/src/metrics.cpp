// SPDX-License-Identifier: Apache-2.0
#include "ssran/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace ssran {

namespace {

std::size_t argmax_row(const double* v, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (v[j] > v[best]) best = j;  // strict >, so the lowest index wins ties
  return best;
}

bool same_set(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> sa(a), sb(b);
  std::sort(sa.begin(), sa.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  std::sort(sb.begin(), sb.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  return sa == sb;
}

bool has_uncoordinated(const std::vector<std::string>& slots) {
  for (std::size_t j = 0; j < slots.size(); ++j) {
    const auto& s = slots[j];
    if (s.size() < 2 || s[0] != 'I') continue;
    const std::string type = s.substr(2);
    if (j == 0) return true;
    const auto& prev = slots[j - 1];
    const bool ok = prev.size() > 2 && (prev[0] == 'B' || prev[0] == 'I') &&
                    prev.compare(2, std::string::npos, type) == 0;
    if (!ok) return true;
  }
  return false;
}

}  // namespace

DecodeMode resolve_decode_mode(DecodeMode mode, const ModelConfig& cfg) {
  if (mode != DecodeMode::kAuto) return mode;
  return (cfg.no_aux || cfg.basic_model) ? DecodeMode::kThreshold : DecodeMode::kTopk;
}

const char* decode_mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kTopk: return "topk";
    case DecodeMode::kThreshold: return "threshold";
    default: return "auto";
  }
}

std::vector<std::string> decode_slots(const Tensor& slot_logits, const Mask& mask,
                                      const Vocabs& vocabs) {
  const std::size_t n = slot_logits.rows(), d = slot_logits.cols();
  if (mask.size() != n) throw ShapeError("decode_slots: mask length mismatch");
  if (d != vocabs.slots.size()) throw ShapeError("decode_slots: slot vocab size mismatch");
  std::vector<std::string> out;
  for (std::size_t j = 0; j < n; ++j) {
    if (!mask[j]) continue;
    out.push_back(vocabs.slots[argmax_row(slot_logits.data() + j * d, d)]);
  }
  return out;
}

std::vector<std::string> decode_intents_topk(const Tensor& intent_logits, const Tensor& inp_logits,
                                             const Mask& mask, const Vocabs& vocabs) {
  const std::size_t n = intent_logits.rows(), d = intent_logits.cols();
  if (d != vocabs.intents.size()) throw ShapeError("decode_intents_topk: intent vocab mismatch");
  const std::size_t k =
      argmax_row(inp_logits.data(), inp_logits.numel()) + 1;  // class index encodes count - 1
  std::vector<double> score(d, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!mask[j]) continue;
    const double* row = intent_logits.data() + j * d;
    double mx = row[0];
    for (std::size_t c = 1; c < d; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    std::vector<double> e(d);
    for (std::size_t c = 0; c < d; ++c) {
      e[c] = std::exp(row[c] - mx);
      sum += e[c];
    }
    for (std::size_t c = 0; c < d; ++c) score[c] += e[c] / sum;
  }
  std::vector<std::size_t> order(d);
  for (std::size_t c = 0; c < d; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  const std::size_t take = std::min(k, d);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + take);
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::string> out;
  for (auto c : chosen) out.push_back(vocabs.intents[c]);
  return out;
}

std::vector<std::string> decode_intents_threshold(const Tensor& intent_logits, const Mask& mask,
                                                  double threshold, const Vocabs& vocabs) {
  const std::size_t n = intent_logits.rows(), d = intent_logits.cols();
  if (d != vocabs.intents.size())
    throw ShapeError("decode_intents_threshold: intent vocab mismatch");
  std::vector<double> mean(d, 0.0);
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!mask[j]) continue;
    ++count;
    const double* row = intent_logits.data() + j * d;
    for (std::size_t c = 0; c < d; ++c) mean[c] += 1.0 / (1.0 + std::exp(-row[c]));
  }
  if (count == 0) throw ValueError("decode_intents_threshold: all positions masked");
  for (auto& m : mean) m /= static_cast<double>(count);
  std::vector<std::string> out;
  for (std::size_t c = 0; c < d; ++c)
    if (mean[c] > threshold) out.push_back(vocabs.intents[c]);
  if (out.empty()) out.push_back(vocabs.intents[argmax_row(mean.data(), d)]);
  return out;
}

std::vector<Chunk> extract_chunks(const std::vector<std::string>& slots, bool strict) {
  std::vector<Chunk> out;
  bool open = false;
  Chunk cur;
  auto close = [&]() {
    if (open) out.push_back(cur);
    open = false;
  };
  for (std::size_t j = 0; j < slots.size(); ++j) {
    const auto& s = slots[j];
    if (s.size() > 2 && s[0] == 'B' && s[1] == '-') {
      close();
      cur = {s.substr(2), j, j};
      open = true;
    } else if (s.size() > 2 && s[0] == 'I' && s[1] == '-') {
      const std::string type = s.substr(2);
      if (open && cur.type == type) {
        cur.end = j;
      } else {
        close();
        if (!strict) {
          cur = {type, j, j};
          open = true;
        }
      }
    } else {
      close();
    }
  }
  close();
  return out;
}

PrSummary slot_f1(const std::vector<std::vector<std::string>>& gold,
                  const std::vector<std::vector<std::string>>& pred, bool strict) {
  if (gold.size() != pred.size()) throw ShapeError("slot_f1: corpus size mismatch");
  std::size_t tp = 0, n_gold = 0, n_pred = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size())
      throw ShapeError("slot_f1: length mismatch at utterance " + std::to_string(i));
    auto g = extract_chunks(gold[i], strict);
    auto p = extract_chunks(pred[i], strict);
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    std::vector<Chunk> inter;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(inter));
    tp += inter.size();
    n_gold += g.size();
    n_pred += p.size();
  }
  PrSummary s;
  s.precision = n_pred ? static_cast<double>(tp) / static_cast<double>(n_pred) : 0.0;
  s.recall = n_gold ? static_cast<double>(tp) / static_cast<double>(n_gold) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                                        : 0.0;
  return s;
}

double intent_accuracy(const std::vector<std::vector<std::string>>& gold,
                       const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size()) throw ShapeError("intent_accuracy: corpus size mismatch");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (same_set(gold[i], pred[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double overall_accuracy(const std::vector<Utterance>& gold, const std::vector<Prediction>& preds) {
  if (gold.size() != preds.size()) throw ShapeError("overall_accuracy: corpus size mismatch");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i].slots == preds[i].slots && same_set(gold[i].intents, preds[i].intents)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double uncoordinated_slot_rate(const std::vector<std::vector<std::string>>& preds) {
  if (preds.empty()) return 0.0;
  std::size_t bad = 0;
  for (const auto& s : preds)
    if (has_uncoordinated(s)) ++bad;
  return static_cast<double>(bad) / static_cast<double>(preds.size());
}

Prediction predict_utterance(const Model& model, const std::vector<std::string>& tokens,
                             const Vocabs& vocabs, DecodeMode mode, double threshold,
                             bool want_scope) {
  NoGradGuard no_grad;
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocabs.token_id(t));
  Mask mask(tokens.size(), 1);
  ModelOutput out = model.forward(ids, mask);
  const DecodeMode m = resolve_decode_mode(mode, model.cfg());
  Prediction p;
  p.slots = decode_slots(out.slot_logits->value, mask, vocabs);
  if (m == DecodeMode::kTopk)
    p.intents = decode_intents_topk(out.intent_logits->value, out.inp_logits->value, mask, vocabs);
  else
    p.intents = decode_intents_threshold(out.intent_logits->value, mask, threshold, vocabs);
  p.k = static_cast<int>(p.intents.size());
  if (want_scope) {
    if (!out.scope)
      throw ValueError("scope export requires the scope recognizer (disabled in this model)");
    p.scope = out.scope->value;
  }
  return p;
}

std::vector<Prediction> predict_corpus(const Model& model, const std::vector<Utterance>& utts,
                                       const Vocabs& vocabs, DecodeMode mode, double threshold,
                                       bool want_scope) {
  std::vector<Prediction> out;
  out.reserve(utts.size());
  for (const auto& u : utts)
    out.push_back(predict_utterance(model, u.tokens, vocabs, mode, threshold, want_scope));
  return out;
}

MetricReport score_predictions(const std::vector<Utterance>& gold,
                               const std::vector<Prediction>& preds) {
  std::vector<std::vector<std::string>> gold_slots, pred_slots, gold_intents, pred_intents;
  for (const auto& u : gold) {
    gold_slots.push_back(u.slots);
    gold_intents.push_back(u.intents);
  }
  for (const auto& p : preds) {
    pred_slots.push_back(p.slots);
    pred_intents.push_back(p.intents);
  }
  MetricReport r;
  const PrSummary s = slot_f1(gold_slots, pred_slots);
  r.slot_precision = s.precision;
  r.slot_recall = s.recall;
  r.slot_f1 = s.f1;
  r.intent_accuracy = intent_accuracy(gold_intents, pred_intents);
  r.overall_accuracy = overall_accuracy(gold, preds);
  r.uncoordinated_slot_rate = uncoordinated_slot_rate(pred_slots);
  return r;
}

MetricReport evaluate(const Model& model, const std::vector<Utterance>& utts, const Vocabs& vocabs,
                      DecodeMode mode, double threshold) {
  return score_predictions(utts, predict_corpus(model, utts, vocabs, mode, threshold));
}

std::string format_report_table(const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "metric                    value\n"
                "------------------------  ------\n"
                "intent accuracy           %.4f\n"
                "slot F1                   %.4f\n"
                "slot precision            %.4f\n"
                "slot recall               %.4f\n"
                "overall accuracy          %.4f\n"
                "uncoordinated slot rate   %.4f\n",
                r.intent_accuracy, r.slot_f1, r.slot_precision, r.slot_recall, r.overall_accuracy,
                r.uncoordinated_slot_rate);
  return buf;
}

std::string format_report_kv(const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "intent_accuracy=%.6f\n"
                "slot_f1=%.6f\n"
                "slot_precision=%.6f\n"
                "slot_recall=%.6f\n"
                "overall_accuracy=%.6f\n"
                "uncoordinated_slot_rate=%.6f\n",
                r.intent_accuracy, r.slot_f1, r.slot_precision, r.slot_recall, r.overall_accuracy,
                r.uncoordinated_slot_rate);
  return buf;
}

void write_predictions(std::ostream& out, const std::vector<Utterance>& inputs,
                       const std::vector<Prediction>& preds) {
  if (inputs.size() != preds.size()) throw ShapeError("write_predictions: size mismatch");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& toks = inputs[i].tokens;
    const auto& p = preds[i];
    if (toks.size() != p.slots.size())
      throw ShapeError("write_predictions: slot count mismatch at utterance " + std::to_string(i));
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (j) out << ' ';
      out << toks[j] << ':' << p.slots[j];
    }
    out << '\t';
    for (std::size_t j = 0; j < p.intents.size(); ++j) {
      if (j) out << '#';
      out << p.intents[j];
    }
    out << '\n';
  }
}

}  // namespace ssran
