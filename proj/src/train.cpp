// SPDX-License-Identifier: Apache-2.0
#include "ssran/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ssran/ops.hpp"

namespace ssran {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ValueError("train config: lr must be positive");
  if (batch_size == 0) throw ValueError("train config: batch_size must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) throw ValueError("train config: alpha must be in [0,1]");
  if (lambda < 0.0) throw ValueError("train config: lambda must be >= 0");
  if (epochs == 0) throw ValueError("train config: epochs must be >= 1");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw ValueError("train config: threshold must be in (0,1)");
}

double effective_lambda(const ModelConfig& mcfg, double lambda) {
  return (mcfg.no_aux || mcfg.basic_model) ? 0.0 : lambda;
}

Adam::Adam(std::vector<std::pair<std::string, Var>>& params, double lr, double beta1, double beta2,
           double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    auto& val = p->value;
    const bool has_grad = p->grad.numel() != 0;
    for (std::size_t j = 0; j < val.numel(); ++j) {
      const double g = has_grad ? p->grad.at(j) : 0.0;
      double& m = m_[i].at(j);
      double& v = v_[i].at(j);
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g * g;
      val.at(j) -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p->zero_grad();
}

double clip_grad_norm(std::vector<std::pair<std::string, Var>>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params)
    for (std::size_t j = 0; j < p->grad.numel(); ++j) sq += p->grad.at(j) * p->grad.at(j);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, p] : params)
      for (std::size_t j = 0; j < p->grad.numel(); ++j) p->grad.at(j) *= s;
  }
  return norm;
}

namespace {

struct EncodedUtt {
  std::vector<int> ids, slot_ids, chunk_ids;
  std::vector<double> multihot;
  int inp_label = 0;
  Mask mask;
};

std::vector<EncodedUtt> encode_all(const std::vector<Utterance>& utts, const Vocabs& vocabs) {
  std::vector<EncodedUtt> out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    EncodedUtt e;
    const std::size_t n = u.tokens.size();
    e.mask.assign(n, 1);
    for (std::size_t j = 0; j < n; ++j) {
      e.ids.push_back(vocabs.token_id(u.tokens[j]));
      e.slot_ids.push_back(vocabs.slot_id(u.slots[j]));
    }
    e.chunk_ids = derive_sct_labels(u.slots);
    e.multihot.assign(vocabs.intents.size(), 0.0);
    for (const auto& name : u.intents)
      e.multihot[static_cast<std::size_t>(vocabs.intent_id(name))] = 1.0;
    e.inp_label = derive_inp_label(u.intents.size(), vocabs.intents.size());
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::vector<std::size_t>> length_bucketed_batches(const std::vector<EncodedUtt>& utts,
                                                              std::size_t batch_size) {
  std::vector<std::size_t> order(utts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return utts[a].ids.size() < utts[b].ids.size();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + i, order.begin() + end);
  }
  return batches;
}

// Portable Fisher-Yates; std::shuffle's draw sequence varies by standard
// library, which would break cross-toolchain reproducibility of the history.
template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

FitResult fit(Model& model, const std::vector<Utterance>& train_utts,
              const std::vector<Utterance>& dev_utts, const Vocabs& vocabs, const TrainConfig& cfg,
              std::ostream* log) {
  cfg.validate();
  if (train_utts.empty() || dev_utts.empty()) throw ValueError("fit: empty train or dev split");

  const auto train_enc = encode_all(train_utts, vocabs);
  const double lam = effective_lambda(model.cfg(), cfg.lambda);
  auto batches = length_bucketed_batches(train_enc, cfg.batch_size);
  std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  std::mt19937_64 dropout_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 2);

  Adam opt(model.params(), cfg.lr);
  FitResult res;
  std::vector<Tensor> best_params;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_vec(batches, shuffle_rng);
    double sum_total = 0.0, sum_sf = 0.0, sum_id = 0.0, sum_inp = 0.0, sum_sct = 0.0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      try {
        opt.zero_grad();
        Var batch_sum;
        for (const auto ui : batches[bi]) {
          const auto& e = train_enc[ui];
          ModelOutput out = model.forward(e.ids, e.mask, true, &dropout_rng);
          LossParts parts = utterance_loss(out, e.slot_ids, e.multihot, e.inp_label, e.chunk_ids,
                                           e.mask, cfg.alpha, lam);
          sum_sf += parts.sf->value.item();
          sum_id += parts.id->value.item();
          sum_inp += parts.inp->value.item();
          sum_sct += parts.sct->value.item();
          sum_total += parts.total->value.item();
          batch_sum = batch_sum ? ops::add(batch_sum, parts.total) : parts.total;
        }
        Var batch_loss = ops::scale(batch_sum, 1.0 / static_cast<double>(batches[bi].size()));
        if (!std::isfinite(batch_loss->value.item()))
          throw ValueError("non-finite batch loss");
        backward(batch_loss);
        clip_grad_norm(model.params(), cfg.clip_norm);
        opt.step();
      } catch (const ValueError& e) {
        throw ValueError("divergence at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(bi) + ": " + e.what());
      }
    }

    const double inv_n = 1.0 / static_cast<double>(train_enc.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = sum_total * inv_n;
    rec.loss_sf = sum_sf * inv_n;
    rec.loss_id = sum_id * inv_n;
    rec.loss_inp = sum_inp * inv_n;
    rec.loss_sct = sum_sct * inv_n;

    const MetricReport dev = evaluate(model, dev_utts, vocabs, cfg.decode, cfg.threshold);
    rec.dev_intent_acc = dev.intent_accuracy;
    rec.dev_slot_f1 = dev.slot_f1;
    rec.dev_overall_acc = dev.overall_accuracy;
    res.history.push_back(rec);

    if (dev.overall_accuracy > res.best_dev_overall) {
      res.best_dev_overall = dev.overall_accuracy;
      res.best_epoch = epoch;
      best_params.clear();
      for (const auto& [name, p] : model.params()) best_params.push_back(p->value);
    }

    if (log) {
      char buf[320];
      std::snprintf(buf, sizeof(buf),
                    "epoch %zu loss %.4f sf %.4f id %.4f inp %.4f sct %.4f "
                    "dev_intent %.4f dev_f1 %.4f dev_overall %.4f",
                    epoch, rec.loss, rec.loss_sf, rec.loss_id, rec.loss_inp, rec.loss_sct,
                    rec.dev_intent_acc, rec.dev_slot_f1, rec.dev_overall_acc);
      *log << buf << std::endl;
    }

    if (cfg.stop_train_overall > 0.0) {
      const MetricReport tr = (&train_utts == &dev_utts)
                                  ? dev
                                  : evaluate(model, train_utts, vocabs, cfg.decode, cfg.threshold);
      if (tr.overall_accuracy >= cfg.stop_train_overall) {
        if (log)
          *log << "train overall accuracy " << tr.overall_accuracy << " reached target, stopping"
               << std::endl;
        break;
      }
    }
  }

  if (!best_params.empty()) {
    auto& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second->value = best_params[i];
  }
  return res;
}

std::string format_history(const FitResult& res, const std::string& config_header) {
  std::ostringstream out;
  std::istringstream hdr(config_header);
  std::string line;
  while (std::getline(hdr, line)) out << "# " << line << '\n';
  out << "# best_epoch=" << res.best_epoch << '\n';
  out << "# columns: epoch\tloss\tloss_sf\tloss_id\tloss_inp\tloss_sct\tdev_intent_acc\t"
         "dev_slot_f1\tdev_overall_acc\n";
  char buf[400];
  for (const auto& r : res.history) {
    std::snprintf(buf, sizeof(buf),
                  "%zu\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", r.epoch, r.loss,
                  r.loss_sf, r.loss_id, r.loss_inp, r.loss_sct, r.dev_intent_acc, r.dev_slot_f1,
                  r.dev_overall_acc);
    out << buf;
  }
  return out.str();
}

void write_history(const std::string& path, const FitResult& res,
                   const std::string& config_header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot write history file " + path);
  out << format_history(res, config_header);
}

}  // namespace ssran
