// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssran/data.hpp"
#include "ssran/losses.hpp"
#include "ssran/metrics.hpp"
#include "ssran/model.hpp"

namespace ssran {

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch_size = 32;
  double alpha = 0.65;
  double lambda = 0.3;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  // Early stop once train overall accuracy reaches this value; off when < 0.
  double stop_train_overall = -1.0;
  DecodeMode decode = DecodeMode::kAuto;
  double threshold = 0.5;

  void validate() const;
};

class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Var>>& params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Var>>& params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

// Scales all gradients so their global L2 norm is at most max_norm;
// returns the norm before clipping.
double clip_grad_norm(std::vector<std::pair<std::string, Var>>& params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0, loss_sf = 0.0, loss_id = 0.0, loss_inp = 0.0, loss_sct = 0.0;
  double dev_intent_acc = 0.0, dev_slot_f1 = 0.0, dev_overall_acc = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_overall = -1.0;
};

// Trains with Adam, evaluates dev overall accuracy each epoch, and leaves the
// model holding the best-scoring parameters. log may be null.
FitResult fit(Model& model, const std::vector<Utterance>& train_utts,
              const std::vector<Utterance>& dev_utts, const Vocabs& vocabs, const TrainConfig& cfg,
              std::ostream* log);

// Tab-separated history, one row per epoch, preceded by '#' comment lines
// carrying the resolved configuration.
void write_history(const std::string& path, const FitResult& res,
                   const std::string& config_header);
std::string format_history(const FitResult& res, const std::string& config_header);

// The aux-loss weight actually used in training: 0 when the variant removes
// the auxiliary tasks.
double effective_lambda(const ModelConfig& mcfg, double lambda);

}  // namespace ssran
