// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "ssran/autograd.hpp"
#include "ssran/model.hpp"

namespace ssran {

// All losses are per-utterance sums over unmasked positions; batch averaging
// happens in the training loop.
Var loss_sf(const Var& slot_logits, const std::vector<int>& slot_ids, const Mask& mask);
Var loss_id(const Var& intent_logits, const std::vector<double>& intent_multihot,
            const Mask& mask);
Var loss_slu(const Var& l_sf, const Var& l_id, double alpha);
Var loss_inp(const Var& inp_logits, int inp_label);
Var loss_sct(const Var& sct_probs, const std::vector<int>& chunk_ids, const Mask& mask);
Var loss_total(const Var& l_slu, const Var& l_inp, const Var& l_sct, double lambda);

struct LossParts {
  Var sf, id, slu, inp, sct, total;
};

LossParts utterance_loss(const ModelOutput& out, const std::vector<int>& slot_ids,
                         const std::vector<double>& intent_multihot, int inp_label,
                         const std::vector<int>& chunk_ids, const Mask& mask, double alpha,
                         double lambda);

}  // namespace ssran
