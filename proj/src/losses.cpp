// SPDX-License-Identifier: Apache-2.0
#include "ssran/losses.hpp"

#include "ssran/ops.hpp"

namespace ssran {

Var loss_sf(const Var& slot_logits, const std::vector<int>& slot_ids, const Mask& mask) {
  return ops::ce_rows_sum(slot_logits, slot_ids, mask);
}

Var loss_id(const Var& intent_logits, const std::vector<double>& intent_multihot,
            const Mask& mask) {
  return ops::bce_logits_rows_sum(intent_logits, intent_multihot, mask);
}

Var loss_slu(const Var& l_sf, const Var& l_id, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw ValueError("loss_slu: alpha must be in [0,1]");
  return ops::add(ops::scale(l_sf, alpha), ops::scale(l_id, 1.0 - alpha));
}

Var loss_inp(const Var& inp_logits, int inp_label) { return ops::ce_single(inp_logits, inp_label); }

Var loss_sct(const Var& sct_probs, const std::vector<int>& chunk_ids, const Mask& mask) {
  return ops::nll_probs_rows_sum(sct_probs, chunk_ids, mask);
}

Var loss_total(const Var& l_slu, const Var& l_inp, const Var& l_sct, double lambda) {
  if (lambda < 0.0) throw ValueError("loss_total: lambda must be >= 0");
  return ops::add(l_slu, ops::scale(ops::add(l_inp, l_sct), lambda));
}

LossParts utterance_loss(const ModelOutput& out, const std::vector<int>& slot_ids,
                         const std::vector<double>& intent_multihot, int inp_label,
                         const std::vector<int>& chunk_ids, const Mask& mask, double alpha,
                         double lambda) {
  LossParts p;
  p.sf = loss_sf(out.slot_logits, slot_ids, mask);
  p.id = loss_id(out.intent_logits, intent_multihot, mask);
  p.slu = loss_slu(p.sf, p.id, alpha);
  p.inp = loss_inp(out.inp_logits, inp_label);
  p.sct = loss_sct(out.sct_probs, chunk_ids, mask);
  p.total = loss_total(p.slu, p.inp, p.sct, lambda);
  return p;
}

}  // namespace ssran
