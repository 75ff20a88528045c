// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssran/data.hpp"

namespace ssran {

// Deterministic toy multi-intent corpus: each utterance chains one or two
// single-intent fragments with "and", mirroring how the multi-intent SLU
// corpora are built. Four intents, seven slot labels, ~40 token types.
std::vector<Utterance> synthetic_corpus(std::size_t count, std::uint64_t seed,
                                        double two_intent_ratio = 0.6);

// Renders utterances in the block corpus format (token-slot lines, then the
// '#'-joined intent line, blocks separated by blank lines).
std::string render_corpus(const std::vector<Utterance>& utts);

}  // namespace ssran
