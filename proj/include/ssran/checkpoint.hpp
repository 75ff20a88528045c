// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>

#include "ssran/data.hpp"
#include "ssran/model.hpp"

namespace ssran {

// Binary checkpoint: magic + version, config header, the three vocab lists,
// then every named parameter with shape and little-endian f64 values.
// Layout details in docs/checkpoint-format.md.
void save_checkpoint(const std::string& path, const Model& model, const Vocabs& vocabs);

// Rebuilds the model from the stored config and fills every parameter by
// name. Truncated or malformed files raise ValueError without partial state.
std::pair<Model, Vocabs> load_checkpoint(const std::string& path);

}  // namespace ssran
