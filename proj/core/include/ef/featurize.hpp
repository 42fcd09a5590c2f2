/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_FEATURIZE_HPP_
#define EF_FEATURIZE_HPP_

#include <string_view>

#include "ef/sparse.hpp"

namespace ef {

/// Hashes a text string into a sparse multi-hot vector of tri-letter grams.
///
/// The text is lowercased and split on whitespace; each word is padded with
/// `#` on both ends and every 3-character window is hashed (FNV-1a 64) mod
/// `dim`. Repeated grams accumulate counts, so values can exceed 1.
SparseVector triletter_featurize(std::string_view text, int dim);

}  // namespace ef

#endif  // EF_FEATURIZE_HPP_
