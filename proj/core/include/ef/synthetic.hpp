/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_SYNTHETIC_HPP_
#define EF_SYNTHETIC_HPP_

#include <cstdint>

#include "ef/dataset.hpp"

namespace ef {

struct SyntheticConfig {
  int n_samples = 1000;
  int n_sparse_dims = 1000;
  int n_dense_dims = 5;
  /// Number of literals in the planted conjunction. Depth 1 uses a single
  /// dense threshold; every extra literal requires one planted sparse index.
  int interaction_depth = 3;
  double noise = 0.0;  // label flip probability
  std::uint64_t seed = 0;

  void validate() const;
};

/// Generates a labeled dataset from a planted rule: a conjunction of a dense
/// threshold and sparse-index presences, so that cross-features matter.
/// Deterministic for a fixed seed; the planted rule itself is seed-dependent.
Dataset gen_synthetic(const SyntheticConfig& cfg);

}  // namespace ef

#endif  // EF_SYNTHETIC_HPP_
