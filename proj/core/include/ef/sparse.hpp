/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_SPARSE_HPP_
#define EF_SPARSE_HPP_

#include <cstddef>
#include <vector>

namespace ef {

/// Sparse vector with strictly increasing indices and no explicit zeros.
/// Values may exceed 1 (multi-hot counts).
struct SparseVector {
  std::vector<int> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }

  /// Throws std::invalid_argument when indices are unsorted, duplicated,
  /// negative, >= dim, or when a value is non-finite or exactly zero.
  void validate(int dim) const;

  bool operator==(const SparseVector&) const = default;
};

}  // namespace ef

#endif  // EF_SPARSE_HPP_
