/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_DATASET_HPP_
#define EF_DATASET_HPP_

#include <iosfwd>
#include <variant>
#include <vector>

#include "ef/schema.hpp"
#include "ef/sparse.hpp"

namespace ef {

/// One schema group's worth of raw input.
using Field = std::variant<SparseVector, std::vector<double>>;

struct Sample {
  int label = 0;  // binary {0,1}
  std::vector<Field> fields;  // one per schema group, in schema order

  const SparseVector& sparse(int group) const;
  const std::vector<double>& dense(int group) const;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

/// Parses the tab-separated sample format:
///   <label><TAB><field1><TAB>...<TAB><fieldK>
/// Sparse field: space-separated `idx:val` pairs (may be empty).
/// Dense field: comma-separated decimals, one per dimension.
/// Empty lines are skipped. Errors carry the 1-based line number.
Dataset parse_samples(std::istream& in, const FeatureSchema& schema);

/// Writes samples in the same format, floats at 17 significant digits.
void write_samples(std::ostream& out, const Dataset& ds);

Dataset load_dataset(const std::string& schema_path, const std::string& data_path);

}  // namespace ef

#endif  // EF_DATASET_HPP_
