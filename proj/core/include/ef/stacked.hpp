/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_STACKED_HPP_
#define EF_STACKED_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace ef {

/// Dataset of (label, stacking vector) pairs: the interface between the
/// embedding stage and the forest stage.
///
/// File format, one sample per line:
///   <label><TAB>v0,v1,...,vD-1
/// with 17-significant-digit decimals.
struct StackedDataset {
  int dim = 0;
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
};

void write_stacked(std::ostream& out, const StackedDataset& ds);
StackedDataset read_stacked(std::istream& in);
StackedDataset load_stacked(const std::string& path);
void save_stacked(const StackedDataset& ds, const std::string& path);

}  // namespace ef

#endif  // EF_STACKED_HPP_
