/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_SCHEMA_HPP_
#define EF_SCHEMA_HPP_

#include <string>
#include <vector>

namespace ef {

enum class GroupKind { kSparse, kDense };

/// One raw feature group: a sparse multi-hot block or a dense numeric block.
/// `embed` marks whether the group goes through an embedding layer or is
/// stacked raw.
struct FeatureGroup {
  std::string name;
  GroupKind kind = GroupKind::kSparse;
  int dim = 0;
  bool embed = true;
};

/// Ordered collection of feature groups describing one dataset row.
///
/// Schema file format, one group per line:
///   <name> sparse|dense <dim> embed|raw
/// Blank lines and `#` comments are skipped.
struct FeatureSchema {
  std::vector<FeatureGroup> groups;

  int total_raw_dim() const;
  const FeatureGroup* find(const std::string& name) const;

  /// Throws std::invalid_argument on duplicate names, non-positive dims,
  /// or an empty group list.
  void validate() const;

  static FeatureSchema parse(const std::string& text);
  std::string serialize() const;
};

}  // namespace ef

#endif  // EF_SCHEMA_HPP_
