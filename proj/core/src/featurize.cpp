/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/featurize.hpp"

#include <cctype>
#include <map>
#include <stdexcept>
#include <string>

#include "ef/hash.hpp"

namespace ef {

SparseVector triletter_featurize(std::string_view text, int dim) {
  if (dim < 1) throw std::invalid_argument("triletter_featurize: dim must be >= 1");
  // Ordered map gives sorted indices for free; gram counts merge on collision.
  std::map<int, double> counts;
  std::string word;
  auto flush_word = [&] {
    if (word.empty()) return;
    std::string padded = "#" + word + "#";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      auto idx = static_cast<int>(fnv1a64(std::string_view(padded).substr(i, 3)) %
                                  static_cast<std::uint64_t>(dim));
      counts[idx] += 1.0;
    }
    word.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)))
      flush_word();
    else
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  flush_word();
  SparseVector sv;
  sv.indices.reserve(counts.size());
  sv.values.reserve(counts.size());
  for (const auto& [idx, count] : counts) {
    sv.indices.push_back(idx);
    sv.values.push_back(count);
  }
  return sv;
}

}  // namespace ef
