/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_HASH_HPP_
#define EF_HASH_HPP_

#include <cstdint>
#include <string_view>

namespace ef {

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 14695981039346656037ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t n,
                                   std::uint64_t seed = 14695981039346656037ULL) {
  return fnv1a64(std::string_view(static_cast<const char*>(data), n), seed);
}

}  // namespace ef

#endif  // EF_HASH_HPP_
