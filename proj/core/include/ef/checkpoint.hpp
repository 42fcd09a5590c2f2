/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_CHECKPOINT_HPP_
#define EF_CHECKPOINT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ef {

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;  // row-major

  std::uint64_t count() const;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::string manifest;  // human-readable tensor listing + free-form trailer
};

/// Binary tensor container: per-tensor shape header + little-endian f64
/// payload, a text manifest section, and a trailing FNV-1a checksum.
/// Round trips are bit-exact.
void write_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ef

#endif  // EF_CHECKPOINT_HPP_
