/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ef/hash.hpp"

namespace ef {
namespace {

constexpr char kMagic[4] = {'E', 'F', 'C', 'K'};

// All scalars little-endian. The build targets little-endian hosts only.
template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint: truncated file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string take_bytes(const std::string& in, std::size_t& pos, std::size_t n) {
  if (pos + n > in.size()) throw std::runtime_error("checkpoint: truncated file");
  std::string s = in.substr(pos, n);
  pos += n;
  return s;
}

}  // namespace

std::uint64_t NamedTensor::count() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  std::string buf;
  buf.append(kMagic, 4);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    if (t.count() != t.data.size())
      throw std::invalid_argument("checkpoint: shape/data mismatch for " + t.name);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.name.size()));
    buf += t.name;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(buf, d);
    buf.append(reinterpret_cast<const char*>(t.data.data()),
               t.data.size() * sizeof(double));
  }
  put<std::uint64_t>(buf, ck.manifest.size());
  buf += ck.manifest;
  put<std::uint64_t>(buf, fnv1a64(buf));
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Checkpoint read_checkpoint(std::istream& in) {
  std::stringstream ss;
  ss << in.rdbuf();
  std::string buf = ss.str();
  if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  if (fnv1a64(std::string_view(buf.data(), body)) != stored)
    throw std::runtime_error("checkpoint: checksum mismatch");

  std::size_t pos = 4;
  Checkpoint ck;
  auto n_tensors = take<std::uint32_t>(buf, pos);
  ck.tensors.resize(n_tensors);
  for (auto& t : ck.tensors) {
    auto name_len = take<std::uint32_t>(buf, pos);
    t.name = take_bytes(buf, pos, name_len);
    auto ndim = take<std::uint32_t>(buf, pos);
    t.shape.resize(ndim);
    for (auto& d : t.shape) d = take<std::uint64_t>(buf, pos);
    std::uint64_t n = t.count();
    t.data.resize(n);
    if (pos + n * sizeof(double) > body)
      throw std::runtime_error("checkpoint: truncated tensor " + t.name);
    std::memcpy(t.data.data(), buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
  }
  auto manifest_len = take<std::uint64_t>(buf, pos);
  ck.manifest = take_bytes(buf, pos, manifest_len);
  if (pos != body) throw std::runtime_error("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  write_checkpoint(out, ck);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace ef
