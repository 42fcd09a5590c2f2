/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ef {
namespace {

[[noreturn]] void fail(int lineno, const std::string& what) {
  throw std::invalid_argument("sample line " + std::to_string(lineno) + ": " + what);
}

double parse_double(const std::string& tok, int lineno) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') fail(lineno, "bad number `" + tok + "`");
  if (!std::isfinite(v)) fail(lineno, "non-finite value `" + tok + "`");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

SparseVector parse_sparse_field(const std::string& field, int dim, int lineno) {
  SparseVector sv;
  std::istringstream fs(field);
  std::string pair;
  int last = -1;
  while (fs >> pair) {
    auto colon = pair.find(':');
    if (colon == std::string::npos) fail(lineno, "expected idx:val, got `" + pair + "`");
    long idx = std::strtol(pair.c_str(), nullptr, 10);
    if (idx < 0) fail(lineno, "negative index");
    if (idx >= dim) fail(lineno, "index out of range: " + std::to_string(idx) +
                                     " >= dim " + std::to_string(dim));
    if (idx <= last) fail(lineno, "indices not strictly increasing");
    last = static_cast<int>(idx);
    double v = parse_double(pair.substr(colon + 1), lineno);
    sv.indices.push_back(static_cast<int>(idx));
    sv.values.push_back(v);
  }
  return sv;
}

std::vector<double> parse_dense_field(const std::string& field, int dim, int lineno) {
  auto toks = split(field, ',');
  if (static_cast<int>(toks.size()) != dim)
    fail(lineno, "dense field has " + std::to_string(toks.size()) +
                     " values, schema dim is " + std::to_string(dim));
  std::vector<double> v;
  v.reserve(toks.size());
  for (const auto& t : toks) v.push_back(parse_double(t, lineno));
  return v;
}

void format_double(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void SparseVector::validate(int dim) const {
  if (indices.size() != values.size())
    throw std::invalid_argument("sparse vector: index/value length mismatch");
  int last = -1;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] <= last)
      throw std::invalid_argument("sparse vector: indices not strictly increasing");
    if (indices[i] >= dim)
      throw std::invalid_argument("sparse vector: index out of range");
    if (!std::isfinite(values[i]) || values[i] == 0.0)
      throw std::invalid_argument("sparse vector: zero or non-finite value");
    last = indices[i];
  }
}

const SparseVector& Sample::sparse(int group) const {
  return std::get<SparseVector>(fields.at(group));
}

const std::vector<double>& Sample::dense(int group) const {
  return std::get<std::vector<double>>(fields.at(group));
}

Dataset parse_samples(std::istream& in, const FeatureSchema& schema) {
  schema.validate();
  Dataset ds;
  ds.schema = schema;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != schema.groups.size() + 1)
      fail(lineno, "expected " + std::to_string(schema.groups.size() + 1) +
                       " tab-separated fields, got " + std::to_string(fields.size()));
    Sample s;
    if (fields[0] == "0")
      s.label = 0;
    else if (fields[0] == "1")
      s.label = 1;
    else
      fail(lineno, "label must be 0 or 1, got `" + fields[0] + "`");
    for (std::size_t j = 0; j < schema.groups.size(); ++j) {
      const auto& g = schema.groups[j];
      if (g.kind == GroupKind::kSparse)
        s.fields.emplace_back(parse_sparse_field(fields[j + 1], g.dim, lineno));
      else
        s.fields.emplace_back(parse_dense_field(fields[j + 1], g.dim, lineno));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void write_samples(std::ostream& out, const Dataset& ds) {
  std::string line;
  for (const auto& s : ds.samples) {
    line.clear();
    line += s.label ? '1' : '0';
    for (std::size_t j = 0; j < ds.schema.groups.size(); ++j) {
      line += '\t';
      const auto& g = ds.schema.groups[j];
      if (g.kind == GroupKind::kSparse) {
        const auto& sv = std::get<SparseVector>(s.fields[j]);
        for (std::size_t k = 0; k < sv.indices.size(); ++k) {
          if (k) line += ' ';
          line += std::to_string(sv.indices[k]);
          line += ':';
          format_double(line, sv.values[k]);
        }
      } else {
        const auto& dv = std::get<std::vector<double>>(s.fields[j]);
        for (std::size_t k = 0; k < dv.size(); ++k) {
          if (k) line += ',';
          format_double(line, dv[k]);
        }
      }
    }
    line += '\n';
    out << line;
  }
}

Dataset load_dataset(const std::string& schema_path, const std::string& data_path) {
  std::ifstream sf(schema_path);
  if (!sf) throw std::invalid_argument("cannot open schema file: " + schema_path);
  std::stringstream ss;
  ss << sf.rdbuf();
  FeatureSchema schema = FeatureSchema::parse(ss.str());
  std::ifstream df(data_path);
  if (!df) throw std::invalid_argument("cannot open data file: " + data_path);
  return parse_samples(df, schema);
}

}  // namespace ef
