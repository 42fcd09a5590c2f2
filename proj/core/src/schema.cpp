/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/schema.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace ef {

int FeatureSchema::total_raw_dim() const {
  int total = 0;
  for (const auto& g : groups) total += g.dim;
  return total;
}

const FeatureGroup* FeatureSchema::find(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return &g;
  return nullptr;
}

void FeatureSchema::validate() const {
  if (groups.empty()) throw std::invalid_argument("schema: no groups");
  std::unordered_set<std::string> seen;
  for (const auto& g : groups) {
    if (g.name.empty()) throw std::invalid_argument("schema: empty group name");
    if (!seen.insert(g.name).second)
      throw std::invalid_argument("schema: duplicate group " + g.name);
    if (g.dim < 1)
      throw std::invalid_argument("schema: non-positive dim for group " + g.name);
  }
}

FeatureSchema FeatureSchema::parse(const std::string& text) {
  FeatureSchema schema;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string name, kind, embed;
    long dim = 0;
    if (!(ls >> name)) continue;  // blank or comment-only line
    if (!(ls >> kind >> dim >> embed))
      throw std::invalid_argument("schema line " + std::to_string(lineno) +
                                  ": expected `name kind dim embed|raw`");
    std::string extra;
    if (ls >> extra)
      throw std::invalid_argument("schema line " + std::to_string(lineno) +
                                  ": trailing token `" + extra + "`");
    FeatureGroup g;
    g.name = name;
    if (kind == "sparse")
      g.kind = GroupKind::kSparse;
    else if (kind == "dense")
      g.kind = GroupKind::kDense;
    else
      throw std::invalid_argument("schema line " + std::to_string(lineno) +
                                  ": unknown kind `" + kind + "`");
    if (dim < 1)
      throw std::invalid_argument("schema line " + std::to_string(lineno) +
                                  ": non-positive dim");
    g.dim = static_cast<int>(dim);
    if (embed == "embed")
      g.embed = true;
    else if (embed == "raw")
      g.embed = false;
    else
      throw std::invalid_argument("schema line " + std::to_string(lineno) +
                                  ": expected embed|raw, got `" + embed + "`");
    schema.groups.push_back(std::move(g));
  }
  if (schema.groups.empty()) throw std::invalid_argument("schema: no groups");
  schema.validate();
  return schema;
}

std::string FeatureSchema::serialize() const {
  std::ostringstream out;
  for (const auto& g : groups) {
    out << g.name << ' ' << (g.kind == GroupKind::kSparse ? "sparse" : "dense")
        << ' ' << g.dim << ' ' << (g.embed ? "embed" : "raw") << '\n';
  }
  return out.str();
}

}  // namespace ef
