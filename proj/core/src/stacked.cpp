/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/stacked.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ef {

void write_stacked(std::ostream& out, const StackedDataset& ds) {
  std::string line;
  char buf[64];
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    line.clear();
    line += ds.labels[i] ? '1' : '0';
    line += '\t';
    for (std::size_t k = 0; k < ds.rows[i].size(); ++k) {
      if (k) line += ',';
      std::snprintf(buf, sizeof(buf), "%.17g", ds.rows[i][k]);
      line += buf;
    }
    line += '\n';
    out << line;
  }
}

StackedDataset read_stacked(std::istream& in) {
  StackedDataset ds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::invalid_argument("stacked line " + std::to_string(lineno) +
                                  ": missing tab");
    std::string label = line.substr(0, tab);
    if (label != "0" && label != "1")
      throw std::invalid_argument("stacked line " + std::to_string(lineno) +
                                  ": label must be 0 or 1");
    std::vector<double> row;
    const char* p = line.c_str() + tab + 1;
    while (*p) {
      char* end = nullptr;
      double v = std::strtod(p, &end);
      if (end == p || !std::isfinite(v))
        throw std::invalid_argument("stacked line " + std::to_string(lineno) +
                                    ": bad value");
      row.push_back(v);
      p = end;
      if (*p == ',') ++p;
      else if (*p != '\0')
        throw std::invalid_argument("stacked line " + std::to_string(lineno) +
                                    ": unexpected character");
    }
    if (ds.dim == 0)
      ds.dim = static_cast<int>(row.size());
    else if (static_cast<int>(row.size()) != ds.dim)
      throw std::invalid_argument("stacked line " + std::to_string(lineno) +
                                  ": inconsistent width");
    ds.labels.push_back(label == "1" ? 1 : 0);
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

StackedDataset load_stacked(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open stacked file: " + path);
  return read_stacked(in);
}

void save_stacked(const StackedDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write stacked file: " + path);
  write_stacked(out, ds);
}

}  // namespace ef
