/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/synthetic.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace ef {

void SyntheticConfig::validate() const {
  if (n_samples < 0) throw std::invalid_argument("gen_synthetic: n_samples < 0");
  if (n_sparse_dims < 1) throw std::invalid_argument("gen_synthetic: n_sparse_dims < 1");
  if (n_dense_dims < 1) throw std::invalid_argument("gen_synthetic: n_dense_dims < 1");
  if (interaction_depth < 1)
    throw std::invalid_argument("gen_synthetic: interaction_depth < 1");
  if (noise < 0.0 || noise > 1.0)
    throw std::invalid_argument("gen_synthetic: noise outside [0,1]");
  if (interaction_depth - 1 > n_sparse_dims)
    throw std::invalid_argument("gen_synthetic: interaction_depth exceeds sparse dims");
}

Dataset gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  Dataset ds;
  ds.schema.groups = {
      {"tokens", GroupKind::kSparse, cfg.n_sparse_dims, true},
      {"stats", GroupKind::kDense, cfg.n_dense_dims, false},
  };

  // Planted rule: dense[0] > tau AND the chosen sparse indices are present.
  // The rule itself is seed-dependent so different seeds give different
  // label distributions, not just different noise.
  std::uniform_real_distribution<double> tau_dist(0.35, 0.65);
  double tau = tau_dist(rng);
  std::vector<int> rule_indices;
  {
    std::uniform_int_distribution<int> idx_dist(0, cfg.n_sparse_dims - 1);
    while (static_cast<int>(rule_indices.size()) < cfg.interaction_depth - 1) {
      int idx = idx_dist(rng);
      if (std::find(rule_indices.begin(), rule_indices.end(), idx) ==
          rule_indices.end())
        rule_indices.push_back(idx);
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> idx_dist(0, cfg.n_sparse_dims - 1);
  std::uniform_int_distribution<int> background_count(4, 10);
  ds.samples.reserve(cfg.n_samples);
  for (int i = 0; i < cfg.n_samples; ++i) {
    Sample s;
    std::vector<double> dense(cfg.n_dense_dims);
    for (auto& v : dense) v = unit(rng);

    // Sparse field: rule indices appear with probability 1/2 each, plus
    // background tokens with multi-hot counts.
    std::vector<std::pair<int, double>> active;
    bool all_rule_present = true;
    for (int idx : rule_indices) {
      if (unit(rng) < 0.5)
        active.emplace_back(idx, 1.0);
      else
        all_rule_present = false;
    }
    int n_background = background_count(rng);
    for (int k = 0; k < n_background; ++k) {
      int idx = idx_dist(rng);
      double count = unit(rng) < 0.15 ? 2.0 : 1.0;
      active.emplace_back(idx, count);
    }
    std::sort(active.begin(), active.end());
    SparseVector sv;
    for (const auto& [idx, count] : active) {
      if (!sv.indices.empty() && sv.indices.back() == idx)
        sv.values.back() += count;
      else {
        sv.indices.push_back(idx);
        sv.values.push_back(count);
      }
    }

    bool label = dense[0] > tau && all_rule_present;
    if (cfg.noise > 0.0 && unit(rng) < cfg.noise) label = !label;
    s.label = label ? 1 : 0;
    s.fields.emplace_back(std::move(sv));
    s.fields.emplace_back(std::move(dense));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace ef
