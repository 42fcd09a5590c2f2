/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_GBDT_HPP_
#define EF_GBDT_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ef/stacked.hpp"

namespace ef {

/// Single-feature axis-aligned node. Leaves have left == right == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf value (pre-shrinkage)

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // root is node 0

  /// Binary descent: go left iff y[feature] < threshold.
  double predict(std::span<const double> y, std::size_t* node_visits = nullptr) const;
  int depth() const;
  int n_leaves() const;
  void validate(int stacking_dim) const;
};

struct Forest {
  std::vector<Tree> trees;
  double base_score = 0.0;
  double learning_rate = 1.0;
};

struct GbdtConfig {
  int n_trees = 100;
  int max_leaves = 31;
  int max_depth = 7;
  int min_samples_leaf = 20;
  double lambda = 1.0;  // L2 on leaf values
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  /// When unset, base_score = logit of the label prior.
  std::optional<double> base_score;

  void validate() const;
};

struct SplitResult {
  bool found = false;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Exact greedy scan over midpoints between distinct adjacent values.
/// `values` must be ascending with matching (g, h). Gain is
///   G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda),
/// ties broken by the smallest threshold. Splits leaving fewer than
/// `min_leaf` samples on a side are skipped.
SplitResult best_split(std::span<const double> values, std::span<const double> g,
                       std::span<const double> h, double lambda, int min_leaf = 1);

/// Second-order boosting on (label, stacking vector) pairs with leaf-wise
/// (best-first) growth. Deterministic for a fixed config.
Forest train_gbdt(const StackedDataset& ds, const GbdtConfig& cfg,
                  std::vector<double>* round_losses = nullptr);

/// base_score + learning_rate * sum of per-tree leaf values.
double predict_hard(const Forest& forest, std::span<const double> y,
                    std::size_t* node_visits = nullptr);

/// Text document with pre-order node records; lossless round trip.
std::string export_forest(const Forest& forest);
Forest import_forest(const std::string& text);

double mean_log_loss(const Forest& forest, const StackedDataset& ds);

}  // namespace ef

#endif  // EF_GBDT_HPP_
