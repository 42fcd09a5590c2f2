/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_FUZZY_HPP_
#define EF_FUZZY_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ef/gbdt.hpp"
#include "ef/nn.hpp"

namespace ef {

/// Tree node with a soft single-feature router. Structure and feature
/// indices are frozen copies of the hard forest; threshold, inverse width,
/// and leaf values are trainable.
struct FuzzyNode {
  int feature = -1;
  double threshold = 0.0;
  double inv_width = 1.0;  // sigmoid steepness; large values recover a hard split
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct FuzzyTree {
  std::vector<FuzzyNode> nodes;  // root is node 0
};

struct FuzzyForest {
  std::vector<FuzzyTree> trees;
  double base_score = 0.0;
  double learning_rate = 1.0;

  void validate(int stacking_dim) const;
};

struct NodeRouting {
  double mu_hi;  // probability of the branch taken when y >= threshold
  double mu_lo;  // complement
};

/// mu_hi = sigmoid(c * (y - a)) with the exponent argument clamped to +-500;
/// mu_lo is computed as the exact complement.
NodeRouting node_routing(double inv_width, double threshold, double y);

struct RoutingProbs {
  struct Node {
    double path = 0.0;  // probability of reaching this node from the root
    double mu_hi = 0.0;
    double mu_lo = 0.0;
  };
  std::vector<std::vector<Node>> trees;  // indexed [tree][node id]
};

struct FuzzyForward {
  double raw = 0.0;  // base_score + learning_rate * sum of pi_l * mu_l
  RoutingProbs probs;
};

/// Top-down propagation in Theta(node count) per tree.
FuzzyForward fuzzy_forward(const FuzzyForest& forest, std::span<const double> y,
                           std::size_t* node_visits = nullptr);

struct FuzzyGradients {
  // Indexed [tree][node id]; leaf slots carry d_value, internal slots d_c/d_a.
  std::vector<std::vector<double>> d_value;
  std::vector<std::vector<double>> d_c;
  std::vector<std::vector<double>> d_a;
  std::vector<double> d_y;  // length = stacking dim
};

/// Analytic gradients of delta_t * raw: one top-down pass for path
/// probabilities and one bottom-up pass for subtree aggregates, never naive
/// per-leaf products.
FuzzyGradients fuzzy_backward(const FuzzyForest& forest, std::span<const double> y,
                              const RoutingProbs& probs, double delta_t);

/// Copies structure and parameters from the hard forest; inverse widths are
/// kappa / max(IQR of the node's feature over the dataset, 1e-6).
FuzzyForest init_fuzzy(const Forest& forest, const StackedDataset& ds,
                       double kappa = 4.0);

/// Drops the inverse widths, keeping refined thresholds and leaf values.
Forest harden(const FuzzyForest& forest);

struct FuzzyTrainConfig {
  int epochs = 3;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double kappa = 4.0;

  void validate() const;
};

struct JointTrainResult {
  double initial_loss = 0.0;  // full-train loss before the first update
  double final_loss = 0.0;
};

/// Mini-batch Adam jointly over embedding weights and {c_r, a_r, pi_l}.
/// Tree structure and per-node feature indices stay frozen; inverse widths
/// are projected back to >= 1e-8 after every step. Deterministic given seed.
JointTrainResult joint_train(const Dataset& ds, DeepCrossingModel& model,
                             FuzzyForest& forest, const FuzzyTrainConfig& cfg,
                             std::vector<double>* epoch_losses = nullptr);

struct ComplexityStats {
  int n_t = 0;     // tree count
  double d_t = 0;  // mean leaf depth, averaged over trees
  double l_t = 0;  // mean node count per tree
  double ratio = 0;  // l_t / max(d_t, 1)
};

ComplexityStats complexity_stats(const Forest& forest);
ComplexityStats complexity_stats(const FuzzyForest& forest);

/// Forest document version 2: node records carry the inverse width.
std::string export_fuzzy_forest(const FuzzyForest& forest);
FuzzyForest import_fuzzy_forest(const std::string& text);

}  // namespace ef

#endif  // EF_FUZZY_HPP_
