/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_NN_HPP_
#define EF_NN_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ef/checkpoint.hpp"
#include "ef/dataset.hpp"
#include "ef/linalg.hpp"
#include "ef/stacked.hpp"

namespace ef {

/// Probability clamp applied at the loss boundary only.
inline constexpr double kProbEps = 1e-12;

/// Single-layer embedding: relu(W x + b), W is m x n.
struct EmbeddingLayer {
  Matrix W;
  std::vector<double> b;

  int out_dim() const { return W.rows; }
  int in_dim() const { return W.cols; }
};

/// relu(W x + b) for a dense input.
std::vector<double> embed_forward(const EmbeddingLayer& layer,
                                  std::span<const double> x,
                                  std::size_t* mults = nullptr);
/// Same map driven by the non-zeros only; cost is O(nnz * m).
std::vector<double> embed_forward(const EmbeddingLayer& layer, const SparseVector& x,
                                  std::size_t* mults = nullptr);

struct StackingVector {
  std::vector<double> values;
  std::vector<int> offsets;  // per-part start positions
};

StackingVector stack(const std::vector<std::vector<double>>& parts);

/// Two-layer bottleneck with identity shortcut:
///   relu(x + W2 relu(W1 x + b1) + b2)
struct ResidualUnit {
  Matrix W1;
  std::vector<double> b1;
  Matrix W2;
  std::vector<double> b2;

  int width() const { return W2.rows; }
  int inner() const { return W1.rows; }
};

std::vector<double> residual_forward(const ResidualUnit& unit,
                                     std::span<const double> x);

/// sigmoid(w . x + b), clamped to [kProbEps, 1 - kProbEps].
double score(std::span<const double> x, std::span<const double> w, double b);

/// -[y ln p + (1-y) ln(1-p)]; p must already be clamped away from {0,1}.
double log_loss(double p, int y);

struct TrainConfig {
  int epochs = 5;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double l2 = 0.0;

  void validate() const;
};

struct NetConfig {
  int embed_dim = 128;
  std::vector<int> residual_inner = {128, 64};  // one entry per residual unit
};

struct DeepCrossingModel {
  FeatureSchema schema;
  /// Aligned with schema.groups; raw groups hold an empty layer.
  std::vector<EmbeddingLayer> embeddings;
  std::vector<ResidualUnit> residual_units;
  std::vector<double> scoring_w;
  double scoring_b = 0.0;

  int stacking_dim() const;
  void validate() const;
};

/// Seeded uniform(-sqrt(6/(fan_in+fan_out)), +...) init, zero biases.
DeepCrossingModel init_deep_crossing(const FeatureSchema& schema, const NetConfig& net,
                                     std::uint64_t seed);

/// Embedding + stacking only; residual units and scoring are not applied.
StackingVector stacking_forward(const DeepCrossingModel& model, const Sample& s,
                                std::size_t* mults = nullptr);

/// Full forward through residual units and the scoring layer.
double predict_deep_crossing(const DeepCrossingModel& model, const Sample& s);

/// Mean log loss over `idx`; when `grad` is non-null it receives the mean
/// parameter gradients (same shapes as the model).
double batch_loss_and_grad(const DeepCrossingModel& model, const Dataset& ds,
                           std::span<const std::size_t> idx, double l2,
                           DeepCrossingModel* grad);

/// Stable flat view over every trainable parameter; gradient models share
/// the same ordering.
std::vector<double*> parameter_view(DeepCrossingModel& model);
std::vector<double*> embedding_parameter_view(DeepCrossingModel& model);

/// Mini-batch Adam over all parameters; deterministic given the seed.
/// Throws on NaN loss with learning-rate guidance.
DeepCrossingModel train_deep_crossing(const Dataset& ds, const NetConfig& net,
                                      const TrainConfig& cfg,
                                      std::vector<double>* epoch_losses = nullptr);

StackedDataset extract_stacking(const Dataset& ds, const DeepCrossingModel& model);

/// Checkpoint persistence (bit-exact round trip).
Checkpoint to_checkpoint(const DeepCrossingModel& model);
DeepCrossingModel from_checkpoint(const Checkpoint& ck);
void save_model(const DeepCrossingModel& model, const std::string& path);
DeepCrossingModel load_model(const std::string& path);

}  // namespace ef

#endif  // EF_NN_HPP_
