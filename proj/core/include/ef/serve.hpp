/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_SERVE_HPP_
#define EF_SERVE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ef/dataset.hpp"
#include "ef/fuzzy.hpp"
#include "ef/gbdt.hpp"
#include "ef/nn.hpp"

namespace ef {

enum class BundleMode { kTwoStep, kThreeStep };

/// Deployable pair of embedding parameters and forest, plus metadata.
/// Three-step bundles additionally keep the fuzzy forest (with inverse
/// widths) for accuracy comparison; serving always traverses hard.
struct ModelBundle {
  DeepCrossingModel model;  // schema + embeddings (residual/scoring kept for eval)
  Forest forest;            // hard serving parameters
  std::optional<FuzzyForest> fuzzy;
  BundleMode mode = BundleMode::kTwoStep;
  std::string created;
  std::uint64_t config_digest = 0;

  void validate() const;
};

/// Flat per-tree arrays in breadth-first order; shallow traversals touch a
/// compact prefix of each tree's block.
struct CompiledForest {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left, right;  // -1 marks a leaf
  std::vector<double> value;
  std::vector<int> roots;
  double base_score = 0.0;
  double learning_rate = 1.0;
};

/// Predictions are bit-identical to predict_hard on the source forest.
CompiledForest compile_forest(const Forest& forest, int stacking_dim = 0);
double predict_raw(const CompiledForest& forest, std::span<const double> y,
                   std::size_t* node_visits = nullptr);

/// Immutable compiled predictor; safe for concurrent use.
struct Predictor {
  FeatureSchema schema;
  std::vector<EmbeddingLayer> embeddings;  // aligned with schema groups
  CompiledForest forest;

  StackingVector embed_stack(const Sample& s, std::size_t* mults = nullptr) const;
  double predict(const Sample& s) const;
};

Predictor compile(const ModelBundle& bundle);

struct BenchConfig {
  int warmup = 3;
  int reps = 30;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

struct BenchReport {
  double t1_ns = 0;  // embedding time per sample
  double t2_ns = 0;  // forest traversal time per sample
  double total_ns = 0;
  double p50_ns = 0;
  double p99_ns = 0;
  int reps = 0;
  // Config echo.
  int n_t = 0;
  double d_t = 0;
  int stacking_dim = 0;
  // Per-sample times come from timing a whole pass and dividing; the clock
  // is never trusted at single-sample resolution.
  bool batched = true;
};

/// Times embedding (T1) and forest traversal (T2) separately with a
/// monotonic clock; parsing and I/O are excluded. Single-threaded.
BenchReport bench(const Predictor& pred, const Dataset& ds, const BenchConfig& cfg);

std::string bench_csv(const BenchReport& report, const std::string& config_name);

/// Low-level timing helpers shared by bench and the acceptance suite.
/// Both return median-over-reps nanoseconds per sample.
double time_forest_ns_per_sample(const CompiledForest& forest,
                                 const std::vector<std::vector<double>>& inputs,
                                 int warmup, int reps);
double time_embedding_ns_per_sample(const Predictor& pred, const Dataset& ds,
                                    int warmup, int reps);

/// Bundle container: sectioned, little-endian, checksummed, version byte.
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

/// candidate/baseline x 100; lower is better.
double relative_log_loss(double gamma_candidate, double gamma_baseline);

}  // namespace ef

#endif  // EF_SERVE_HPP_
