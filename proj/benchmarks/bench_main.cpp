/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 *
 * Micro-benchmarks for the two serving hot paths: the embedding/stacking
 * forward pass and hard forest traversal.
 */
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ef/gbdt.hpp"
#include "ef/nn.hpp"
#include "ef/serve.hpp"
#include "ef/synthetic.hpp"

namespace {

ef::Dataset make_dataset(int n_samples) {
  ef::SyntheticConfig cfg;
  cfg.n_samples = n_samples;
  cfg.n_sparse_dims = 2000;
  cfg.n_dense_dims = 5;
  cfg.interaction_depth = 2;
  cfg.seed = 99;
  return ef::gen_synthetic(cfg);
}

ef::DeepCrossingModel make_model(const ef::Dataset& ds, int embed_dim) {
  ef::NetConfig net;
  net.embed_dim = embed_dim;
  net.residual_inner = {64, 32};
  ef::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 128;
  tc.seed = 99;
  return ef::train_deep_crossing(ds, net, tc);
}

ef::Forest make_forest(int n_trees, int depth, int feature_dim) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> thr(0.2, 0.8);
  std::uniform_real_distribution<double> leaf(-1.0, 1.0);
  ef::Forest forest;
  forest.learning_rate = 0.1;
  for (int t = 0; t < n_trees; ++t) {
    ef::Tree tree;
    int internal = (1 << depth) - 1;
    int total = (1 << (depth + 1)) - 1;
    tree.nodes.resize(total);
    for (int i = 0; i < internal; ++i) {
      tree.nodes[i].feature = static_cast<int>(rng() % feature_dim);
      tree.nodes[i].threshold = thr(rng);
      tree.nodes[i].left = 2 * i + 1;
      tree.nodes[i].right = 2 * i + 2;
    }
    for (int i = internal; i < total; ++i) tree.nodes[i].value = leaf(rng);
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

std::vector<std::vector<double>> make_inputs(int n, int dim) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& row : out)
    for (auto& v : row) v = unit(rng);
  return out;
}

// Stacking forward pass (embedding lookup + relu clip + concat) per sample,
// across embedding widths.
void BM_StackingForward(benchmark::State& state) {
  auto ds = make_dataset(256);
  auto model = make_model(ds, static_cast<int>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) {
    auto sv = ef::stacking_forward(model, ds.samples[i]);
    benchmark::DoNotOptimize(sv.values.data());
    i = (i + 1) % ds.samples.size();
  }
}
BENCHMARK(BM_StackingForward)->Arg(8)->Arg(32)->Arg(64);

// Hard traversal over the reference (pointer-style) forest representation.
void BM_ForestPredictReference(benchmark::State& state) {
  auto forest = make_forest(static_cast<int>(state.range(0)), 7, 128);
  auto inputs = make_inputs(512, 128);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ef::predict_hard(forest, inputs[i]));
    i = (i + 1) % inputs.size();
  }
}
BENCHMARK(BM_ForestPredictReference)->Arg(25)->Arg(50)->Arg(100);

// Hard traversal over the compiled flat-array forest (the serving path).
void BM_ForestPredictCompiled(benchmark::State& state) {
  auto forest = make_forest(static_cast<int>(state.range(0)), 7, 128);
  auto compiled = ef::compile_forest(forest, 128);
  auto inputs = make_inputs(512, 128);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ef::predict_raw(compiled, inputs[i]));
    i = (i + 1) % inputs.size();
  }
}
BENCHMARK(BM_ForestPredictCompiled)->Arg(25)->Arg(50)->Arg(100);

// Full serving pipeline: raw sample -> stacking vector -> compiled forest.
void BM_EndToEndPredict(benchmark::State& state) {
  auto ds = make_dataset(256);
  ef::ModelBundle bundle;
  bundle.model = make_model(ds, 32);
  auto stacked = ef::extract_stacking(ds, bundle.model);
  ef::GbdtConfig gc;
  gc.n_trees = static_cast<int>(state.range(0));
  gc.max_leaves = 16;
  gc.min_samples_leaf = 5;
  bundle.forest = ef::train_gbdt(stacked, gc);
  auto pipeline = ef::compile(bundle);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pipeline.predict(ds.samples[i]));
    i = (i + 1) % ds.samples.size();
  }
}
BENCHMARK(BM_EndToEndPredict)->Arg(10)->Arg(50);

}  // namespace

BENCHMARK_MAIN();
