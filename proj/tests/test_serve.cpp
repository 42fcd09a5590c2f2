/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "ef/fuzzy.hpp"
#include "ef/gbdt.hpp"
#include "ef/linalg.hpp"
#include "ef/nn.hpp"
#include "ef/serve.hpp"
#include "ef/synthetic.hpp"

using namespace ef;

namespace {

struct TrainedBundle {
  Dataset ds;
  ModelBundle bundle;
};

TrainedBundle make_bundle(std::uint64_t seed, bool three_step = false) {
  SyntheticConfig scfg;
  scfg.n_samples = 150;
  scfg.n_sparse_dims = 20;
  scfg.n_dense_dims = 3;
  scfg.interaction_depth = 2;
  scfg.seed = seed;
  TrainedBundle out;
  out.ds = gen_synthetic(scfg);

  NetConfig net;
  net.embed_dim = 4;
  net.residual_inner = {4};
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 32;
  tcfg.seed = seed;
  out.bundle.model = train_deep_crossing(out.ds, net, tcfg);
  auto stacked = extract_stacking(out.ds, out.bundle.model);

  GbdtConfig gcfg;
  gcfg.n_trees = 5;
  gcfg.max_leaves = 6;
  gcfg.min_samples_leaf = 5;
  out.bundle.forest = train_gbdt(stacked, gcfg);
  out.bundle.mode = BundleMode::kTwoStep;
  out.bundle.created = "2026-01-01T00:00:00Z";
  out.bundle.config_digest = 0xabcdef;

  if (three_step) {
    out.bundle.fuzzy = init_fuzzy(out.bundle.forest, stacked, 4.0);
    FuzzyTrainConfig fcfg;
    fcfg.epochs = 1;
    fcfg.batch_size = 32;
    fcfg.learning_rate = 1e-3;
    fcfg.seed = seed;
    joint_train(out.ds, out.bundle.model, *out.bundle.fuzzy, fcfg);
    out.bundle.forest = harden(*out.bundle.fuzzy);
    out.bundle.mode = BundleMode::kThreeStep;
  }
  return out;
}

}  // namespace

TEST_CASE("compile_forest: predictions bit-identical to the source forest") {
  auto tb = make_bundle(201);
  int dim = tb.bundle.model.stacking_dim();
  auto compiled = compile_forest(tb.bundle.forest, dim);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> y(dim);
    for (auto& v : y) v = dist(rng);
    CHECK(predict_raw(compiled, y) == predict_hard(tb.bundle.forest, y));
  }
}

TEST_CASE("compile_forest: empty forest serves the base score") {
  Forest empty;
  empty.base_score = 0.75;
  auto compiled = compile_forest(empty, 3);
  std::vector<double> y = {1.0, 2.0, 3.0};
  CHECK(predict_raw(compiled, y) == 0.75);
}

TEST_CASE("compile_forest: invalid structure rejected") {
  Forest bad;
  Tree tree;
  tree.nodes.push_back({0, 0.5, 1, 5, 0.0});  // right child out of range
  tree.nodes.push_back({-1, 0.0, -1, -1, 1.0});
  bad.trees.push_back(tree);
  CHECK_THROWS_AS(compile_forest(bad, 3), std::invalid_argument);

  Forest feature_oob;
  Tree t2;
  t2.nodes.push_back({9, 0.5, 1, 2, 0.0});
  t2.nodes.push_back({-1, 0.0, -1, -1, 1.0});
  t2.nodes.push_back({-1, 0.0, -1, -1, 2.0});
  feature_oob.trees.push_back(t2);
  CHECK_THROWS_AS(compile_forest(feature_oob, 3), std::invalid_argument);
}

TEST_CASE("predict: matches extract_stacking + predict_hard composition") {
  auto tb = make_bundle(203);
  auto pred = compile(tb.bundle);
  auto stacked = extract_stacking(tb.ds, tb.bundle.model);
  for (std::size_t i = 0; i < tb.ds.size(); ++i) {
    double raw = predict_hard(tb.bundle.forest, stacked.rows[i]);
    double expect = sigmoid(raw);
    double got = pred.predict(tb.ds.samples[i]);
    CHECK(got == expect);
    CHECK(pred.predict(tb.ds.samples[i]) == got);  // deterministic
  }
}

TEST_CASE("predict: constant forest over zero embeddings") {
  auto tb = make_bundle(205);
  // Zero out embeddings; replace forest by a single constant leaf.
  for (auto& e : tb.bundle.model.embeddings) {
    for (auto& v : e.W.a) v = 0.0;
    for (auto& v : e.b) v = 0.0;
  }
  Forest constant;
  constant.base_score = 0.2;
  constant.learning_rate = 0.5;
  Tree leaf;
  leaf.nodes.emplace_back();
  leaf.nodes[0].value = 3.0;
  constant.trees.push_back(leaf);
  tb.bundle.forest = constant;
  auto pred = compile(tb.bundle);
  double expect = sigmoid(0.2 + 0.5 * 3.0);
  for (const auto& s : tb.ds.samples) CHECK(pred.predict(s) == expect);
}

TEST_CASE("predict: embedding multiply count scales with sparsity") {
  auto tb = make_bundle(207);
  auto pred = compile(tb.bundle);
  Sample a = tb.ds.samples[0];
  SparseVector sv2;
  sv2.indices = {1, 5};
  sv2.values = {1.0, 1.0};
  a.fields[0] = sv2;
  Sample b = a;
  SparseVector sv6;
  sv6.indices = {1, 3, 5, 8, 11, 14};
  sv6.values = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  b.fields[0] = sv6;
  std::size_t m2 = 0, m6 = 0;
  pred.embed_stack(a, &m2);
  pred.embed_stack(b, &m6);
  CHECK(m6 == 3 * m2);
}

TEST_CASE("bench: report sanity and config validation") {
  auto tb = make_bundle(209);
  auto pred = compile(tb.bundle);
  BenchConfig cfg;
  cfg.warmup = 1;
  cfg.reps = 5;
  auto report = bench(pred, tb.ds, cfg);
  CHECK(report.reps == 5);
  CHECK(report.t1_ns > 0.0);
  CHECK(report.t2_ns > 0.0);
  CHECK(report.total_ns > 0.0);
  CHECK(report.p50_ns > 0.0);
  CHECK(report.p99_ns >= report.p50_ns);
  CHECK(report.n_t == 5);
  CHECK(report.stacking_dim == tb.bundle.model.stacking_dim());
  CHECK(report.batched);

  auto csv = bench_csv(report, "unit");
  CHECK(csv.find("config,n_t,d_t,D,T1_ns,T2_ns,total_ns,p50_ns,p99_ns,reps") !=
        std::string::npos);
  CHECK(csv.find("unit,5,") != std::string::npos);

  BenchConfig bad;
  bad.reps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = BenchConfig{};
  bad.warmup = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("bundle: save/load round trip gives bit-identical predictions") {
  for (bool three_step : {false, true}) {
    auto tb = make_bundle(211, three_step);
    auto path = std::filesystem::temp_directory_path() / "ef_test_bundle.bin";
    save_bundle(tb.bundle, path.string());
    auto loaded = load_bundle(path.string());
    std::filesystem::remove(path);

    CHECK(loaded.mode == tb.bundle.mode);
    CHECK(loaded.created == tb.bundle.created);
    CHECK(loaded.config_digest == tb.bundle.config_digest);
    CHECK(loaded.fuzzy.has_value() == three_step);

    auto p1 = compile(tb.bundle);
    auto p2 = compile(loaded);
    for (const auto& s : tb.ds.samples) CHECK(p2.predict(s) == p1.predict(s));
  }
}

TEST_CASE("bundle: corrupted byte detected by checksum") {
  auto tb = make_bundle(213);
  auto path = std::filesystem::temp_directory_path() / "ef_test_bundle_corrupt.bin";
  save_bundle(tb.bundle, path.string());
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(0, std::ios::end);
    auto size = static_cast<long>(f.tellg());
    f.seekp(size / 2);
    char c;
    f.seekg(size / 2);
    f.read(&c, 1);
    c ^= 0x01;
    f.seekp(size / 2);
    f.write(&c, 1);
  }
  CHECK_THROWS_AS(load_bundle(path.string()), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("bundle: truncation detected") {
  auto tb = make_bundle(215);
  auto path = std::filesystem::temp_directory_path() / "ef_test_bundle_trunc.bin";
  save_bundle(tb.bundle, path.string());
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 5);
  CHECK_THROWS_AS(load_bundle(path.string()), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("three-step bundle serves hard traversal over refined parameters") {
  auto tb = make_bundle(217, true);
  auto pred = compile(tb.bundle);
  auto hard = harden(*tb.bundle.fuzzy);
  for (const auto& s : tb.ds.samples) {
    auto sv = stacking_forward(tb.bundle.model, s);
    CHECK(pred.predict(s) == sigmoid(predict_hard(hard, sv.values)));
  }
}

TEST_CASE("relative_log_loss: identity, known ratios, and guard") {
  CHECK(relative_log_loss(0.4, 0.4) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(relative_log_loss(0.9994 * 0.37, 0.37) == doctest::Approx(99.94).epsilon(1e-9));
  CHECK(relative_log_loss(0.399, 0.400) == doctest::Approx(99.75).epsilon(1e-9));
  CHECK_THROWS_AS(relative_log_loss(0.4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(relative_log_loss(0.4, -1.0), std::invalid_argument);
}

TEST_CASE("serve: instrumented node visits equal depth reached per tree") {
  auto tb = make_bundle(219);
  int dim = tb.bundle.model.stacking_dim();
  auto compiled = compile_forest(tb.bundle.forest, dim);
  auto stacked = extract_stacking(tb.ds, tb.bundle.model);
  for (const auto& row : stacked.rows) {
    std::size_t compiled_visits = 0, reference_visits = 0;
    predict_raw(compiled, row, &compiled_visits);
    predict_hard(tb.bundle.forest, row, &reference_visits);
    CHECK(compiled_visits == reference_visits);
  }
}
