/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "ef/checkpoint.hpp"
#include "ef/nn.hpp"
#include "ef/synthetic.hpp"

using namespace ef;

namespace {

FeatureSchema small_schema() {
  return FeatureSchema::parse("tok sparse 12 embed\nstat dense 3 raw\n");
}

Dataset small_dataset(int n, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_samples = n;
  cfg.n_sparse_dims = 12;
  cfg.n_dense_dims = 3;
  cfg.interaction_depth = 2;
  cfg.seed = seed;
  return gen_synthetic(cfg);
}

DeepCrossingModel zeroed_like(const DeepCrossingModel& model) {
  DeepCrossingModel g = model;
  for (double* p : parameter_view(g)) *p = 0.0;
  return g;
}

bool models_equal(const DeepCrossingModel& a, const DeepCrossingModel& b) {
  DeepCrossingModel ca = a, cb = b;
  auto pa = parameter_view(ca);
  auto pb = parameter_view(cb);
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (*pa[i] != *pb[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("embed_forward: zero map and rectifier") {
  EmbeddingLayer layer;
  layer.W = Matrix(2, 2);
  layer.b = {0.0, 0.0};
  std::vector<double> x = {1.0, -1.0};
  CHECK(embed_forward(layer, x) == std::vector<double>{0.0, 0.0});
  layer.W(0, 0) = 1.0;
  layer.W(1, 1) = 1.0;
  CHECK(embed_forward(layer, x) == std::vector<double>{1.0, 0.0});
}

TEST_CASE("embed_forward: matches triple-loop oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  EmbeddingLayer layer;
  layer.W = Matrix(3, 4);
  for (auto& v : layer.W.a) v = dist(rng);
  layer.b = {dist(rng), dist(rng), dist(rng)};
  std::vector<double> x(4);
  for (auto& v : x) v = dist(rng);

  auto got = embed_forward(layer, x);
  for (int r = 0; r < 3; ++r) {
    double acc = layer.b[r];
    for (int c = 0; c < 4; ++c) acc += layer.W(r, c) * x[c];
    double expect = acc > 0.0 ? acc : 0.0;
    CHECK(got[r] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("embed_forward: sparse equals dense expansion") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  EmbeddingLayer layer;
  layer.W = Matrix(5, 9);
  for (auto& v : layer.W.a) v = dist(rng);
  layer.b.assign(5, 0.0);
  for (auto& v : layer.b) v = dist(rng);

  SparseVector sv;
  sv.indices = {1, 4, 7};
  sv.values = {2.0, -0.5, 1.5};
  std::vector<double> dense(9, 0.0);
  for (std::size_t i = 0; i < sv.nnz(); ++i) dense[sv.indices[i]] = sv.values[i];

  auto a = embed_forward(layer, sv);
  auto b = embed_forward(layer, dense);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("embed_forward: sparse cost proportional to nnz") {
  EmbeddingLayer layer;
  layer.W = Matrix(8, 100);
  layer.b.assign(8, 0.0);
  SparseVector two, six;
  two.indices = {3, 50};
  two.values = {1.0, 1.0};
  six.indices = {1, 2, 3, 40, 50, 99};
  six.values = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  std::size_t m2 = 0, m6 = 0;
  embed_forward(layer, two, &m2);
  embed_forward(layer, six, &m6);
  CHECK(m2 == 2u * 8u);
  CHECK(m6 == 6u * 8u);
  CHECK(m6 == 3 * m2);
}

TEST_CASE("embed_forward: dimension mismatch") {
  EmbeddingLayer layer;
  layer.W = Matrix(2, 3);
  layer.b = {0.0, 0.0};
  std::vector<double> x = {1.0, 2.0};
  CHECK_THROWS_AS(embed_forward(layer, x), std::invalid_argument);
}

TEST_CASE("stack: concatenation with offsets") {
  auto sv = stack({{1.0, 2.0}, {3.0}});
  CHECK(sv.values == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(sv.offsets == std::vector<int>{0, 2});

  auto one = stack({{4.0, 5.0}});
  CHECK(one.values == std::vector<double>{4.0, 5.0});
  CHECK(one.offsets == std::vector<int>{0});

  std::vector<std::vector<double>> parts(4, std::vector<double>(128, 1.0));
  CHECK(stack(parts).values.size() == 512);
}

TEST_CASE("residual_forward: identity shortcut and zero") {
  ResidualUnit unit;
  unit.W1 = Matrix(2, 3);
  unit.b1 = {0.0, 0.0};
  unit.W2 = Matrix(3, 2);
  unit.b2 = {0.0, 0.0, 0.0};
  std::vector<double> x = {0.5, 0.0, 2.0};
  CHECK(residual_forward(unit, x) == x);
  std::vector<double> zero(3, 0.0);
  CHECK(residual_forward(unit, zero) == zero);
}

TEST_CASE("residual_forward: matches step-by-step oracle") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ResidualUnit unit;
  unit.W1 = Matrix(2, 4);
  unit.W2 = Matrix(4, 2);
  for (auto& v : unit.W1.a) v = dist(rng);
  for (auto& v : unit.W2.a) v = dist(rng);
  unit.b1 = {dist(rng), dist(rng)};
  unit.b2 = {dist(rng), dist(rng), dist(rng), dist(rng)};
  std::vector<double> x = {dist(rng), dist(rng), dist(rng), dist(rng)};

  std::vector<double> inner(2);
  for (int r = 0; r < 2; ++r) {
    double acc = unit.b1[r];
    for (int c = 0; c < 4; ++c) acc += unit.W1(r, c) * x[c];
    inner[r] = acc > 0 ? acc : 0;
  }
  std::vector<double> expect(4);
  for (int r = 0; r < 4; ++r) {
    double acc = x[r] + unit.b2[r];
    for (int c = 0; c < 2; ++c) acc += unit.W2(r, c) * inner[c];
    expect[r] = acc > 0 ? acc : 0;
  }
  auto got = residual_forward(unit, x);
  for (int r = 0; r < 4; ++r) CHECK(got[r] == doctest::Approx(expect[r]).epsilon(1e-12));
}

TEST_CASE("score: midpoint, saturation clamp, oracle") {
  std::vector<double> x = {1.0, 2.0};
  std::vector<double> w = {0.0, 0.0};
  CHECK(score(x, w, 0.0) == 0.5);
  CHECK(score(x, w, 50.0) == 1.0 - kProbEps);
  CHECK(score(x, w, -50.0) == kProbEps);
  w = {0.3, -0.2};
  double z = 0.3 * 1.0 - 0.2 * 2.0 + 0.1;
  CHECK(score(x, w, 0.1) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-15));
}

TEST_CASE("log_loss: pinned values and batch oracle") {
  CHECK(log_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(log_loss(1.0 - kProbEps, 1) == doctest::Approx(0.0).epsilon(1e-9));
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> dist(0.01, 0.99);
  for (int i = 0; i < 20; ++i) {
    double p = dist(rng);
    int y = i % 2;
    double expect = -(y * std::log(p) + (1 - y) * std::log(1 - p));
    CHECK(log_loss(p, y) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("batch gradient matches central finite differences") {
  auto ds = small_dataset(10, 21);
  NetConfig net;
  net.embed_dim = 4;
  net.residual_inner = {5};
  auto model = init_deep_crossing(ds.schema, net, 99);
  // Jitter every parameter (biases start at exactly zero) so no relu
  // pre-activation sits exactly on its kink, where the one-sided finite
  // difference disagrees with the subgradient convention relu'(0) = 0.
  {
    std::mt19937_64 jitter_rng(1234);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (double* p : parameter_view(model)) *p += jitter(jitter_rng);
  }
  std::vector<std::size_t> idx(10);
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  DeepCrossingModel grad = zeroed_like(model);
  batch_loss_and_grad(model, ds, idx, 0.0, &grad);

  auto params = parameter_view(model);
  auto grads = parameter_view(grad);
  REQUIRE(params.size() == grads.size());
  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double theta = *params[i];
    double h = 1e-5 * std::max(1.0, std::abs(theta));
    *params[i] = theta + h;
    double lp = batch_loss_and_grad(model, ds, idx, 0.0, nullptr);
    *params[i] = theta - h;
    double lm = batch_loss_and_grad(model, ds, idx, 0.0, nullptr);
    *params[i] = theta;
    double fd = (lp - lm) / (2.0 * h);
    double denom = std::max({std::abs(fd), std::abs(*grads[i]), 1e-6});
    max_rel = std::max(max_rel, std::abs(fd - *grads[i]) / denom);
  }
  CHECK(max_rel <= 1e-4);
}

TEST_CASE("batch gradient with l2 matches finite differences") {
  auto ds = small_dataset(6, 31);
  NetConfig net;
  net.embed_dim = 3;
  net.residual_inner = {4};
  auto model = init_deep_crossing(ds.schema, net, 5);
  {
    std::mt19937_64 jitter_rng(4321);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (double* p : parameter_view(model)) *p += jitter(jitter_rng);
  }
  std::vector<std::size_t> idx = {0, 1, 2, 3, 4, 5};
  const double l2 = 0.01;

  DeepCrossingModel grad = zeroed_like(model);
  batch_loss_and_grad(model, ds, idx, l2, &grad);
  auto params = parameter_view(model);
  auto grads = parameter_view(grad);
  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); i += 7) {
    double theta = *params[i];
    double h = 1e-5 * std::max(1.0, std::abs(theta));
    *params[i] = theta + h;
    double lp = batch_loss_and_grad(model, ds, idx, l2, nullptr);
    *params[i] = theta - h;
    double lm = batch_loss_and_grad(model, ds, idx, l2, nullptr);
    *params[i] = theta;
    double fd = (lp - lm) / (2.0 * h);
    double denom = std::max({std::abs(fd), std::abs(*grads[i]), 1e-6});
    max_rel = std::max(max_rel, std::abs(fd - *grads[i]) / denom);
  }
  CHECK(max_rel <= 1e-4);
}

TEST_CASE("train_deep_crossing: loss decreases on clean synthetic data") {
  auto ds = small_dataset(300, 7);
  NetConfig net;
  net.embed_dim = 8;
  net.residual_inner = {8};
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  cfg.learning_rate = 5e-3;
  cfg.seed = 7;
  std::vector<double> losses;
  train_deep_crossing(ds, net, cfg, &losses);
  REQUIRE(losses.size() == 8);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("train_deep_crossing: lr=0 leaves parameters at init") {
  auto ds = small_dataset(50, 9);
  NetConfig net;
  net.embed_dim = 4;
  net.residual_inner = {4};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.0;
  cfg.seed = 123;
  auto trained = train_deep_crossing(ds, net, cfg);
  auto init = init_deep_crossing(ds.schema, net, cfg.seed);
  CHECK(models_equal(trained, init));
}

TEST_CASE("train_deep_crossing: identical seeds give bit-identical models") {
  auto ds = small_dataset(80, 17);
  NetConfig net;
  net.embed_dim = 4;
  net.residual_inner = {4};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = 42;
  auto a = train_deep_crossing(ds, net, cfg);
  auto b = train_deep_crossing(ds, net, cfg);
  CHECK(models_equal(a, b));
}

TEST_CASE("extract_stacking: zero embeddings give zero vectors, labels kept") {
  auto ds = small_dataset(20, 3);
  NetConfig net;
  net.embed_dim = 4;
  net.residual_inner = {};
  auto model = init_deep_crossing(ds.schema, net, 1);
  for (auto& e : model.embeddings) {
    for (auto& v : e.W.a) v = 0.0;
    for (auto& v : e.b) v = 0.0;
  }
  auto stacked = extract_stacking(ds, model);
  REQUIRE(stacked.size() == ds.size());
  CHECK(stacked.dim == 4 + 3);  // embed_dim + raw dense dims
  for (std::size_t i = 0; i < stacked.size(); ++i) {
    CHECK(stacked.labels[i] == ds.samples[i].label);
    for (int k = 0; k < 4; ++k) CHECK(stacked.rows[i][k] == 0.0);
    CHECK(stacked.rows[i][4] == ds.samples[i].dense(1)[0]);
  }
}

TEST_CASE("extract_stacking: matches embed+stack composition, ignores scorer") {
  auto ds = small_dataset(15, 4);
  NetConfig net;
  net.embed_dim = 5;
  net.residual_inner = {6};
  auto model = init_deep_crossing(ds.schema, net, 8);
  auto stacked = extract_stacking(ds, model);

  // Residual/scoring perturbations must not change the extraction.
  auto perturbed = model;
  for (auto& u : perturbed.residual_units)
    for (auto& v : u.W1.a) v += 10.0;
  for (auto& v : perturbed.scoring_w) v += 5.0;
  auto stacked2 = extract_stacking(ds, perturbed);

  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto sv = stacking_forward(model, ds.samples[i]);
    CHECK(stacked.rows[i] == sv.values);
    CHECK(stacked2.rows[i] == sv.values);
  }
}

TEST_CASE("extract_stacking: schema mismatch rejected") {
  auto ds = small_dataset(5, 4);
  NetConfig net;
  net.embed_dim = 3;
  net.residual_inner = {};
  auto other = FeatureSchema::parse("tok sparse 12 embed\nstat dense 4 raw\n");
  auto model = init_deep_crossing(other, net, 0);
  CHECK_THROWS_AS(extract_stacking(ds, model), std::invalid_argument);
}

TEST_CASE("model checkpoint round trip is bit-exact") {
  auto ds = small_dataset(30, 5);
  NetConfig net;
  net.embed_dim = 4;
  net.residual_inner = {3, 5};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.seed = 77;
  auto model = train_deep_crossing(ds, net, cfg);

  auto path = std::filesystem::temp_directory_path() / "ef_test_model.ck";
  save_model(model, path.string());
  auto loaded = load_model(path.string());
  std::filesystem::remove(path);

  CHECK(models_equal(model, loaded));
  CHECK(loaded.schema.serialize() == model.schema.serialize());
  // Bit-exact parameters imply bit-exact predictions.
  for (const auto& s : ds.samples)
    CHECK(predict_deep_crossing(loaded, s) == predict_deep_crossing(model, s));
}

TEST_CASE("checkpoint container: corruption detected") {
  Checkpoint ck;
  ck.tensors.push_back({"t", {2, 2}, {1.0, 2.0, 3.0, 4.0}});
  ck.manifest = "hello";
  std::ostringstream out;
  write_checkpoint(out, ck);
  std::string bytes = out.str();

  {
    std::istringstream in(bytes);
    auto back = read_checkpoint(in);
    REQUIRE(back.tensors.size() == 1);
    CHECK(back.tensors[0].data == ck.tensors[0].data);
    CHECK(back.manifest == ck.manifest);
  }
  {
    std::string bad = bytes;
    bad[bad.size() / 2] ^= 0x01;
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_checkpoint(in), std::runtime_error);
  }
  {
    std::string trunc = bytes.substr(0, bytes.size() - 3);
    std::istringstream in(trunc);
    CHECK_THROWS_AS(read_checkpoint(in), std::runtime_error);
  }
}

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
