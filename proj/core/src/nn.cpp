/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ef/adam.hpp"
#include "ef/checkpoint.hpp"

namespace ef {
namespace {

double clamp_prob(double p) {
  return std::min(1.0 - kProbEps, std::max(kProbEps, p));
}

void check_finite_batch(double loss) {
  if (!std::isfinite(loss))
    throw std::runtime_error(
        "train_deep_crossing: loss became non-finite; lower the learning rate "
        "or reduce l2");
}

/// Per-sample activations kept for the backward pass.
struct ForwardCache {
  std::vector<std::vector<double>> z;  // pre-activation per group (empty for raw)
  StackingVector s0;
  std::vector<std::vector<double>> u1, a1, u2, out;  // per residual unit
  double raw = 0.0;
  double p = 0.5;  // unclamped sigmoid
};

DeepCrossingModel make_gradient_holder(const DeepCrossingModel& model) {
  DeepCrossingModel g;
  g.schema = model.schema;
  g.embeddings.reserve(model.embeddings.size());
  for (const auto& e : model.embeddings) {
    EmbeddingLayer ge;
    ge.W = Matrix(e.W.rows, e.W.cols);
    ge.b.assign(e.b.size(), 0.0);
    g.embeddings.push_back(std::move(ge));
  }
  for (const auto& u : model.residual_units) {
    ResidualUnit gu;
    gu.W1 = Matrix(u.W1.rows, u.W1.cols);
    gu.b1.assign(u.b1.size(), 0.0);
    gu.W2 = Matrix(u.W2.rows, u.W2.cols);
    gu.b2.assign(u.b2.size(), 0.0);
    g.residual_units.push_back(std::move(gu));
  }
  g.scoring_w.assign(model.scoring_w.size(), 0.0);
  g.scoring_b = 0.0;
  return g;
}

double full_forward(const DeepCrossingModel& model, const Sample& s,
                    ForwardCache* cache) {
  std::vector<std::vector<double>> parts;
  parts.reserve(model.schema.groups.size());
  if (cache) cache->z.assign(model.schema.groups.size(), {});
  for (std::size_t j = 0; j < model.schema.groups.size(); ++j) {
    const auto& g = model.schema.groups[j];
    if (g.embed) {
      const auto& layer = model.embeddings[j];
      std::vector<double> z(layer.out_dim(), 0.0);
      if (g.kind == GroupKind::kSparse) {
        const auto& sv = s.sparse(static_cast<int>(j));
        for (std::size_t k = 0; k < sv.indices.size(); ++k) {
          int col = sv.indices[k];
          double val = sv.values[k];
          for (int r = 0; r < layer.W.rows; ++r) z[r] += layer.W(r, col) * val;
        }
      } else {
        matvec(layer.W, s.dense(static_cast<int>(j)), z);
      }
      for (int r = 0; r < layer.out_dim(); ++r) z[r] += layer.b[r];
      std::vector<double> y(z.size());
      for (std::size_t r = 0; r < z.size(); ++r) y[r] = relu(z[r]);
      if (cache) cache->z[j] = std::move(z);
      parts.push_back(std::move(y));
    } else {
      parts.push_back(s.dense(static_cast<int>(j)));
    }
  }
  StackingVector s0 = stack(parts);

  std::vector<double> cur = s0.values;
  std::size_t n_units = model.residual_units.size();
  if (cache) {
    cache->s0 = std::move(s0);
    cache->u1.assign(n_units, {});
    cache->a1.assign(n_units, {});
    cache->u2.assign(n_units, {});
    cache->out.assign(n_units, {});
  }
  for (std::size_t i = 0; i < n_units; ++i) {
    const auto& unit = model.residual_units[i];
    std::vector<double> u1(unit.inner());
    matvec(unit.W1, cur, u1);
    for (int r = 0; r < unit.inner(); ++r) u1[r] += unit.b1[r];
    std::vector<double> a1(u1.size());
    for (std::size_t r = 0; r < u1.size(); ++r) a1[r] = relu(u1[r]);
    std::vector<double> u2(unit.width());
    matvec(unit.W2, a1, u2);
    for (int r = 0; r < unit.width(); ++r) u2[r] += cur[r] + unit.b2[r];
    std::vector<double> out(u2.size());
    for (std::size_t r = 0; r < u2.size(); ++r) out[r] = relu(u2[r]);
    if (cache) {
      cache->u1[i] = std::move(u1);
      cache->a1[i] = std::move(a1);
      cache->u2[i] = std::move(u2);
      cache->out[i] = out;
    }
    cur = std::move(out);
  }

  double raw = model.scoring_b;
  for (std::size_t k = 0; k < cur.size(); ++k) raw += model.scoring_w[k] * cur[k];
  double p = sigmoid(raw);
  if (cache) {
    cache->raw = raw;
    cache->p = p;
  }
  return p;
}

/// Accumulates gradients for one sample given d(loss)/d(raw score).
void backward(const DeepCrossingModel& model, const Sample& s,
              const ForwardCache& cache, double d_raw, DeepCrossingModel& grad) {
  std::size_t n_units = model.residual_units.size();
  const std::vector<double>& top =
      n_units ? cache.out[n_units - 1] : cache.s0.values;

  std::vector<double> ds(top.size());
  for (std::size_t k = 0; k < top.size(); ++k) {
    grad.scoring_w[k] += d_raw * top[k];
    ds[k] = d_raw * model.scoring_w[k];
  }
  grad.scoring_b += d_raw;

  for (std::size_t i = n_units; i-- > 0;) {
    const auto& unit = model.residual_units[i];
    auto& gu = grad.residual_units[i];
    const std::vector<double>& input = i ? cache.out[i - 1] : cache.s0.values;

    std::vector<double> du2(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r)
      du2[r] = cache.u2[i][r] > 0.0 ? ds[r] : 0.0;
    for (std::size_t r = 0; r < du2.size(); ++r) {
      gu.b2[r] += du2[r];
      if (du2[r] != 0.0)
        for (int c = 0; c < unit.W2.cols; ++c)
          gu.W2(static_cast<int>(r), c) += du2[r] * cache.a1[i][c];
    }
    std::vector<double> da1(unit.inner(), 0.0);
    matvec_transpose_add(unit.W2, du2, da1);
    std::vector<double> du1(da1.size());
    for (std::size_t r = 0; r < da1.size(); ++r)
      du1[r] = cache.u1[i][r] > 0.0 ? da1[r] : 0.0;
    for (std::size_t r = 0; r < du1.size(); ++r) {
      gu.b1[r] += du1[r];
      if (du1[r] != 0.0)
        for (int c = 0; c < unit.W1.cols; ++c)
          gu.W1(static_cast<int>(r), c) += du1[r] * input[c];
    }
    std::vector<double> ds_in = du2;  // identity shortcut
    matvec_transpose_add(unit.W1, du1, ds_in);
    ds = std::move(ds_in);
  }

  for (std::size_t j = 0; j < model.schema.groups.size(); ++j) {
    const auto& g = model.schema.groups[j];
    if (!g.embed) continue;
    const auto& layer = model.embeddings[j];
    auto& gl = grad.embeddings[j];
    int off = cache.s0.offsets[j];
    for (int r = 0; r < layer.out_dim(); ++r) {
      double dz = cache.z[j][r] > 0.0 ? ds[off + r] : 0.0;
      if (dz == 0.0) continue;
      gl.b[r] += dz;
      if (g.kind == GroupKind::kSparse) {
        const auto& sv = s.sparse(static_cast<int>(j));
        for (std::size_t k = 0; k < sv.indices.size(); ++k)
          gl.W(r, sv.indices[k]) += dz * sv.values[k];
      } else {
        const auto& dv = s.dense(static_cast<int>(j));
        for (int c = 0; c < layer.W.cols; ++c) gl.W(r, c) += dz * dv[c];
      }
    }
  }
}

void fill_uniform(std::vector<double>& v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : v) x = dist(rng);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (learning_rate < 0.0)
    throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
  if (l2 < 0.0) throw std::invalid_argument("TrainConfig: l2 must be >= 0");
}

std::vector<double> embed_forward(const EmbeddingLayer& layer,
                                  std::span<const double> x, std::size_t* mults) {
  std::vector<double> y(layer.out_dim());
  matvec(layer.W, x, y, mults);
  for (int r = 0; r < layer.out_dim(); ++r) y[r] = relu(y[r] + layer.b[r]);
  return y;
}

std::vector<double> embed_forward(const EmbeddingLayer& layer, const SparseVector& x,
                                  std::size_t* mults) {
  if (!x.indices.empty() && x.indices.back() >= layer.in_dim())
    throw std::invalid_argument("embed_forward: sparse index out of range");
  std::vector<double> y(layer.b);
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    int col = x.indices[k];
    double val = x.values[k];
    for (int r = 0; r < layer.W.rows; ++r) y[r] += layer.W(r, col) * val;
  }
  if (mults) *mults += x.indices.size() * static_cast<std::size_t>(layer.W.rows);
  for (auto& v : y) v = relu(v);
  return y;
}

StackingVector stack(const std::vector<std::vector<double>>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack: no parts");
  StackingVector out;
  out.offsets.reserve(parts.size());
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  out.values.reserve(total);
  for (const auto& p : parts) {
    out.offsets.push_back(static_cast<int>(out.values.size()));
    out.values.insert(out.values.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<double> residual_forward(const ResidualUnit& unit,
                                     std::span<const double> x) {
  std::vector<double> u1(unit.inner());
  matvec(unit.W1, x, u1);
  for (int r = 0; r < unit.inner(); ++r) u1[r] = relu(u1[r] + unit.b1[r]);
  std::vector<double> y(unit.width());
  matvec(unit.W2, u1, y);
  for (int r = 0; r < unit.width(); ++r) y[r] = relu(y[r] + x[r] + unit.b2[r]);
  return y;
}

double score(std::span<const double> x, std::span<const double> w, double b) {
  if (x.size() != w.size()) throw std::invalid_argument("score: dimension mismatch");
  double raw = b;
  for (std::size_t k = 0; k < x.size(); ++k) raw += w[k] * x[k];
  return clamp_prob(sigmoid(raw));
}

double log_loss(double p, int y) {
  return y ? -std::log(p) : -std::log(1.0 - p);
}

int DeepCrossingModel::stacking_dim() const {
  int d = 0;
  for (std::size_t j = 0; j < schema.groups.size(); ++j)
    d += schema.groups[j].embed ? embeddings[j].out_dim() : schema.groups[j].dim;
  return d;
}

void DeepCrossingModel::validate() const {
  schema.validate();
  if (embeddings.size() != schema.groups.size())
    throw std::invalid_argument("model: embedding count != group count");
  for (std::size_t j = 0; j < schema.groups.size(); ++j) {
    const auto& g = schema.groups[j];
    if (g.embed) {
      if (embeddings[j].in_dim() != g.dim)
        throw std::invalid_argument("model: embedding width mismatch for " + g.name);
      if (embeddings[j].out_dim() < 1)
        throw std::invalid_argument("model: empty embedding for " + g.name);
    } else if (g.kind == GroupKind::kSparse) {
      throw std::invalid_argument("model: sparse group " + g.name +
                                  " must be embedded");
    }
  }
  int d = stacking_dim();
  for (const auto& u : residual_units)
    if (u.width() != d || u.W1.cols != d)
      throw std::invalid_argument("model: residual width != stacking dim");
  if (static_cast<int>(scoring_w.size()) != d)
    throw std::invalid_argument("model: scoring width != stacking dim");
}

DeepCrossingModel init_deep_crossing(const FeatureSchema& schema, const NetConfig& net,
                                     std::uint64_t seed) {
  schema.validate();
  if (net.embed_dim < 1)
    throw std::invalid_argument("init_deep_crossing: embed_dim must be >= 1");
  std::mt19937_64 rng(seed);
  DeepCrossingModel model;
  model.schema = schema;
  for (const auto& g : schema.groups) {
    EmbeddingLayer layer;
    if (g.embed) {
      layer.W = Matrix(net.embed_dim, g.dim);
      double bound = std::sqrt(6.0 / (net.embed_dim + g.dim));
      fill_uniform(layer.W.a, bound, rng);
      layer.b.assign(net.embed_dim, 0.0);
    } else if (g.kind == GroupKind::kSparse) {
      throw std::invalid_argument("init_deep_crossing: sparse group " + g.name +
                                  " must be embedded");
    }
    model.embeddings.push_back(std::move(layer));
  }
  int d = model.stacking_dim();
  for (int h : net.residual_inner) {
    if (h < 1) throw std::invalid_argument("init_deep_crossing: residual width < 1");
    ResidualUnit unit;
    unit.W1 = Matrix(h, d);
    fill_uniform(unit.W1.a, std::sqrt(6.0 / (h + d)), rng);
    unit.b1.assign(h, 0.0);
    unit.W2 = Matrix(d, h);
    fill_uniform(unit.W2.a, std::sqrt(6.0 / (d + h)), rng);
    unit.b2.assign(d, 0.0);
    model.residual_units.push_back(std::move(unit));
  }
  model.scoring_w.assign(d, 0.0);
  fill_uniform(model.scoring_w, std::sqrt(6.0 / (d + 1)), rng);
  model.scoring_b = 0.0;
  return model;
}

StackingVector stacking_forward(const DeepCrossingModel& model, const Sample& s,
                                std::size_t* mults) {
  if (s.fields.size() != model.schema.groups.size())
    throw std::invalid_argument("stacking_forward: field count != group count");
  std::vector<std::vector<double>> parts;
  parts.reserve(model.schema.groups.size());
  for (std::size_t j = 0; j < model.schema.groups.size(); ++j) {
    const auto& g = model.schema.groups[j];
    if (g.embed) {
      if (g.kind == GroupKind::kSparse)
        parts.push_back(
            embed_forward(model.embeddings[j], s.sparse(static_cast<int>(j)), mults));
      else
        parts.push_back(
            embed_forward(model.embeddings[j], s.dense(static_cast<int>(j)), mults));
    } else {
      parts.push_back(s.dense(static_cast<int>(j)));
    }
  }
  return stack(parts);
}

double predict_deep_crossing(const DeepCrossingModel& model, const Sample& s) {
  return clamp_prob(full_forward(model, s, nullptr));
}

double batch_loss_and_grad(const DeepCrossingModel& model, const Dataset& ds,
                           std::span<const std::size_t> idx, double l2,
                           DeepCrossingModel* grad) {
  if (idx.empty()) throw std::invalid_argument("batch_loss_and_grad: empty batch");
  double loss = 0.0;
  double inv_n = 1.0 / static_cast<double>(idx.size());
  ForwardCache cache;
  for (std::size_t i : idx) {
    const Sample& s = ds.samples[i];
    full_forward(model, s, &cache);
    loss += log_loss(clamp_prob(cache.p), s.label);
    if (grad) {
      double d_raw = (cache.p - s.label) * inv_n;
      backward(model, s, cache, d_raw, *grad);
    }
  }
  loss *= inv_n;
  if (l2 > 0.0) {
    auto weight_l2 = [&](const std::vector<double>& w, std::vector<double>* gw) {
      for (std::size_t k = 0; k < w.size(); ++k) {
        loss += 0.5 * l2 * w[k] * w[k];
        if (gw) (*gw)[k] += l2 * w[k];
      }
    };
    DeepCrossingModel* g = grad;
    for (std::size_t j = 0; j < model.embeddings.size(); ++j)
      weight_l2(model.embeddings[j].W.a, g ? &g->embeddings[j].W.a : nullptr);
    for (std::size_t u = 0; u < model.residual_units.size(); ++u) {
      weight_l2(model.residual_units[u].W1.a,
                g ? &g->residual_units[u].W1.a : nullptr);
      weight_l2(model.residual_units[u].W2.a,
                g ? &g->residual_units[u].W2.a : nullptr);
    }
    weight_l2(model.scoring_w, g ? &g->scoring_w : nullptr);
  }
  return loss;
}

std::vector<double*> parameter_view(DeepCrossingModel& model) {
  std::vector<double*> out = embedding_parameter_view(model);
  for (auto& u : model.residual_units) {
    for (auto& v : u.W1.a) out.push_back(&v);
    for (auto& v : u.b1) out.push_back(&v);
    for (auto& v : u.W2.a) out.push_back(&v);
    for (auto& v : u.b2) out.push_back(&v);
  }
  for (auto& v : model.scoring_w) out.push_back(&v);
  out.push_back(&model.scoring_b);
  return out;
}

std::vector<double*> embedding_parameter_view(DeepCrossingModel& model) {
  std::vector<double*> out;
  for (auto& e : model.embeddings) {
    for (auto& v : e.W.a) out.push_back(&v);
    for (auto& v : e.b) out.push_back(&v);
  }
  return out;
}

DeepCrossingModel train_deep_crossing(const Dataset& ds, const NetConfig& net,
                                      const TrainConfig& cfg,
                                      std::vector<double>* epoch_losses) {
  cfg.validate();
  if (ds.samples.empty())
    throw std::invalid_argument("train_deep_crossing: empty dataset");
  DeepCrossingModel model = init_deep_crossing(ds.schema, net, cfg.seed);
  DeepCrossingModel grad = make_gradient_holder(model);
  auto params = parameter_view(model);
  auto grad_params = parameter_view(grad);
  std::vector<const double*> grad_view(grad_params.begin(), grad_params.end());
  AdamOptimizer adam(params.size(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                     cfg.adam_eps);

  std::vector<std::size_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> idx(order.data() + start, len);
      for (auto* g : grad_params) *g = 0.0;
      double loss = batch_loss_and_grad(model, ds, idx, cfg.l2, &grad);
      check_finite_batch(loss);
      if (cfg.learning_rate > 0.0) adam.step(params, grad_view);
      epoch_loss += loss;
      ++n_batches;
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / n_batches);
  }
  return model;
}

StackedDataset extract_stacking(const Dataset& ds, const DeepCrossingModel& model) {
  model.validate();
  if (model.schema.serialize() != ds.schema.serialize())
    throw std::invalid_argument("extract_stacking: schema mismatch");
  StackedDataset out;
  out.dim = model.stacking_dim();
  out.labels.reserve(ds.samples.size());
  out.rows.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    out.labels.push_back(s.label);
    out.rows.push_back(stacking_forward(model, s).values);
  }
  return out;
}

Checkpoint to_checkpoint(const DeepCrossingModel& model) {
  Checkpoint ck;
  auto add = [&](const std::string& name, std::vector<std::uint64_t> shape,
                 const std::vector<double>& data) {
    ck.tensors.push_back({name, std::move(shape), data});
  };
  for (std::size_t j = 0; j < model.schema.groups.size(); ++j) {
    const auto& g = model.schema.groups[j];
    if (!g.embed) continue;
    const auto& e = model.embeddings[j];
    add("embed." + g.name + ".W",
        {static_cast<std::uint64_t>(e.W.rows), static_cast<std::uint64_t>(e.W.cols)},
        e.W.a);
    add("embed." + g.name + ".b", {e.b.size()}, e.b);
  }
  for (std::size_t u = 0; u < model.residual_units.size(); ++u) {
    const auto& ru = model.residual_units[u];
    std::string prefix = "ru" + std::to_string(u) + ".";
    add(prefix + "W1",
        {static_cast<std::uint64_t>(ru.W1.rows), static_cast<std::uint64_t>(ru.W1.cols)},
        ru.W1.a);
    add(prefix + "b1", {ru.b1.size()}, ru.b1);
    add(prefix + "W2",
        {static_cast<std::uint64_t>(ru.W2.rows), static_cast<std::uint64_t>(ru.W2.cols)},
        ru.W2.a);
    add(prefix + "b2", {ru.b2.size()}, ru.b2);
  }
  add("scoring.w", {model.scoring_w.size()}, model.scoring_w);
  add("scoring.b", {1}, {model.scoring_b});

  std::ostringstream manifest;
  manifest << "embedforest model checkpoint\n";
  for (const auto& t : ck.tensors) {
    manifest << "tensor " << t.name;
    for (auto d : t.shape) manifest << ' ' << d;
    manifest << '\n';
  }
  manifest << "schema:\n" << model.schema.serialize();
  ck.manifest = manifest.str();
  return ck;
}

DeepCrossingModel from_checkpoint(const Checkpoint& ck) {
  auto pos = ck.manifest.find("schema:\n");
  if (pos == std::string::npos)
    throw std::runtime_error("model checkpoint: missing schema section");
  FeatureSchema schema = FeatureSchema::parse(ck.manifest.substr(pos + 8));

  auto find = [&](const std::string& name) -> const NamedTensor* {
    for (const auto& t : ck.tensors)
      if (t.name == name) return &t;
    return nullptr;
  };
  auto require = [&](const std::string& name) -> const NamedTensor& {
    const NamedTensor* t = find(name);
    if (!t) throw std::runtime_error("model checkpoint: missing tensor " + name);
    return *t;
  };

  DeepCrossingModel model;
  model.schema = schema;
  for (const auto& g : schema.groups) {
    EmbeddingLayer layer;
    if (g.embed) {
      const auto& tw = require("embed." + g.name + ".W");
      if (tw.shape.size() != 2)
        throw std::runtime_error("model checkpoint: bad shape for " + tw.name);
      layer.W = Matrix(static_cast<int>(tw.shape[0]), static_cast<int>(tw.shape[1]));
      layer.W.a = tw.data;
      layer.b = require("embed." + g.name + ".b").data;
    }
    model.embeddings.push_back(std::move(layer));
  }
  for (std::size_t u = 0;; ++u) {
    std::string prefix = "ru" + std::to_string(u) + ".";
    const NamedTensor* tw1 = find(prefix + "W1");
    if (!tw1) break;
    ResidualUnit unit;
    unit.W1 = Matrix(static_cast<int>(tw1->shape[0]), static_cast<int>(tw1->shape[1]));
    unit.W1.a = tw1->data;
    unit.b1 = require(prefix + "b1").data;
    const auto& tw2 = require(prefix + "W2");
    unit.W2 = Matrix(static_cast<int>(tw2.shape[0]), static_cast<int>(tw2.shape[1]));
    unit.W2.a = tw2.data;
    unit.b2 = require(prefix + "b2").data;
    model.residual_units.push_back(std::move(unit));
  }
  model.scoring_w = require("scoring.w").data;
  model.scoring_b = require("scoring.b").data.at(0);
  model.validate();
  return model;
}

void save_model(const DeepCrossingModel& model, const std::string& path) {
  save_checkpoint(to_checkpoint(model), path);
}

DeepCrossingModel load_model(const std::string& path) {
  return from_checkpoint(load_checkpoint(path));
}

}  // namespace ef
