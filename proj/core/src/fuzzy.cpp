/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ef/adam.hpp"
#include "ef/linalg.hpp"

namespace ef {
namespace {

constexpr double kMinInvWidth = 1e-8;
constexpr double kIqrFloor = 1e-6;

std::string format17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Subtree aggregate S(n) = sum over leaves below n of pi_l times the
/// product of branch probabilities strictly below n.
double subtree_value(const FuzzyTree& tree, const std::vector<RoutingProbs::Node>& p,
                     int node, std::vector<double>& out) {
  const FuzzyNode& n = tree.nodes[node];
  double s;
  if (n.is_leaf())
    s = n.leaf_value;
  else
    s = p[node].mu_lo * subtree_value(tree, p, n.left, out) +
        p[node].mu_hi * subtree_value(tree, p, n.right, out);
  out[node] = s;
  return s;
}

double quantile(std::vector<double>& sorted, double q) {
  double pos = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

void FuzzyForest::validate(int stacking_dim) const {
  for (const auto& tree : trees) {
    if (tree.nodes.empty()) throw std::invalid_argument("fuzzy tree: no nodes");
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) continue;
      if (n.right < 0 || n.left >= static_cast<int>(tree.nodes.size()) ||
          n.right >= static_cast<int>(tree.nodes.size()))
        throw std::invalid_argument("fuzzy tree: child id out of range");
      if (stacking_dim > 0 && (n.feature < 0 || n.feature >= stacking_dim))
        throw std::invalid_argument("fuzzy tree: feature index out of range");
      if (!(n.inv_width > 0.0) || !std::isfinite(n.inv_width))
        throw std::invalid_argument("fuzzy tree: inverse width must be positive");
      if (!std::isfinite(n.threshold))
        throw std::invalid_argument("fuzzy tree: non-finite threshold");
    }
  }
}

NodeRouting node_routing(double inv_width, double threshold, double y) {
  if (!(inv_width > 0.0))
    throw std::invalid_argument("node_routing: inverse width must be positive");
  double z = std::clamp(inv_width * (y - threshold), -500.0, 500.0);
  double mu_hi = sigmoid(z);
  return {mu_hi, 1.0 - mu_hi};
}

FuzzyForward fuzzy_forward(const FuzzyForest& forest, std::span<const double> y,
                           std::size_t* node_visits) {
  FuzzyForward out;
  out.probs.trees.resize(forest.trees.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const FuzzyTree& tree = forest.trees[t];
    auto& p = out.probs.trees[t];
    p.assign(tree.nodes.size(), {});
    p[0].path = 1.0;
    std::vector<int> stack{0};
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      const FuzzyNode& n = tree.nodes[i];
      if (node_visits) ++*node_visits;
      if (n.is_leaf()) {
        acc += n.leaf_value * p[i].path;
        continue;
      }
      NodeRouting r = node_routing(n.inv_width, n.threshold, y[n.feature]);
      p[i].mu_hi = r.mu_hi;
      p[i].mu_lo = r.mu_lo;
      p[n.left].path = p[i].path * r.mu_lo;
      p[n.right].path = p[i].path * r.mu_hi;
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  out.raw = forest.base_score + forest.learning_rate * acc;
  return out;
}

FuzzyGradients fuzzy_backward(const FuzzyForest& forest, std::span<const double> y,
                              const RoutingProbs& probs, double delta_t) {
  if (probs.trees.size() != forest.trees.size())
    throw std::invalid_argument("fuzzy_backward: routing probs shape mismatch");
  FuzzyGradients g;
  g.d_value.resize(forest.trees.size());
  g.d_c.resize(forest.trees.size());
  g.d_a.resize(forest.trees.size());
  g.d_y.assign(y.size(), 0.0);
  double scale = delta_t * forest.learning_rate;
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const FuzzyTree& tree = forest.trees[t];
    const auto& p = probs.trees[t];
    if (p.size() != tree.nodes.size())
      throw std::invalid_argument("fuzzy_backward: stale routing probs");
    g.d_value[t].assign(tree.nodes.size(), 0.0);
    g.d_c[t].assign(tree.nodes.size(), 0.0);
    g.d_a[t].assign(tree.nodes.size(), 0.0);

    std::vector<double> sub(tree.nodes.size(), 0.0);
    subtree_value(tree, p, 0, sub);

    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const FuzzyNode& n = tree.nodes[i];
      if (n.is_leaf()) {
        g.d_value[t][i] = scale * p[i].path;
        continue;
      }
      double s = p[i].mu_hi * p[i].mu_lo;  // sigmoid derivative factor
      double diff = sub[n.right] - sub[n.left];
      double yr = y[n.feature];
      g.d_c[t][i] = scale * p[i].path * s * (yr - n.threshold) * diff;
      g.d_a[t][i] = scale * p[i].path * n.inv_width * s * -diff;
      g.d_y[n.feature] += scale * p[i].path * n.inv_width * s * diff;
    }
  }
  return g;
}

FuzzyForest init_fuzzy(const Forest& forest, const StackedDataset& ds, double kappa) {
  if (forest.trees.empty()) throw std::invalid_argument("init_fuzzy: empty forest");
  if (ds.rows.empty()) throw std::invalid_argument("init_fuzzy: empty dataset");
  if (!(kappa > 0.0)) throw std::invalid_argument("init_fuzzy: kappa must be positive");

  // Inverse width per feature dimension: kappa over the feature's IQR.
  std::vector<double> inv_width(ds.dim, 0.0);
  std::vector<char> computed(ds.dim, 0);
  auto width_for = [&](int f) {
    if (computed[f]) return inv_width[f];
    std::vector<double> col(ds.rows.size());
    for (std::size_t i = 0; i < ds.rows.size(); ++i) col[i] = ds.rows[i][f];
    std::sort(col.begin(), col.end());
    double iqr = quantile(col, 0.75) - quantile(col, 0.25);
    inv_width[f] = kappa / std::max(iqr, kIqrFloor);
    computed[f] = 1;
    return inv_width[f];
  };

  FuzzyForest out;
  out.base_score = forest.base_score;
  out.learning_rate = forest.learning_rate;
  out.trees.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) {
    FuzzyTree ft;
    ft.nodes.reserve(tree.nodes.size());
    for (const auto& n : tree.nodes) {
      FuzzyNode fn;
      fn.feature = n.feature;
      fn.threshold = n.threshold;
      fn.left = n.left;
      fn.right = n.right;
      fn.leaf_value = n.value;
      if (!n.is_leaf()) {
        if (n.feature < 0 || n.feature >= ds.dim)
          throw std::invalid_argument("init_fuzzy: feature index outside dataset");
        fn.inv_width = width_for(n.feature);
      }
      ft.nodes.push_back(fn);
    }
    out.trees.push_back(std::move(ft));
  }
  return out;
}

Forest harden(const FuzzyForest& forest) {
  Forest out;
  out.base_score = forest.base_score;
  out.learning_rate = forest.learning_rate;
  out.trees.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) {
    Tree t;
    t.nodes.reserve(tree.nodes.size());
    for (const auto& n : tree.nodes)
      t.nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf_value});
    out.trees.push_back(std::move(t));
  }
  return out;
}

void FuzzyTrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("FuzzyTrainConfig: epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("FuzzyTrainConfig: batch_size must be >= 1");
  if (learning_rate < 0.0)
    throw std::invalid_argument("FuzzyTrainConfig: learning_rate must be >= 0");
  if (!(kappa > 0.0))
    throw std::invalid_argument("FuzzyTrainConfig: kappa must be positive");
}

JointTrainResult joint_train(const Dataset& ds, DeepCrossingModel& model,
                             FuzzyForest& forest, const FuzzyTrainConfig& cfg,
                             std::vector<double>* epoch_losses) {
  cfg.validate();
  model.validate();
  if (ds.samples.empty()) throw std::invalid_argument("joint_train: empty dataset");
  int dim = model.stacking_dim();
  forest.validate(dim);

  // Parameter list: embedding weights first, then per-node forest params.
  std::vector<double*> params = embedding_parameter_view(model);
  std::size_t n_embed = params.size();
  std::vector<double*> width_params;
  for (auto& tree : forest.trees) {
    for (auto& n : tree.nodes) {
      if (n.is_leaf()) {
        params.push_back(&n.leaf_value);
      } else {
        params.push_back(&n.threshold);
        params.push_back(&n.inv_width);
        width_params.push_back(&n.inv_width);
      }
    }
  }
  std::vector<double> grads(params.size(), 0.0);
  std::vector<const double*> grad_view(params.size());
  for (std::size_t i = 0; i < grads.size(); ++i) grad_view[i] = &grads[i];

  AdamOptimizer adam(params.size(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                     cfg.adam_eps);

  // Gradient accumulators for the embedding chain, reused across samples.
  DeepCrossingModel embed_grad = model;
  auto embed_grad_view = embedding_parameter_view(embed_grad);

  struct GroupCache {
    std::vector<double> z;  // pre-activation (embedded groups only)
  };
  std::vector<GroupCache> caches(model.schema.groups.size());

  auto forward_sample = [&](const Sample& s, std::vector<double>& y) {
    std::vector<std::vector<double>> parts;
    parts.reserve(model.schema.groups.size());
    for (std::size_t j = 0; j < model.schema.groups.size(); ++j) {
      const auto& gr = model.schema.groups[j];
      if (!gr.embed) {
        parts.push_back(s.dense(static_cast<int>(j)));
        continue;
      }
      const auto& layer = model.embeddings[j];
      auto& z = caches[j].z;
      z.assign(layer.b.begin(), layer.b.end());
      if (gr.kind == GroupKind::kSparse) {
        const auto& sv = s.sparse(static_cast<int>(j));
        for (std::size_t k = 0; k < sv.indices.size(); ++k)
          for (int r = 0; r < layer.W.rows; ++r)
            z[r] += layer.W(r, sv.indices[k]) * sv.values[k];
      } else {
        const auto& dv = s.dense(static_cast<int>(j));
        for (int r = 0; r < layer.W.rows; ++r) {
          double acc = z[r];
          for (int c = 0; c < layer.W.cols; ++c) acc += layer.W(r, c) * dv[c];
          z[r] = acc;
        }
      }
      std::vector<double> part(z.size());
      for (std::size_t r = 0; r < z.size(); ++r) part[r] = relu(z[r]);
      parts.push_back(std::move(part));
    }
    StackingVector sv = stack(parts);
    y = std::move(sv.values);
    return sv.offsets;
  };

  auto full_loss = [&]() {
    double loss = 0.0;
    std::vector<double> y;
    for (const auto& s : ds.samples) {
      forward_sample(s, y);
      double p = std::clamp(sigmoid(fuzzy_forward(forest, y).raw), kProbEps,
                            1.0 - kProbEps);
      loss += log_loss(p, s.label);
    }
    return loss / static_cast<double>(ds.samples.size());
  };

  JointTrainResult result;
  result.initial_loss = full_loss();

  std::vector<std::size_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);

  // Last-good snapshot, restored if the loss turns non-finite.
  std::vector<double> snapshot(params.size());
  auto take_snapshot = [&] {
    for (std::size_t i = 0; i < params.size(); ++i) snapshot[i] = *params[i];
  };
  auto restore_snapshot = [&] {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = snapshot[i];
  };
  take_snapshot();

  std::vector<double> y;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      double inv_b = 1.0 / static_cast<double>(len);
      std::fill(grads.begin(), grads.end(), 0.0);
      for (auto* gp : embed_grad_view) *gp = 0.0;
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const Sample& s = ds.samples[order[start + k]];
        std::vector<int> offsets = forward_sample(s, y);
        FuzzyForward fwd = fuzzy_forward(forest, y);
        double p = sigmoid(fwd.raw);
        batch_loss += log_loss(std::clamp(p, kProbEps, 1.0 - kProbEps), s.label);
        double delta = (p - s.label) * inv_b;
        FuzzyGradients fg = fuzzy_backward(forest, y, fwd.probs, delta);

        std::size_t slot = n_embed;
        for (std::size_t t = 0; t < forest.trees.size(); ++t) {
          const FuzzyTree& tree = forest.trees[t];
          for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            if (tree.nodes[i].is_leaf()) {
              grads[slot++] += fg.d_value[t][i];
            } else {
              grads[slot++] += fg.d_a[t][i];
              grads[slot++] += fg.d_c[t][i];
            }
          }
        }

        // Chain d_y through the rectifier into the embedding weights.
        for (std::size_t j = 0; j < model.schema.groups.size(); ++j) {
          const auto& gr = model.schema.groups[j];
          if (!gr.embed) continue;
          const auto& layer = model.embeddings[j];
          auto& gl = embed_grad.embeddings[j];
          int off = offsets[j];
          for (int r = 0; r < layer.W.rows; ++r) {
            if (caches[j].z[r] <= 0.0) continue;
            double dz = fg.d_y[off + r];
            if (dz == 0.0) continue;
            gl.b[r] += dz;
            if (gr.kind == GroupKind::kSparse) {
              const auto& spv = s.sparse(static_cast<int>(j));
              for (std::size_t m = 0; m < spv.indices.size(); ++m)
                gl.W(r, spv.indices[m]) += dz * spv.values[m];
            } else {
              const auto& dv = s.dense(static_cast<int>(j));
              for (int c = 0; c < layer.W.cols; ++c) gl.W(r, c) += dz * dv[c];
            }
          }
        }
      }
      batch_loss *= inv_b;
      if (!std::isfinite(batch_loss)) {
        restore_snapshot();
        throw std::runtime_error(
            "joint_train: loss became non-finite; parameters restored to the "
            "last epoch boundary");
      }
      for (std::size_t i = 0; i < n_embed; ++i) grads[i] = *embed_grad_view[i];
      if (cfg.learning_rate > 0.0) {
        adam.step(params, grad_view);
        for (auto* w : width_params) *w = std::max(*w, kMinInvWidth);
      }
      epoch_loss += batch_loss;
      ++n_batches;
    }
    take_snapshot();
    if (epoch_losses) epoch_losses->push_back(epoch_loss / n_batches);
  }
  result.final_loss = full_loss();
  return result;
}

namespace {

template <typename TreeT>
void leaf_depths(const TreeT& tree, int node, int depth, long& sum, long& count) {
  if (tree.nodes[node].is_leaf()) {
    sum += depth;
    ++count;
  } else {
    leaf_depths(tree, tree.nodes[node].left, depth + 1, sum, count);
    leaf_depths(tree, tree.nodes[node].right, depth + 1, sum, count);
  }
}

template <typename ForestT>
ComplexityStats stats_impl(const ForestT& forest) {
  if (forest.trees.empty())
    throw std::invalid_argument("complexity_stats: empty forest");
  ComplexityStats st;
  st.n_t = static_cast<int>(forest.trees.size());
  double depth_acc = 0.0, node_acc = 0.0;
  for (const auto& tree : forest.trees) {
    long sum = 0, count = 0;
    leaf_depths(tree, 0, 0, sum, count);
    depth_acc += static_cast<double>(sum) / static_cast<double>(count);
    node_acc += static_cast<double>(tree.nodes.size());
  }
  st.d_t = depth_acc / st.n_t;
  st.l_t = node_acc / st.n_t;
  st.ratio = st.l_t / std::max(st.d_t, 1.0);
  return st;
}

}  // namespace

ComplexityStats complexity_stats(const Forest& forest) { return stats_impl(forest); }
ComplexityStats complexity_stats(const FuzzyForest& forest) {
  return stats_impl(forest);
}

std::string export_fuzzy_forest(const FuzzyForest& forest) {
  std::ostringstream out;
  out << "forest 2\n";
  out << "n_trees " << forest.trees.size() << '\n';
  out << "base_score " << format17(forest.base_score) << '\n';
  out << "learning_rate " << format17(forest.learning_rate) << '\n';
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const FuzzyTree& tree = forest.trees[t];
    out << "tree " << t << ' ' << tree.nodes.size() << '\n';
    // Pre-order with renumbered ids, matching the hard forest document.
    std::vector<int> ids(tree.nodes.size(), -1);
    int next = 0;
    std::vector<int> stack{0};
    auto assign = [&](auto&& self, int node) -> void {
      ids[node] = next++;
      if (!tree.nodes[node].is_leaf()) {
        self(self, tree.nodes[node].left);
        self(self, tree.nodes[node].right);
      }
    };
    assign(assign, 0);
    auto emit = [&](auto&& self, int node) -> void {
      const FuzzyNode& n = tree.nodes[node];
      if (n.is_leaf()) {
        out << "L " << ids[node] << ' ' << format17(n.leaf_value) << '\n';
      } else {
        out << "N " << ids[node] << ' ' << n.feature << ' ' << format17(n.threshold)
            << ' ' << format17(n.inv_width) << ' ' << ids[n.left] << ' '
            << ids[n.right] << '\n';
        self(self, n.left);
        self(self, n.right);
      }
    };
    emit(emit, 0);
  }
  return out.str();
}

FuzzyForest import_fuzzy_forest(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  int version = 0;
  if (!(in >> tok >> version) || tok != "forest")
    throw std::invalid_argument("fuzzy forest document: missing header");
  if (version != 2)
    throw std::invalid_argument(
        "fuzzy forest document: unsupported version " + std::to_string(version) +
        " (expected 2)");
  std::size_t n_trees = 0;
  FuzzyForest forest;
  if (!(in >> tok >> n_trees) || tok != "n_trees")
    throw std::invalid_argument("fuzzy forest document: missing n_trees");
  if (!(in >> tok >> forest.base_score) || tok != "base_score")
    throw std::invalid_argument("fuzzy forest document: missing base_score");
  if (!(in >> tok >> forest.learning_rate) || tok != "learning_rate")
    throw std::invalid_argument("fuzzy forest document: missing learning_rate");
  for (std::size_t t = 0; t < n_trees; ++t) {
    std::size_t index = 0, n_nodes = 0;
    if (!(in >> tok >> index >> n_nodes) || tok != "tree" || index != t)
      throw std::invalid_argument("fuzzy forest document: bad tree header");
    FuzzyTree tree;
    tree.nodes.resize(n_nodes);
    std::vector<char> defined(n_nodes, 0);
    for (std::size_t k = 0; k < n_nodes; ++k) {
      std::string kind;
      long id = -1;
      if (!(in >> kind >> id))
        throw std::invalid_argument("fuzzy forest document: truncated tree");
      if (id < 0 || id >= static_cast<long>(n_nodes) || defined[id])
        throw std::invalid_argument("fuzzy forest document: bad node id " +
                                    std::to_string(id));
      defined[id] = 1;
      FuzzyNode& n = tree.nodes[id];
      if (kind == "N") {
        if (!(in >> n.feature >> n.threshold >> n.inv_width >> n.left >> n.right))
          throw std::invalid_argument("fuzzy forest document: malformed node " +
                                      std::to_string(id));
      } else if (kind == "L") {
        if (!(in >> n.leaf_value))
          throw std::invalid_argument("fuzzy forest document: malformed leaf " +
                                      std::to_string(id));
      } else {
        throw std::invalid_argument("fuzzy forest document: unknown record `" +
                                    kind + "`");
      }
    }
    forest.trees.push_back(std::move(tree));
  }
  forest.validate(0);
  return forest;
}

}  // namespace ef
