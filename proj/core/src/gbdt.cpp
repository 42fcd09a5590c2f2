/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ef/linalg.hpp"

namespace ef {
namespace {

// Splits whose gain is below this are treated as no-gain; keeps float noise
// from splitting constant-gradient nodes.
constexpr double kMinGain = 1e-12;

constexpr double kLossEps = 1e-12;

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct BuildNode {
  int id = -1;  // index into tree.nodes
  std::vector<int> samples;
  double sum_g = 0.0;
  double sum_h = 0.0;
  int depth = 0;
  SplitCandidate best;
};

SplitCandidate scan_node(const StackedDataset& ds, const std::vector<int>& samples,
                         std::span<const double> g, std::span<const double> h,
                         const GbdtConfig& cfg) {
  SplitCandidate best;
  std::vector<double> vals(samples.size()), gs(samples.size()), hs(samples.size());
  std::vector<int> order(samples.size());
  for (int f = 0; f < ds.dim; ++f) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return ds.rows[samples[a]][f] < ds.rows[samples[b]][f];
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
      int i = samples[order[k]];
      vals[k] = ds.rows[i][f];
      gs[k] = g[i];
      hs[k] = h[i];
    }
    SplitResult r = best_split(vals, gs, hs, cfg.lambda, cfg.min_samples_leaf);
    if (!r.found) continue;
    // Tie-break: larger gain, then smaller threshold, then smaller feature.
    if (!best.found || r.gain > best.gain ||
        (r.gain == best.gain && r.threshold < best.threshold)) {
      best.found = true;
      best.feature = f;
      best.threshold = r.threshold;
      best.gain = r.gain;
    }
  }
  return best;
}

std::string format17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void export_preorder(const Tree& tree, int node, const std::vector<int>& preorder_id,
                     std::ostringstream& out) {
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf()) {
    out << "L " << preorder_id[node] << ' ' << format17(n.value) << '\n';
  } else {
    out << "N " << preorder_id[node] << ' ' << n.feature << ' '
        << format17(n.threshold) << ' ' << preorder_id[n.left] << ' '
        << preorder_id[n.right] << '\n';
    export_preorder(tree, n.left, preorder_id, out);
    export_preorder(tree, n.right, preorder_id, out);
  }
}

void assign_preorder(const Tree& tree, int node, int& next, std::vector<int>& ids) {
  ids[node] = next++;
  if (!tree.nodes[node].is_leaf()) {
    assign_preorder(tree, tree.nodes[node].left, next, ids);
    assign_preorder(tree, tree.nodes[node].right, next, ids);
  }
}

}  // namespace

double Tree::predict(std::span<const double> y, std::size_t* node_visits) const {
  int node = 0;
  while (!nodes[node].is_leaf()) {
    if (node_visits) ++*node_visits;
    const TreeNode& n = nodes[node];
    node = y[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes[node].value;
}

int Tree::depth() const {
  int max_depth = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    if (nodes[node].is_leaf())
      max_depth = std::max(max_depth, d);
    else {
      stack.emplace_back(nodes[node].left, d + 1);
      stack.emplace_back(nodes[node].right, d + 1);
    }
  }
  return max_depth;
}

int Tree::n_leaves() const {
  int count = 0;
  for (const auto& n : nodes)
    if (n.is_leaf()) ++count;
  return count;
}

void Tree::validate(int stacking_dim) const {
  if (nodes.empty()) throw std::invalid_argument("tree: no nodes");
  std::vector<char> seen(nodes.size(), 0);
  std::vector<int> stack{0};
  std::size_t visited = 0;
  while (!stack.empty()) {
    int node = stack.back();
    stack.pop_back();
    if (node < 0 || node >= static_cast<int>(nodes.size()))
      throw std::invalid_argument("tree: child id out of range: node " +
                                  std::to_string(node));
    if (seen[node]) throw std::invalid_argument("tree: node reached twice (cycle)");
    seen[node] = 1;
    ++visited;
    const TreeNode& n = nodes[node];
    if (!n.is_leaf()) {
      if (n.right < 0)
        throw std::invalid_argument("tree: internal node missing right child");
      if (n.feature < 0 || (stacking_dim > 0 && n.feature >= stacking_dim))
        throw std::invalid_argument("tree: feature index out of range at node " +
                                    std::to_string(node));
      if (!std::isfinite(n.threshold))
        throw std::invalid_argument("tree: non-finite threshold at node " +
                                    std::to_string(node));
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  if (visited != nodes.size())
    throw std::invalid_argument("tree: unreachable nodes present");
}

void GbdtConfig::validate() const {
  if (n_trees < 1) throw std::invalid_argument("GbdtConfig: n_trees must be >= 1");
  if (max_leaves < 2) throw std::invalid_argument("GbdtConfig: max_leaves must be >= 2");
  if (max_depth < 1) throw std::invalid_argument("GbdtConfig: max_depth must be >= 1");
  if (min_samples_leaf < 1)
    throw std::invalid_argument("GbdtConfig: min_samples_leaf must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("GbdtConfig: lambda must be >= 0");
  if (learning_rate <= 0.0)
    throw std::invalid_argument("GbdtConfig: learning_rate must be > 0");
}

SplitResult best_split(std::span<const double> values, std::span<const double> g,
                       std::span<const double> h, double lambda, int min_leaf) {
  SplitResult best;
  std::size_t n = values.size();
  if (n < 2) return best;
  double total_g = 0.0, total_h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total_g += g[i];
    total_h += h[i];
  }
  double parent = total_g * total_g / (total_h + lambda);
  double gl = 0.0, hl = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    gl += g[i];
    hl += h[i];
    if (values[i] == values[i + 1]) continue;
    std::size_t n_left = i + 1, n_right = n - n_left;
    if (n_left < static_cast<std::size_t>(min_leaf) ||
        n_right < static_cast<std::size_t>(min_leaf))
      continue;
    double gr = total_g - gl, hr = total_h - hl;
    double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
    if (gain > kMinGain && (!best.found || gain > best.gain)) {
      best.found = true;
      best.threshold = 0.5 * (values[i] + values[i + 1]);
      best.gain = gain;
    }
  }
  return best;
}

Forest train_gbdt(const StackedDataset& ds, const GbdtConfig& cfg,
                  std::vector<double>* round_losses) {
  cfg.validate();
  if (ds.rows.empty()) throw std::invalid_argument("train_gbdt: empty dataset");
  std::size_t n = ds.rows.size();

  Forest forest;
  forest.learning_rate = cfg.learning_rate;
  if (cfg.base_score) {
    forest.base_score = *cfg.base_score;
  } else {
    double pos = 0.0;
    for (int t : ds.labels) pos += t;
    double prior = std::clamp(pos / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    forest.base_score = std::log(prior / (1.0 - prior));
  }

  std::vector<double> raw(n, forest.base_score);
  std::vector<double> g(n), h(n);

  for (int round = 0; round < cfg.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      double p = sigmoid(raw[i]);
      g[i] = p - ds.labels[i];
      h[i] = p * (1.0 - p);
    }

    Tree tree;
    tree.nodes.emplace_back();  // root, leaf for now
    std::vector<BuildNode> leaves;
    {
      BuildNode root;
      root.id = 0;
      root.samples.resize(n);
      std::iota(root.samples.begin(), root.samples.end(), 0);
      root.sum_g = std::accumulate(g.begin(), g.end(), 0.0);
      root.sum_h = std::accumulate(h.begin(), h.end(), 0.0);
      if (root.depth < cfg.max_depth) root.best = scan_node(ds, root.samples, g, h, cfg);
      leaves.push_back(std::move(root));
    }

    int n_leaves = 1;
    while (n_leaves < cfg.max_leaves) {
      // Best-first: expand the pending leaf with the largest gain;
      // ties go to the earliest-created node.
      int pick = -1;
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        if (!leaves[k].best.found) continue;
        if (pick < 0 || leaves[k].best.gain > leaves[pick].best.gain)
          pick = static_cast<int>(k);
      }
      if (pick < 0) break;

      BuildNode node = std::move(leaves[pick]);
      leaves.erase(leaves.begin() + pick);

      BuildNode lo, hi;
      lo.depth = hi.depth = node.depth + 1;
      for (int i : node.samples) {
        if (ds.rows[i][node.best.feature] < node.best.threshold) {
          lo.samples.push_back(i);
          lo.sum_g += g[i];
          lo.sum_h += h[i];
        } else {
          hi.samples.push_back(i);
          hi.sum_g += g[i];
          hi.sum_h += h[i];
        }
      }

      TreeNode& parent = tree.nodes[node.id];
      parent.feature = node.best.feature;
      parent.threshold = node.best.threshold;
      lo.id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      hi.id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes[node.id].left = lo.id;
      tree.nodes[node.id].right = hi.id;

      for (BuildNode* child : {&lo, &hi}) {
        if (child->depth < cfg.max_depth &&
            static_cast<int>(child->samples.size()) >= 2 * cfg.min_samples_leaf)
          child->best = scan_node(ds, child->samples, g, h, cfg);
      }
      leaves.push_back(std::move(lo));
      leaves.push_back(std::move(hi));
      ++n_leaves;
    }

    for (const auto& leaf : leaves) {
      double value = -leaf.sum_g / (leaf.sum_h + cfg.lambda);
      tree.nodes[leaf.id].value = value;
      double delta = cfg.learning_rate * value;
      for (int i : leaf.samples) raw[i] += delta;
    }
    forest.trees.push_back(std::move(tree));

    if (round_losses) {
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double p = std::clamp(sigmoid(raw[i]), kLossEps, 1.0 - kLossEps);
        loss += ds.labels[i] ? -std::log(p) : -std::log(1.0 - p);
      }
      round_losses->push_back(loss / static_cast<double>(n));
    }
  }
  return forest;
}

double predict_hard(const Forest& forest, std::span<const double> y,
                    std::size_t* node_visits) {
  double acc = 0.0;
  for (const auto& tree : forest.trees) acc += tree.predict(y, node_visits);
  return forest.base_score + forest.learning_rate * acc;
}

std::string export_forest(const Forest& forest) {
  std::ostringstream out;
  out << "forest 1\n";
  out << "n_trees " << forest.trees.size() << '\n';
  out << "base_score " << format17(forest.base_score) << '\n';
  out << "learning_rate " << format17(forest.learning_rate) << '\n';
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const Tree& tree = forest.trees[t];
    out << "tree " << t << ' ' << tree.nodes.size() << '\n';
    std::vector<int> ids(tree.nodes.size(), -1);
    int next = 0;
    assign_preorder(tree, 0, next, ids);
    export_preorder(tree, 0, ids, out);
  }
  return out.str();
}

Forest import_forest(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  int version = 0;
  if (!(in >> tok >> version) || tok != "forest")
    throw std::invalid_argument("forest document: missing `forest <version>` header");
  if (version != 1)
    throw std::invalid_argument("forest document: unsupported version " +
                                std::to_string(version));
  std::size_t n_trees = 0;
  Forest forest;
  if (!(in >> tok >> n_trees) || tok != "n_trees")
    throw std::invalid_argument("forest document: missing n_trees");
  if (!(in >> tok >> forest.base_score) || tok != "base_score")
    throw std::invalid_argument("forest document: missing base_score");
  if (!(in >> tok >> forest.learning_rate) || tok != "learning_rate")
    throw std::invalid_argument("forest document: missing learning_rate");
  forest.trees.reserve(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    std::size_t index = 0, n_nodes = 0;
    if (!(in >> tok >> index >> n_nodes) || tok != "tree" || index != t)
      throw std::invalid_argument("forest document: bad tree header for tree " +
                                  std::to_string(t));
    Tree tree;
    tree.nodes.resize(n_nodes);
    std::vector<char> defined(n_nodes, 0);
    for (std::size_t k = 0; k < n_nodes; ++k) {
      std::string kind;
      long id = -1;
      if (!(in >> kind >> id))
        throw std::invalid_argument("forest document: truncated tree " +
                                    std::to_string(t));
      if (id < 0 || id >= static_cast<long>(n_nodes))
        throw std::invalid_argument("forest document: node id out of range: " +
                                    std::to_string(id));
      if (defined[id])
        throw std::invalid_argument("forest document: duplicate node id " +
                                    std::to_string(id));
      defined[id] = 1;
      TreeNode& n = tree.nodes[id];
      if (kind == "N") {
        if (!(in >> n.feature >> n.threshold >> n.left >> n.right))
          throw std::invalid_argument("forest document: malformed node " +
                                      std::to_string(id));
      } else if (kind == "L") {
        if (!(in >> n.value))
          throw std::invalid_argument("forest document: malformed leaf " +
                                      std::to_string(id));
      } else {
        throw std::invalid_argument("forest document: unknown record `" + kind + "`");
      }
    }
    tree.validate(0);
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

double mean_log_loss(const Forest& forest, const StackedDataset& ds) {
  if (ds.rows.empty()) throw std::invalid_argument("mean_log_loss: empty dataset");
  double loss = 0.0;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    double p = std::clamp(sigmoid(predict_hard(forest, ds.rows[i])), kLossEps,
                          1.0 - kLossEps);
    loss += ds.labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return loss / static_cast<double>(ds.rows.size());
}

}  // namespace ef
