/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "ef/serve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ef/hash.hpp"

namespace ef {
namespace {

constexpr char kMagic[4] = {'E', 'F', 'B', 'D'};
constexpr std::uint8_t kBundleVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("bundle: truncated file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void put_section(std::string& out, const std::string& name, const std::string& body) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint64_t>(out, body.size());
  out += body;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

using Clock = std::chrono::steady_clock;

}  // namespace

void ModelBundle::validate() const {
  model.validate();
  int dim = model.stacking_dim();
  for (const auto& tree : forest.trees) tree.validate(dim);
  if (mode == BundleMode::kThreeStep) {
    if (!fuzzy) throw std::invalid_argument("bundle: three-step mode without fuzzy forest");
    fuzzy->validate(dim);
  }
}

CompiledForest compile_forest(const Forest& forest, int stacking_dim) {
  CompiledForest out;
  out.base_score = forest.base_score;
  out.learning_rate = forest.learning_rate;
  for (const auto& tree : forest.trees) {
    tree.validate(stacking_dim);
    int base = static_cast<int>(out.feature.size());
    out.roots.push_back(base);
    // Breadth-first renumbering within the tree's block.
    std::vector<int> order;
    std::deque<int> queue{0};
    std::vector<int> new_id(tree.nodes.size(), -1);
    while (!queue.empty()) {
      int node = queue.front();
      queue.pop_front();
      new_id[node] = base + static_cast<int>(order.size());
      order.push_back(node);
      if (!tree.nodes[node].is_leaf()) {
        queue.push_back(tree.nodes[node].left);
        queue.push_back(tree.nodes[node].right);
      }
    }
    for (int node : order) {
      const TreeNode& n = tree.nodes[node];
      out.feature.push_back(n.feature);
      out.threshold.push_back(n.threshold);
      out.left.push_back(n.is_leaf() ? -1 : new_id[n.left]);
      out.right.push_back(n.is_leaf() ? -1 : new_id[n.right]);
      out.value.push_back(n.value);
    }
  }
  return out;
}

double predict_raw(const CompiledForest& forest, std::span<const double> y,
                   std::size_t* node_visits) {
  double acc = 0.0;
  for (int root : forest.roots) {
    int node = root;
    while (forest.left[node] >= 0) {
      if (node_visits) ++*node_visits;
      node = y[forest.feature[node]] < forest.threshold[node] ? forest.left[node]
                                                              : forest.right[node];
    }
    acc += forest.value[node];
  }
  return forest.base_score + forest.learning_rate * acc;
}

StackingVector Predictor::embed_stack(const Sample& s, std::size_t* mults) const {
  if (s.fields.size() != schema.groups.size())
    throw std::invalid_argument("predict: sample does not match schema");
  std::vector<std::vector<double>> parts;
  parts.reserve(schema.groups.size());
  for (std::size_t j = 0; j < schema.groups.size(); ++j) {
    const auto& g = schema.groups[j];
    if (g.embed) {
      if (g.kind == GroupKind::kSparse)
        parts.push_back(
            embed_forward(embeddings[j], s.sparse(static_cast<int>(j)), mults));
      else
        parts.push_back(
            embed_forward(embeddings[j], s.dense(static_cast<int>(j)), mults));
    } else {
      parts.push_back(s.dense(static_cast<int>(j)));
    }
  }
  return stack(parts);
}

double Predictor::predict(const Sample& s) const {
  StackingVector y = embed_stack(s);
  return sigmoid(predict_raw(forest, y.values));
}

Predictor compile(const ModelBundle& bundle) {
  bundle.validate();
  Predictor pred;
  pred.schema = bundle.model.schema;
  pred.embeddings = bundle.model.embeddings;
  pred.forest = compile_forest(bundle.forest, bundle.model.stacking_dim());
  return pred;
}

void BenchConfig::validate() const {
  if (warmup < 1) throw std::invalid_argument("bench: warmup must be >= 1");
  if (reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
}

double time_forest_ns_per_sample(const CompiledForest& forest,
                                 const std::vector<std::vector<double>>& inputs,
                                 int warmup, int reps) {
  if (inputs.empty()) throw std::invalid_argument("time_forest: no inputs");
  double sink = 0.0;
  auto pass = [&] {
    auto start = Clock::now();
    for (const auto& y : inputs) sink += predict_raw(forest, y);
    auto stop = Clock::now();
    return std::chrono::duration<double, std::nano>(stop - start).count() /
           static_cast<double>(inputs.size());
  };
  for (int i = 0; i < warmup; ++i) pass();
  std::vector<double> times(reps);
  for (auto& t : times) t = pass();
  // The sink keeps the optimizer from discarding the traversal.
  if (!std::isfinite(sink)) throw std::runtime_error("time_forest: non-finite output");
  return median(times);
}

double time_embedding_ns_per_sample(const Predictor& pred, const Dataset& ds,
                                    int warmup, int reps) {
  if (ds.samples.empty()) throw std::invalid_argument("time_embedding: no samples");
  double sink = 0.0;
  auto pass = [&] {
    auto start = Clock::now();
    for (const auto& s : ds.samples) sink += pred.embed_stack(s).values[0];
    auto stop = Clock::now();
    return std::chrono::duration<double, std::nano>(stop - start).count() /
           static_cast<double>(ds.samples.size());
  };
  for (int i = 0; i < warmup; ++i) pass();
  std::vector<double> times(reps);
  for (auto& t : times) t = pass();
  if (!std::isfinite(sink)) throw std::runtime_error("time_embedding: non-finite output");
  return median(times);
}

BenchReport bench(const Predictor& pred, const Dataset& ds, const BenchConfig& cfg) {
  cfg.validate();
  if (ds.samples.empty()) throw std::invalid_argument("bench: empty dataset");

  Dataset shuffled = ds;
  std::mt19937_64 rng(cfg.shuffle_seed);
  std::shuffle(shuffled.samples.begin(), shuffled.samples.end(), rng);

  // Stacking vectors precomputed once so T2 excludes embedding work.
  std::vector<std::vector<double>> stacked;
  stacked.reserve(shuffled.samples.size());
  for (const auto& s : shuffled.samples) stacked.push_back(pred.embed_stack(s).values);

  double sink = 0.0;
  std::vector<double> t1(cfg.reps), t2(cfg.reps);
  auto t1_pass = [&] {
    auto start = Clock::now();
    for (const auto& s : shuffled.samples) sink += pred.embed_stack(s).values[0];
    auto stop = Clock::now();
    return std::chrono::duration<double, std::nano>(stop - start).count() /
           static_cast<double>(shuffled.samples.size());
  };
  auto t2_pass = [&] {
    auto start = Clock::now();
    for (const auto& y : stacked) sink += predict_raw(pred.forest, y);
    auto stop = Clock::now();
    return std::chrono::duration<double, std::nano>(stop - start).count() /
           static_cast<double>(stacked.size());
  };
  for (int i = 0; i < cfg.warmup; ++i) {
    t1_pass();
    t2_pass();
  }
  std::vector<double> totals(cfg.reps);
  for (int r = 0; r < cfg.reps; ++r) {
    t1[r] = t1_pass();
    t2[r] = t2_pass();
    totals[r] = t1[r] + t2[r];
  }
  if (!std::isfinite(sink)) throw std::runtime_error("bench: non-finite output");

  BenchReport report;
  report.t1_ns = median(t1);
  report.t2_ns = median(t2);
  report.total_ns = report.t1_ns + report.t2_ns;
  report.p50_ns = percentile(totals, 0.50);
  report.p99_ns = percentile(totals, 0.99);
  report.reps = cfg.reps;
  report.n_t = static_cast<int>(pred.forest.roots.size());
  if (report.n_t > 0) {
    // Mean leaf depth over trees, derived by walking the flat arrays.
    double depth_acc = 0.0;
    for (std::size_t t = 0; t < pred.forest.roots.size(); ++t) {
      long sum = 0, leaves = 0;
      std::vector<std::pair<int, int>> stack{{pred.forest.roots[t], 0}};
      while (!stack.empty()) {
        auto [node, d] = stack.back();
        stack.pop_back();
        if (pred.forest.left[node] < 0) {
          sum += d;
          ++leaves;
        } else {
          stack.emplace_back(pred.forest.left[node], d + 1);
          stack.emplace_back(pred.forest.right[node], d + 1);
        }
      }
      depth_acc += static_cast<double>(sum) / static_cast<double>(leaves);
    }
    report.d_t = depth_acc / static_cast<double>(report.n_t);
  }
  report.stacking_dim = static_cast<int>(stacked.front().size());
  return report;
}

std::string bench_csv(const BenchReport& r, const std::string& config_name) {
  std::ostringstream out;
  out << "config,n_t,d_t,D,T1_ns,T2_ns,total_ns,p50_ns,p99_ns,reps\n";
  out << config_name << ',' << r.n_t << ',' << r.d_t << ',' << r.stacking_dim << ','
      << r.t1_ns << ',' << r.t2_ns << ',' << r.total_ns << ',' << r.p50_ns << ','
      << r.p99_ns << ',' << r.reps << '\n';
  return out.str();
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  bundle.validate();
  std::string buf;
  buf.append(kMagic, 4);
  put<std::uint8_t>(buf, kBundleVersion);
  put<std::uint8_t>(buf, bundle.mode == BundleMode::kThreeStep ? 1 : 0);

  std::ostringstream model_bytes;
  write_checkpoint(model_bytes, to_checkpoint(bundle.model));

  std::string forest_doc = bundle.mode == BundleMode::kThreeStep
                               ? export_fuzzy_forest(*bundle.fuzzy)
                               : export_forest(bundle.forest);

  std::ostringstream meta;
  meta << "created " << bundle.created << '\n';
  char digest[32];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(bundle.config_digest));
  meta << "config_digest " << digest << '\n';
  meta << "mode " << (bundle.mode == BundleMode::kThreeStep ? "three-step" : "two-step")
       << '\n';

  put<std::uint32_t>(buf, 4);  // section count
  put_section(buf, "schema", bundle.model.schema.serialize());
  put_section(buf, "embeddings", model_bytes.str());
  put_section(buf, "forest", forest_doc);
  put_section(buf, "metadata", meta.str());
  put<std::uint64_t>(buf, fnv1a64(buf));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write bundle: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open bundle: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string buf = ss.str();
  if (buf.size() < 18 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw std::runtime_error("bundle: bad magic");
  std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  if (fnv1a64(std::string_view(buf.data(), body)) != stored)
    throw std::runtime_error("bundle: checksum mismatch");

  std::size_t pos = 4;
  auto version = take<std::uint8_t>(buf, pos);
  if (version != kBundleVersion)
    throw std::runtime_error("bundle: unsupported version " + std::to_string(version));
  auto mode_byte = take<std::uint8_t>(buf, pos);

  auto n_sections = take<std::uint32_t>(buf, pos);
  std::string model_bytes, forest_doc, meta;
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    auto name_len = take<std::uint32_t>(buf, pos);
    if (pos + name_len > body) throw std::runtime_error("bundle: truncated file");
    std::string name = buf.substr(pos, name_len);
    pos += name_len;
    auto size = take<std::uint64_t>(buf, pos);
    if (pos + size > body) throw std::runtime_error("bundle: truncated section " + name);
    std::string bytes = buf.substr(pos, size);
    pos += size;
    if (name == "embeddings")
      model_bytes = std::move(bytes);
    else if (name == "forest")
      forest_doc = std::move(bytes);
    else if (name == "metadata")
      meta = std::move(bytes);
    // schema section is informational; the model checkpoint carries it too
  }
  if (pos != body) throw std::runtime_error("bundle: trailing bytes");

  ModelBundle bundle;
  bundle.mode = mode_byte ? BundleMode::kThreeStep : BundleMode::kTwoStep;
  {
    std::istringstream ms(model_bytes);
    bundle.model = from_checkpoint(read_checkpoint(ms));
  }
  if (bundle.mode == BundleMode::kThreeStep) {
    bundle.fuzzy = import_fuzzy_forest(forest_doc);
    bundle.forest = harden(*bundle.fuzzy);
  } else {
    bundle.forest = import_forest(forest_doc);
  }
  std::istringstream meta_in(meta);
  std::string key;
  while (meta_in >> key) {
    if (key == "created")
      meta_in >> bundle.created;
    else if (key == "config_digest") {
      std::string hex;
      meta_in >> hex;
      bundle.config_digest = std::stoull(hex, nullptr, 16);
    } else {
      std::string rest;
      std::getline(meta_in, rest);
    }
  }
  bundle.validate();
  return bundle;
}

double relative_log_loss(double gamma_candidate, double gamma_baseline) {
  if (!(gamma_baseline > 0.0))
    throw std::invalid_argument("relative_log_loss: baseline must be positive");
  return gamma_candidate / gamma_baseline * 100.0;
}

}  // namespace ef
