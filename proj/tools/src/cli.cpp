/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include "efcli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ef/dataset.hpp"
#include "ef/featurize.hpp"
#include "ef/fuzzy.hpp"
#include "ef/gbdt.hpp"
#include "ef/hash.hpp"
#include "ef/linalg.hpp"
#include "ef/nn.hpp"
#include "ef/serve.hpp"
#include "ef/stacked.hpp"
#include "ef/synthetic.hpp"

namespace fs = std::filesystem;

namespace ef::cli {
namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string digest_hex(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string file_digest(const std::string& path) { return digest_hex(read_file(path)); }

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Flat sectioned config file: `section.key value` per line, `#` comments.
/// CLI flags override config values, which override built-in defaults.
class Settings {
 public:
  void load(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      std::istringstream ls(line);
      std::string key, value;
      if (!(ls >> key)) continue;
      if (!(ls >> value))
        throw std::invalid_argument("config " + path + " line " +
                                    std::to_string(line_no) + ": missing value");
      kv_[key] = value;
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::istringstream ss(it->second);
    T out;
    if (!(ss >> out))
      throw std::invalid_argument("config value for " + key + " is malformed");
    return out;
  }

 private:
  std::map<std::string, std::string> kv_;
};

/// Options shared by every subcommand.
struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";
  bool deterministic = false;
  Settings settings;

  fs::path out(const std::string& name) const { return fs::path(out_dir) / name; }
};

/// Run manifest: effective configuration plus input/output digests,
/// sufficient to reproduce the run bit-identically. Deterministic runs
/// carry no timestamp so reruns are byte-identical.
class Manifest {
 public:
  Manifest(const Globals& g, const std::string& command) : deterministic_(g.deterministic) {
    ss_ << "manifest 1\n";
    ss_ << "command " << command << "\n";
    ss_ << "deterministic " << (g.deterministic ? "true" : "false") << "\n";
    ss_ << "seed " << g.seed << "\n";
  }
  void option(const std::string& key, const std::string& value) {
    ss_ << "option " << key << " " << value << "\n";
  }
  void option(const std::string& key, double value) { option(key, fmt17(value)); }
  void option(const std::string& key, int value) { option(key, std::to_string(value)); }
  void input(const std::string& name, const std::string& path) {
    ss_ << "input " << name << " " << path << " " << file_digest(path) << "\n";
  }
  void output(const std::string& name, const std::string& path) {
    ss_ << "output " << name << " " << path << " " << file_digest(path) << "\n";
  }
  void write(const fs::path& path) {
    if (!deterministic_) ss_ << "created " << utc_now() << "\n";
    write_file(path.string(), ss_.str());
  }

 private:
  bool deterministic_;
  std::ostringstream ss_;
};

Dataset load_data(const std::string& schema_path, const std::string& data_path) {
  return load_dataset(schema_path, data_path);
}

// ---------------------------------------------------------------------------
// Model-source plumbing shared by predict / eval / bench.
// ---------------------------------------------------------------------------

struct ModelSource {
  std::string bundle_path;
  std::string model_path;
  std::string forest_path;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--bundle", bundle_path, "serving bundle file");
    cmd->add_option("--model", model_path, "embedding checkpoint file");
    cmd->add_option("--forest", forest_path, "forest document file");
  }

  void validate() const {
    if (!bundle_path.empty() && (!model_path.empty() || !forest_path.empty()))
      throw std::invalid_argument("pass either --bundle or --model/--forest, not both");
    if (bundle_path.empty() && (model_path.empty() || forest_path.empty()))
      throw std::invalid_argument("pass --bundle or both --model and --forest");
  }

  ModelBundle load(std::string* digest, Manifest* manifest) const {
    validate();
    if (!bundle_path.empty()) {
      if (digest) *digest = file_digest(bundle_path);
      if (manifest) manifest->input("bundle", bundle_path);
      return load_bundle(bundle_path);
    }
    if (digest) *digest = digest_hex(file_digest(model_path) + file_digest(forest_path));
    if (manifest) {
      manifest->input("model", model_path);
      manifest->input("forest", forest_path);
    }
    ModelBundle bundle;
    bundle.model = load_model(model_path);
    bundle.forest = import_forest(read_file(forest_path));
    bundle.mode = BundleMode::kTwoStep;
    return bundle;
  }
};

double dataset_log_loss(const Predictor& pred, const Dataset& ds) {
  if (ds.samples.empty()) throw std::invalid_argument("eval: empty dataset");
  double acc = 0.0;
  for (const auto& s : ds.samples) {
    double p = std::clamp(pred.predict(s), kProbEps, 1.0 - kProbEps);
    acc += log_loss(p, s.label);
  }
  return acc / static_cast<double>(ds.samples.size());
}

struct EvalReport {
  std::size_t samples = 0;
  double loss = 0.0;
  std::string data_digest;
  std::string model_digest;
  std::optional<double> relative;
  std::optional<double> baseline_loss;

  std::string serialize() const {
    std::ostringstream ss;
    ss << "eval 1\n";
    ss << "samples " << samples << "\n";
    ss << "log_loss " << fmt17(loss) << "\n";
    ss << "data_digest " << data_digest << "\n";
    ss << "model_digest " << model_digest << "\n";
    if (relative) {
      ss << "baseline_log_loss " << fmt17(*baseline_loss) << "\n";
      ss << "relative_log_loss " << fmt17(*relative) << "\n";
    }
    return ss.str();
  }

  static EvalReport parse(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string header;
    std::getline(in, header);
    if (header != "eval 1")
      throw std::invalid_argument("eval report " + origin + ": bad header");
    EvalReport r;
    std::string key;
    while (in >> key) {
      if (key == "samples")
        in >> r.samples;
      else if (key == "log_loss")
        in >> r.loss;
      else if (key == "data_digest")
        in >> r.data_digest;
      else if (key == "model_digest")
        in >> r.model_digest;
      else if (key == "baseline_log_loss") {
        double v;
        in >> v;
        r.baseline_loss = v;
      } else if (key == "relative_log_loss") {
        double v;
        in >> v;
        r.relative = v;
      } else {
        throw std::invalid_argument("eval report " + origin + ": unknown field " + key);
      }
      if (!in)
        throw std::invalid_argument("eval report " + origin + ": malformed value for " +
                                    key);
    }
    if (r.data_digest.empty() || r.model_digest.empty())
      throw std::invalid_argument("eval report " + origin + ": missing digests");
    return r;
  }
};

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

int cmd_featurize(const Globals& g, const std::string& input, int dim,
                  const std::string& group) {
  if (dim < 1) throw std::invalid_argument("featurize: --dim must be >= 1");
  std::istringstream in(read_file(input));

  FeatureSchema schema;
  schema.groups.push_back({group, GroupKind::kSparse, dim, true});

  Dataset ds;
  ds.schema = schema;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::invalid_argument("featurize input line " + std::to_string(line_no) +
                                  ": expected <label><TAB><text>");
    std::string label = line.substr(0, tab);
    if (label != "0" && label != "1")
      throw std::invalid_argument("featurize input line " + std::to_string(line_no) +
                                  ": label must be 0 or 1");
    Sample s;
    s.label = label == "1" ? 1 : 0;
    s.fields.emplace_back(triletter_featurize(line.substr(tab + 1), dim));
    ds.samples.push_back(std::move(s));
  }

  auto schema_path = g.out("featurized.schema");
  auto data_path = g.out("featurized.samples");
  write_file(schema_path.string(), schema.serialize());
  {
    std::ofstream out(data_path);
    write_samples(out, ds);
  }

  Manifest m(g, "featurize");
  m.option("dim", dim);
  m.option("group", group);
  m.input("text", input);
  m.output("schema", schema_path.string());
  m.output("samples", data_path.string());
  m.write(g.out("featurize.manifest"));
  std::cout << "featurized " << ds.size() << " lines into dim " << dim << "\n";
  return 0;
}

int cmd_gen_synth(const Globals& g, const SyntheticConfig& cfg) {
  auto ds = gen_synthetic(cfg);
  auto schema_path = g.out("synth.schema");
  auto data_path = g.out("synth.samples");
  write_file(schema_path.string(), ds.schema.serialize());
  {
    std::ofstream out(data_path);
    write_samples(out, ds);
  }
  Manifest m(g, "gen-synth");
  m.option("n_samples", cfg.n_samples);
  m.option("sparse_dims", cfg.n_sparse_dims);
  m.option("dense_dims", cfg.n_dense_dims);
  m.option("interaction_depth", cfg.interaction_depth);
  m.option("noise", cfg.noise);
  m.output("schema", schema_path.string());
  m.output("samples", data_path.string());
  m.write(g.out("gen-synth.manifest"));
  std::cout << "generated " << ds.size() << " samples\n";
  return 0;
}

int cmd_train_embed(const Globals& g, const std::string& schema_path,
                    const std::string& data_path, const NetConfig& net,
                    const TrainConfig& cfg) {
  auto ds = load_data(schema_path, data_path);
  std::vector<double> losses;
  auto model = train_deep_crossing(ds, net, cfg, &losses);
  auto model_path = g.out("model.ck");
  save_model(model, model_path.string());

  Manifest m(g, "train-embed");
  m.option("epochs", cfg.epochs);
  m.option("batch_size", cfg.batch_size);
  m.option("learning_rate", cfg.learning_rate);
  m.option("l2", cfg.l2);
  m.option("embed_dim", net.embed_dim);
  {
    std::ostringstream inner;
    for (std::size_t i = 0; i < net.residual_inner.size(); ++i)
      inner << (i ? "," : "") << net.residual_inner[i];
    m.option("residual_inner", inner.str());
  }
  m.input("schema", schema_path);
  m.input("data", data_path);
  m.output("model", model_path.string());
  m.write(g.out("train-embed.manifest"));
  std::cout << "trained " << cfg.epochs << " epochs; loss " << fmt17(losses.front())
            << " -> " << fmt17(losses.back()) << "\n";
  return 0;
}

int cmd_extract_stack(const Globals& g, const std::string& schema_path,
                      const std::string& data_path, const std::string& model_path) {
  auto ds = load_data(schema_path, data_path);
  auto model = load_model(model_path);
  auto stacked = extract_stacking(ds, model);
  auto out_path = g.out("stacked.tsv");
  save_stacked(stacked, out_path.string());

  Manifest m(g, "extract-stack");
  m.input("schema", schema_path);
  m.input("data", data_path);
  m.input("model", model_path);
  m.output("stacked", out_path.string());
  m.write(g.out("extract-stack.manifest"));
  std::cout << "extracted " << stacked.size() << " stacking vectors of dim "
            << stacked.dim << "\n";
  return 0;
}

int cmd_train_forest(const Globals& g, const std::string& stacked_path,
                     const GbdtConfig& cfg) {
  auto stacked = load_stacked(stacked_path);
  std::vector<double> losses;
  auto forest = train_gbdt(stacked, cfg, &losses);
  auto out_path = g.out("forest.txt");
  write_file(out_path.string(), export_forest(forest));

  Manifest m(g, "train-forest");
  m.option("n_trees", cfg.n_trees);
  m.option("max_leaves", cfg.max_leaves);
  m.option("max_depth", cfg.max_depth);
  m.option("min_samples_leaf", cfg.min_samples_leaf);
  m.option("lambda", cfg.lambda);
  m.option("learning_rate", cfg.learning_rate);
  m.input("stacked", stacked_path);
  m.output("forest", out_path.string());
  m.write(g.out("train-forest.manifest"));
  std::cout << "trained " << cfg.n_trees << " trees; loss " << fmt17(losses.front())
            << " -> " << fmt17(losses.back()) << "\n";
  return 0;
}

int cmd_fuzz_tune(const Globals& g, const std::string& schema_path,
                  const std::string& data_path, const std::string& model_path,
                  const std::string& forest_path, const FuzzyTrainConfig& cfg) {
  // Stage-order check: step 3 needs the step-2 forest and step-1 model.
  for (const auto& [stage, path] :
       {std::pair<const char*, const std::string&>{"train-embed", model_path},
        {"train-forest", forest_path}}) {
    if (!fs::exists(path))
      throw std::invalid_argument(std::string("dependency error: '") + path +
                                  "' not found; run " + stage + " first");
  }
  auto ds = load_data(schema_path, data_path);
  auto model = load_model(model_path);
  auto forest = import_forest(read_file(forest_path));
  auto stacked = extract_stacking(ds, model);
  auto fuzzy = init_fuzzy(forest, stacked, cfg.kappa);
  std::vector<double> losses;
  auto result = joint_train(ds, model, fuzzy, cfg, &losses);

  auto fuzzy_path = g.out("fuzzy.txt");
  auto refined_path = g.out("model_refined.ck");
  auto bundle_path = g.out("bundle.bin");
  write_file(fuzzy_path.string(), export_fuzzy_forest(fuzzy));
  save_model(model, refined_path.string());

  ModelBundle bundle;
  bundle.model = std::move(model);
  bundle.forest = harden(fuzzy);
  bundle.fuzzy = std::move(fuzzy);
  bundle.mode = BundleMode::kThreeStep;
  bundle.created = g.deterministic ? "" : utc_now();
  {
    std::ostringstream cfg_echo;
    cfg_echo << cfg.epochs << " " << cfg.batch_size << " " << fmt17(cfg.learning_rate)
             << " " << fmt17(cfg.kappa) << " " << g.seed;
    bundle.config_digest = fnv1a64(cfg_echo.str());
  }
  save_bundle(bundle, bundle_path.string());

  Manifest m(g, "fuzz-tune");
  m.option("epochs", cfg.epochs);
  m.option("batch_size", cfg.batch_size);
  m.option("learning_rate", cfg.learning_rate);
  m.option("kappa", cfg.kappa);
  m.input("schema", schema_path);
  m.input("data", data_path);
  m.input("model", model_path);
  m.input("forest", forest_path);
  m.output("fuzzy", fuzzy_path.string());
  m.output("model_refined", refined_path.string());
  m.output("bundle", bundle_path.string());
  m.write(g.out("fuzz-tune.manifest"));
  std::cout << "joint refinement: loss " << fmt17(result.initial_loss) << " -> "
            << fmt17(result.final_loss) << "\n";
  return 0;
}

int cmd_predict(const Globals& g, const ModelSource& src, const std::string& schema_path,
                const std::string& data_path, const std::string& out_name) {
  Manifest m(g, "predict");
  std::string model_digest;
  auto bundle = src.load(&model_digest, &m);
  auto ds = load_data(schema_path, data_path);
  auto pred = compile(bundle);
  std::ostringstream out;
  for (const auto& s : ds.samples) out << fmt17(pred.predict(s)) << "\n";
  auto out_path = g.out(out_name);
  write_file(out_path.string(), out.str());
  m.input("schema", schema_path);
  m.input("data", data_path);
  m.output("predictions", out_path.string());
  m.write(g.out("predict.manifest"));
  std::cout << "wrote " << ds.size() << " predictions\n";
  return 0;
}

int cmd_eval(const Globals& g, const ModelSource& src, const std::string& schema_path,
             const std::string& data_path, const std::string& baseline_path,
             const std::string& out_name) {
  Manifest m(g, "eval");
  EvalReport report;
  auto bundle = src.load(&report.model_digest, &m);
  auto ds = load_data(schema_path, data_path);
  auto pred = compile(bundle);
  report.samples = ds.size();
  report.loss = dataset_log_loss(pred, ds);
  report.data_digest = file_digest(data_path);

  if (!baseline_path.empty()) {
    auto baseline = EvalReport::parse(read_file(baseline_path), baseline_path);
    if (baseline.data_digest != report.data_digest)
      throw std::invalid_argument(
          "eval: baseline was computed on a different test set (data digest " +
          baseline.data_digest + " vs " + report.data_digest + ")");
    report.baseline_loss = baseline.loss;
    report.relative = relative_log_loss(report.loss, baseline.loss);
    m.input("baseline", baseline_path);
  }

  auto out_path = g.out(out_name);
  write_file(out_path.string(), report.serialize());
  m.input("schema", schema_path);
  m.input("data", data_path);
  m.output("report", out_path.string());
  m.write(g.out("eval.manifest"));
  std::cout << report.serialize();
  return 0;
}

int cmd_compare(const Globals& g, const std::string& baseline_path,
                const std::string& candidate_path) {
  auto baseline = EvalReport::parse(read_file(baseline_path), baseline_path);
  auto candidate = EvalReport::parse(read_file(candidate_path), candidate_path);
  if (baseline.data_digest != candidate.data_digest)
    throw std::invalid_argument("compare: reports use different test sets (data digest " +
                                baseline.data_digest + " vs " + candidate.data_digest +
                                ")");
  double relative = relative_log_loss(candidate.loss, baseline.loss);
  double ratio = candidate.loss / baseline.loss;

  std::ostringstream csv;
  csv << "baseline_log_loss,candidate_log_loss,relative_log_loss,loss_ratio\n";
  csv << fmt17(baseline.loss) << "," << fmt17(candidate.loss) << "," << fmt17(relative)
      << "," << fmt17(ratio) << "\n";
  auto csv_path = g.out("compare.csv");
  write_file(csv_path.string(), csv.str());

  std::cout << "model            log_loss              relative\n";
  std::cout << "baseline         " << fmt17(baseline.loss) << "  100\n";
  std::cout << "candidate        " << fmt17(candidate.loss) << "  " << fmt17(relative)
            << "\n";
  std::cout << "loss ratio " << fmt17(ratio) << "\n";

  Manifest m(g, "compare");
  m.input("baseline", baseline_path);
  m.input("candidate", candidate_path);
  m.output("csv", csv_path.string());
  m.write(g.out("compare.manifest"));
  return 0;
}

int cmd_bench(const Globals& g, const ModelSource& src, const std::string& schema_path,
              const std::string& data_path, const BenchConfig& cfg,
              const std::string& config_name) {
  Manifest m(g, "bench");
  std::string model_digest;
  auto bundle = src.load(&model_digest, &m);
  auto ds = load_data(schema_path, data_path);
  auto pred = compile(bundle);
  auto report = bench(pred, ds, cfg);

  auto csv = bench_csv(report, config_name);
  auto csv_path = g.out("bench.csv");
  write_file(csv_path.string(), csv);

  std::cout << "benchmark over " << ds.size() << " samples, " << report.reps
            << " reps (n_t=" << report.n_t << ", d_t=" << fmt17(report.d_t)
            << ", D=" << report.stacking_dim << ")\n";
  std::cout << "  T1 embedding  " << fmt17(report.t1_ns) << " ns/sample\n";
  std::cout << "  T2 forest     " << fmt17(report.t2_ns) << " ns/sample\n";
  std::cout << "  total         " << fmt17(report.total_ns) << " ns/sample (p50 "
            << fmt17(report.p50_ns) << ", p99 " << fmt17(report.p99_ns) << ")\n";

  m.option("warmup", cfg.warmup);
  m.option("reps", cfg.reps);
  m.input("schema", schema_path);
  m.input("data", data_path);
  m.output("csv", csv_path.string());
  m.write(g.out("bench.manifest"));
  return 0;
}

int dispatch(const std::vector<std::string>& args) {
  Globals g;
  // The config file seeds subcommand defaults, so it must be read before
  // option registration; flags given on the command line still win.
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") g.settings.load(args[i + 1]);
  const Settings& s = g.settings;

  CLI::App app{"Deep Embedding Forest trainer and server"};
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "global random seed");
  app.add_option("--config", g.config_path, "flat sectioned config file");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--deterministic", g.deterministic,
               "suppress timestamps for byte-identical reruns");
  app.fallthrough();

  g.seed = s.get<std::uint64_t>("seed", g.seed);
  g.out_dir = s.get<std::string>("out", g.out_dir);

  int rc = 0;

  // featurize ---------------------------------------------------------------
  auto* featurize = app.add_subcommand("featurize", "hash labeled text into samples");
  auto fz_input = std::make_shared<std::string>();
  auto fz_dim = std::make_shared<int>(s.get<int>("featurize.dim", 16384));
  auto fz_group = std::make_shared<std::string>(
      s.get<std::string>("featurize.group", "text"));
  featurize->add_option("--input", *fz_input, "labeled text file")->required();
  featurize->add_option("--dim", *fz_dim, "hash dimension");
  featurize->add_option("--group", *fz_group, "schema group name");
  featurize->callback([&, fz_input, fz_dim, fz_group] {
    rc = cmd_featurize(g, *fz_input, *fz_dim, *fz_group);
  });

  // gen-synth ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-synth", "generate a planted-rule dataset");
  auto scfg = std::make_shared<SyntheticConfig>();
  scfg->n_samples = s.get<int>("synth.n_samples", 1000);
  scfg->n_sparse_dims = s.get<int>("synth.sparse_dims", 1000);
  scfg->n_dense_dims = s.get<int>("synth.dense_dims", 5);
  scfg->interaction_depth = s.get<int>("synth.interaction_depth", 3);
  scfg->noise = s.get<double>("synth.noise", 0.05);
  gen->add_option("--n-samples", scfg->n_samples, "sample count");
  gen->add_option("--sparse-dims", scfg->n_sparse_dims, "sparse vocabulary size");
  gen->add_option("--dense-dims", scfg->n_dense_dims, "dense feature count");
  gen->add_option("--depth", scfg->interaction_depth, "planted-rule literal count");
  gen->add_option("--noise", scfg->noise, "label flip probability");
  gen->callback([&, scfg] {
    scfg->seed = g.seed;
    rc = cmd_gen_synth(g, *scfg);
  });

  // train-embed -------------------------------------------------------------
  auto* te = app.add_subcommand("train-embed", "step 1: train embeddings");
  auto te_schema = std::make_shared<std::string>();
  auto te_data = std::make_shared<std::string>();
  auto net = std::make_shared<NetConfig>();
  auto tcfg = std::make_shared<TrainConfig>();
  net->embed_dim = s.get<int>("nn.embed_dim", 128);
  tcfg->epochs = s.get<int>("nn.epochs", 5);
  tcfg->batch_size = s.get<int>("nn.batch_size", 64);
  tcfg->learning_rate = s.get<double>("nn.learning_rate", 1e-3);
  tcfg->l2 = s.get<double>("nn.l2", 0.0);
  te->add_option("--schema", *te_schema, "schema file")->required();
  te->add_option("--data", *te_data, "sample file")->required();
  te->add_option("--epochs", tcfg->epochs, "epochs");
  te->add_option("--batch-size", tcfg->batch_size, "mini-batch size");
  te->add_option("--lr", tcfg->learning_rate, "Adam learning rate");
  te->add_option("--l2", tcfg->l2, "L2 weight penalty");
  te->add_option("--embed-dim", net->embed_dim, "embedding width per group");
  te->add_option("--residual-inner", net->residual_inner,
                 "inner widths, one per residual unit");
  te->callback([&, te_schema, te_data, net, tcfg] {
    tcfg->seed = g.seed;
    rc = cmd_train_embed(g, *te_schema, *te_data, *net, *tcfg);
  });

  // extract-stack -----------------------------------------------------------
  auto* ex = app.add_subcommand("extract-stack", "step 2a: extract stacking vectors");
  auto ex_schema = std::make_shared<std::string>();
  auto ex_data = std::make_shared<std::string>();
  auto ex_model = std::make_shared<std::string>();
  ex->add_option("--schema", *ex_schema, "schema file")->required();
  ex->add_option("--data", *ex_data, "sample file")->required();
  ex->add_option("--model", *ex_model, "embedding checkpoint")->required();
  ex->callback([&, ex_schema, ex_data, ex_model] {
    rc = cmd_extract_stack(g, *ex_schema, *ex_data, *ex_model);
  });

  // train-forest ------------------------------------------------------------
  auto* tf = app.add_subcommand("train-forest", "step 2b: boost over stacking vectors");
  auto tf_stacked = std::make_shared<std::string>();
  auto gcfg = std::make_shared<GbdtConfig>();
  gcfg->n_trees = s.get<int>("gbdt.n_trees", 100);
  gcfg->max_leaves = s.get<int>("gbdt.max_leaves", 31);
  gcfg->max_depth = s.get<int>("gbdt.max_depth", 7);
  gcfg->min_samples_leaf = s.get<int>("gbdt.min_samples_leaf", 20);
  gcfg->lambda = s.get<double>("gbdt.lambda", 1.0);
  gcfg->learning_rate = s.get<double>("gbdt.learning_rate", 0.1);
  tf->add_option("--stacked", *tf_stacked, "stacked dataset file")->required();
  tf->add_option("--n-trees", gcfg->n_trees, "boosting rounds");
  tf->add_option("--max-leaves", gcfg->max_leaves, "leaf cap per tree");
  tf->add_option("--max-depth", gcfg->max_depth, "depth cap per tree");
  tf->add_option("--min-samples-leaf", gcfg->min_samples_leaf, "leaf sample floor");
  tf->add_option("--lambda", gcfg->lambda, "L2 on leaf values");
  tf->add_option("--forest-lr", gcfg->learning_rate, "shrinkage");
  tf->callback([&, tf_stacked, gcfg] {
    gcfg->seed = g.seed;
    rc = cmd_train_forest(g, *tf_stacked, *gcfg);
  });

  // fuzz-tune ---------------------------------------------------------------
  auto* ft = app.add_subcommand("fuzz-tune", "step 3: joint refinement");
  auto ft_schema = std::make_shared<std::string>();
  auto ft_data = std::make_shared<std::string>();
  auto ft_model = std::make_shared<std::string>();
  auto ft_forest = std::make_shared<std::string>();
  auto fcfg = std::make_shared<FuzzyTrainConfig>();
  fcfg->epochs = s.get<int>("fuzzy.epochs", 3);
  fcfg->batch_size = s.get<int>("fuzzy.batch_size", 64);
  fcfg->learning_rate = s.get<double>("fuzzy.learning_rate", 1e-3);
  fcfg->kappa = s.get<double>("fuzzy.kappa", 4.0);
  ft->add_option("--schema", *ft_schema, "schema file")->required();
  ft->add_option("--data", *ft_data, "sample file")->required();
  ft->add_option("--model", *ft_model, "embedding checkpoint")->required();
  ft->add_option("--forest", *ft_forest, "forest document")->required();
  ft->add_option("--epochs", fcfg->epochs, "epochs");
  ft->add_option("--batch-size", fcfg->batch_size, "mini-batch size");
  ft->add_option("--lr", fcfg->learning_rate, "Adam learning rate");
  ft->add_option("--kappa", fcfg->kappa, "inverse-width scale at init");
  ft->callback([&, ft_schema, ft_data, ft_model, ft_forest, fcfg] {
    fcfg->seed = g.seed;
    rc = cmd_fuzz_tune(g, *ft_schema, *ft_data, *ft_model, *ft_forest, *fcfg);
  });

  // predict -----------------------------------------------------------------
  auto* pr = app.add_subcommand("predict", "score raw samples");
  auto pr_src = std::make_shared<ModelSource>();
  auto pr_schema = std::make_shared<std::string>();
  auto pr_data = std::make_shared<std::string>();
  auto pr_out = std::make_shared<std::string>("predictions.txt");
  pr_src->add_options(pr);
  pr->add_option("--schema", *pr_schema, "schema file")->required();
  pr->add_option("--data", *pr_data, "sample file")->required();
  pr->add_option("--out-file", *pr_out, "predictions file name");
  pr->callback([&, pr_src, pr_schema, pr_data, pr_out] {
    rc = cmd_predict(g, *pr_src, *pr_schema, *pr_data, *pr_out);
  });

  // eval --------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "log loss report, optionally vs a baseline");
  auto ev_src = std::make_shared<ModelSource>();
  auto ev_schema = std::make_shared<std::string>();
  auto ev_data = std::make_shared<std::string>();
  auto ev_baseline = std::make_shared<std::string>();
  auto ev_out = std::make_shared<std::string>("eval.txt");
  ev_src->add_options(ev);
  ev->add_option("--schema", *ev_schema, "schema file")->required();
  ev->add_option("--data", *ev_data, "sample file")->required();
  ev->add_option("--baseline", *ev_baseline, "baseline eval report");
  ev->add_option("--out-file", *ev_out, "report file name");
  ev->callback([&, ev_src, ev_schema, ev_data, ev_baseline, ev_out] {
    rc = cmd_eval(g, *ev_src, *ev_schema, *ev_data, *ev_baseline, *ev_out);
  });

  // compare -----------------------------------------------------------------
  auto* cp = app.add_subcommand("compare", "two eval reports side by side");
  auto cp_baseline = std::make_shared<std::string>();
  auto cp_candidate = std::make_shared<std::string>();
  cp->add_option("--baseline", *cp_baseline, "baseline eval report")->required();
  cp->add_option("--candidate", *cp_candidate, "candidate eval report")->required();
  cp->callback([&, cp_baseline, cp_candidate] {
    rc = cmd_compare(g, *cp_baseline, *cp_candidate);
  });

  // bench -------------------------------------------------------------------
  auto* bn = app.add_subcommand("bench", "per-sample latency benchmark");
  auto bn_src = std::make_shared<ModelSource>();
  auto bn_schema = std::make_shared<std::string>();
  auto bn_data = std::make_shared<std::string>();
  auto bn_name = std::make_shared<std::string>("default");
  auto bcfg = std::make_shared<BenchConfig>();
  bcfg->warmup = s.get<int>("bench.warmup", 3);
  bcfg->reps = s.get<int>("bench.reps", 30);
  bn_src->add_options(bn);
  bn->add_option("--schema", *bn_schema, "schema file")->required();
  bn->add_option("--data", *bn_data, "sample file")->required();
  bn->add_option("--warmup", bcfg->warmup, "warmup passes");
  bn->add_option("--reps", bcfg->reps, "timed passes");
  bn->add_option("--name", *bn_name, "config label echoed into the CSV");
  bn->callback([&, bn_src, bn_schema, bn_data, bn_name, bcfg] {
    bcfg->shuffle_seed = g.seed;
    rc = cmd_bench(g, *bn_src, *bn_schema, *bn_data, *bcfg, *bn_name);
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // CLI11 prints help or the error itself; collapse its exit codes to the
    // documented 0 (help) / 2 (bad usage).
    return app.exit(e) == 0 ? 0 : 2;
  }
  return rc;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ef::cli
