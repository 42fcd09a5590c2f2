/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ef/hash.hpp"
#include "efcli/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ef_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_quiet(std::vector<std::string> args) {
  std::ostringstream captured_out, captured_err;
  auto* old_out = std::cout.rdbuf(captured_out.rdbuf());
  auto* old_err = std::cerr.rdbuf(captured_err.rdbuf());
  int rc = ef::cli::run(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return rc;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

/// Runs the deterministic three-step pipeline into `dir`.
void run_pipeline(const TempDir& dir) {
  auto out = dir.path.string();
  REQUIRE(run_quiet({"gen-synth", "--n-samples", "300", "--sparse-dims", "60",
                     "--dense-dims", "3", "--depth", "2", "--noise", "0.05", "--seed",
                     "7", "--deterministic", "--out", out}) == 0);
  REQUIRE(run_quiet({"train-embed", "--schema", dir.file("synth.schema"), "--data",
                     dir.file("synth.samples"), "--epochs", "2", "--batch-size", "64",
                     "--embed-dim", "6", "--residual-inner", "6", "--seed", "7",
                     "--deterministic", "--out", out}) == 0);
  REQUIRE(run_quiet({"extract-stack", "--schema", dir.file("synth.schema"), "--data",
                     dir.file("synth.samples"), "--model", dir.file("model.ck"),
                     "--deterministic", "--out", out}) == 0);
  REQUIRE(run_quiet({"train-forest", "--stacked", dir.file("stacked.tsv"), "--n-trees",
                     "8", "--max-leaves", "8", "--min-samples-leaf", "10", "--seed", "7",
                     "--deterministic", "--out", out}) == 0);
  REQUIRE(run_quiet({"fuzz-tune", "--schema", dir.file("synth.schema"), "--data",
                     dir.file("synth.samples"), "--model", dir.file("model.ck"),
                     "--forest", dir.file("forest.txt"), "--epochs", "1", "--seed", "7",
                     "--deterministic", "--out", out}) == 0);
}

}  // namespace

TEST_CASE("cli: full pipeline produces all artifacts and reruns identically") {
  TempDir a("pipeline_a"), b("pipeline_b");
  run_pipeline(a);
  for (const char* name : {"synth.schema", "synth.samples", "model.ck", "stacked.tsv",
                           "forest.txt", "fuzzy.txt", "model_refined.ck", "bundle.bin",
                           "gen-synth.manifest", "train-embed.manifest",
                           "extract-stack.manifest", "train-forest.manifest",
                           "fuzz-tune.manifest"})
    CHECK(fs::exists(a.path / name));

  run_pipeline(b);
  for (const char* name : {"synth.samples", "model.ck", "stacked.tsv", "forest.txt",
                           "fuzzy.txt", "bundle.bin"})
    CHECK(ef::fnv1a64(slurp(a.file(name))) == ef::fnv1a64(slurp(b.file(name))));
}

TEST_CASE("cli: eval against itself reports relative log loss 100") {
  TempDir dir("eval_self");
  run_pipeline(dir);
  auto out = dir.path.string();
  REQUIRE(run_quiet({"eval", "--model", dir.file("model.ck"), "--forest",
                     dir.file("forest.txt"), "--schema", dir.file("synth.schema"),
                     "--data", dir.file("synth.samples"), "--deterministic", "--out",
                     out, "--out-file", "base.eval"}) == 0);
  REQUIRE(run_quiet({"eval", "--model", dir.file("model.ck"), "--forest",
                     dir.file("forest.txt"), "--schema", dir.file("synth.schema"),
                     "--data", dir.file("synth.samples"), "--baseline",
                     dir.file("base.eval"), "--deterministic", "--out", out,
                     "--out-file", "self.eval"}) == 0);
  auto report = slurp(dir.file("self.eval"));
  CHECK(report.find("relative_log_loss 100\n") != std::string::npos);
}

TEST_CASE("cli: compare of identical reports gives relative 100, ratio 1") {
  TempDir dir("compare_id");
  run_pipeline(dir);
  auto out = dir.path.string();
  REQUIRE(run_quiet({"eval", "--model", dir.file("model.ck"), "--forest",
                     dir.file("forest.txt"), "--schema", dir.file("synth.schema"),
                     "--data", dir.file("synth.samples"), "--deterministic", "--out",
                     out, "--out-file", "a.eval"}) == 0);
  fs::copy_file(dir.file("a.eval"), dir.file("b.eval"));
  REQUIRE(run_quiet({"compare", "--baseline", dir.file("a.eval"), "--candidate",
                     dir.file("b.eval"), "--deterministic", "--out", out}) == 0);
  auto csv = slurp(dir.file("compare.csv"));
  CHECK(csv.find("baseline_log_loss,candidate_log_loss,relative_log_loss,loss_ratio") !=
        std::string::npos);
  CHECK(csv.find(",100,1\n") != std::string::npos);
}

TEST_CASE("cli: compare refuses mismatched test-set digests") {
  TempDir dir("compare_mismatch");
  write(dir.file("a.eval"),
        "eval 1\nsamples 5\nlog_loss 0.4\ndata_digest aaaa\nmodel_digest bbbb\n");
  write(dir.file("b.eval"),
        "eval 1\nsamples 5\nlog_loss 0.39\ndata_digest cccc\nmodel_digest dddd\n");
  CHECK(run_quiet({"compare", "--baseline", dir.file("a.eval"), "--candidate",
                   dir.file("b.eval"), "--out", dir.path.string()}) == 2);
}

TEST_CASE("cli: fuzz-tune before train-forest is a dependency error") {
  TempDir dir("dep_order");
  auto out = dir.path.string();
  REQUIRE(run_quiet({"gen-synth", "--n-samples", "50", "--sparse-dims", "30", "--seed",
                     "1", "--out", out, "--deterministic"}) == 0);
  REQUIRE(run_quiet({"train-embed", "--schema", dir.file("synth.schema"), "--data",
                     dir.file("synth.samples"), "--epochs", "1", "--embed-dim", "4",
                     "--residual-inner", "4", "--out", out, "--deterministic"}) == 0);
  CHECK(run_quiet({"fuzz-tune", "--schema", dir.file("synth.schema"), "--data",
                   dir.file("synth.samples"), "--model", dir.file("model.ck"),
                   "--forest", dir.file("forest.txt"), "--out", out}) == 2);
}

TEST_CASE("cli: validation failures exit 2, runtime failures exit 1") {
  TempDir dir("exit_codes");
  auto out = dir.path.string();
  CHECK(run_quiet({"no-such-command"}) == 2);
  CHECK(run_quiet({"gen-synth", "--n-samples", "-5", "--out", out}) == 2);
  CHECK(run_quiet({"train-forest", "--stacked", dir.file("missing.tsv"), "--out",
                   out}) == 2);

  // A structurally valid call that fails mid-flight (corrupt bundle payload).
  run_pipeline(dir);
  auto bytes = slurp(dir.file("bundle.bin"));
  bytes[bytes.size() / 2] ^= 0x01;
  write(dir.file("bundle.bin"), bytes);
  CHECK(run_quiet({"eval", "--bundle", dir.file("bundle.bin"), "--schema",
                   dir.file("synth.schema"), "--data", dir.file("synth.samples"),
                   "--out", out}) == 1);
}

TEST_CASE("cli: predict writes one probability per sample") {
  TempDir dir("predict");
  run_pipeline(dir);
  auto out = dir.path.string();
  REQUIRE(run_quiet({"predict", "--bundle", dir.file("bundle.bin"), "--schema",
                     dir.file("synth.schema"), "--data", dir.file("synth.samples"),
                     "--deterministic", "--out", out}) == 0);
  auto preds = slurp(dir.file("predictions.txt"));
  CHECK(std::count(preds.begin(), preds.end(), '\n') == 300);
  std::istringstream in(preds);
  double p;
  while (in >> p) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("cli: config file sets defaults, flags override") {
  TempDir dir("config");
  auto out = dir.path.string();
  write(dir.file("run.cfg"),
        "# pipeline defaults\n"
        "synth.n_samples 50\n"
        "synth.sparse_dims 40\n"
        "synth.noise 0\n");
  REQUIRE(run_quiet({"gen-synth", "--config", dir.file("run.cfg"), "--seed", "3",
                     "--deterministic", "--out", out}) == 0);
  auto samples = slurp(dir.file("synth.samples"));
  CHECK(std::count(samples.begin(), samples.end(), '\n') == 50);

  REQUIRE(run_quiet({"gen-synth", "--config", dir.file("run.cfg"), "--n-samples", "20",
                     "--seed", "3", "--deterministic", "--out", out}) == 0);
  samples = slurp(dir.file("synth.samples"));
  CHECK(std::count(samples.begin(), samples.end(), '\n') == 20);
}

TEST_CASE("cli: featurize hashes labeled text into schema + samples") {
  TempDir dir("featurize");
  auto out = dir.path.string();
  write(dir.file("text.tsv"), "1\tcheap flights\n0\tweather today\n");
  REQUIRE(run_quiet({"featurize", "--input", dir.file("text.tsv"), "--dim", "4096",
                     "--deterministic", "--out", out}) == 0);
  auto schema = slurp(dir.file("featurized.schema"));
  CHECK(schema.find("text sparse 4096 embed") != std::string::npos);
  auto samples = slurp(dir.file("featurized.samples"));
  CHECK(std::count(samples.begin(), samples.end(), '\n') == 2);
  CHECK(samples[0] == '1');

  write(dir.file("bad.tsv"), "2\thello\n");
  CHECK(run_quiet({"featurize", "--input", dir.file("bad.tsv"), "--out", out}) == 2);
}

TEST_CASE("cli: manifests record inputs, outputs, and digests") {
  TempDir dir("manifest");
  run_pipeline(dir);
  auto manifest = slurp(dir.file("train-forest.manifest"));
  CHECK(manifest.find("manifest 1\n") == 0);
  CHECK(manifest.find("command train-forest\n") != std::string::npos);
  CHECK(manifest.find("deterministic true\n") != std::string::npos);
  CHECK(manifest.find("seed 7\n") != std::string::npos);
  CHECK(manifest.find("option n_trees 8\n") != std::string::npos);
  CHECK(manifest.find("input stacked ") != std::string::npos);
  CHECK(manifest.find("output forest ") != std::string::npos);
  // No wall-clock stamp in deterministic mode.
  CHECK(manifest.find("created ") == std::string::npos);
}

TEST_CASE("cli: bench writes the documented CSV header") {
  TempDir dir("bench");
  run_pipeline(dir);
  auto out = dir.path.string();
  REQUIRE(run_quiet({"bench", "--bundle", dir.file("bundle.bin"), "--schema",
                     dir.file("synth.schema"), "--data", dir.file("synth.samples"),
                     "--reps", "3", "--warmup", "1", "--deterministic", "--out",
                     out}) == 0);
  auto csv = slurp(dir.file("bench.csv"));
  CHECK(csv.find("config,n_t,d_t,D,T1_ns,T2_ns,total_ns,p50_ns,p99_ns,reps") == 0);
  CHECK(run_quiet({"bench", "--bundle", dir.file("bundle.bin"), "--schema",
                   dir.file("synth.schema"), "--data", dir.file("synth.samples"),
                   "--reps", "0", "--out", out}) == 2);
}
