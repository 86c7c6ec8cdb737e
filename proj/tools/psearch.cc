// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

// Operator CLI. Exit codes: 0 success, 2 invalid input or config, 1 runtime
// failure.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "psearch/cli/commands.h"
#include "psearch/common/bytes.h"
#include "psearch/common/error.h"

namespace {

struct Globals {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  size_t threads = 1;
  std::string format = "text";
  std::string out;
};

psearch::RunConfig Resolve(const Globals& g) {
  psearch::RunConfig c =
      g.config_path.empty() ? psearch::RunConfig{} : psearch::RunConfig::Load(g.config_path);
  if (g.seed_set) {
    c.seed = g.seed;
    c.epoch.seed = g.seed;
    c.corpus.spec.seed = g.seed;
  }
  c.threads = g.threads;
  c.Validate();
  return c;
}

void Emit(const Globals& g, const psearch::CommandOutput& out) {
  if (!g.out.empty()) {
    psearch::WriteFileBytes(g.out, std::vector<uint8_t>(out.json.begin(), out.json.end()));
  }
  std::cout << (g.format == "json" ? out.json : out.text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private clustered embedding search: build, query, simulate, audit, bench"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_path, "JSON run config; unknown keys are rejected");
  app.add_option("--seed", g.seed, "Master seed (overrides config, epoch and corpus seeds)")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--threads", g.threads, "Worker cap; modules run single-threaded")
      ->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "Stdout format")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--out", g.out, "Also write the JSON artifact to this path");

  std::string gen_dir;
  auto* gen = app.add_subcommand("gen", "Write a synthetic corpus with planted neighbours");
  gen->add_option("dir", gen_dir, "Output directory")->required();

  std::string init_dir, init_embeddings;
  size_t init_clusters = 0;
  auto* init = app.add_subcommand("init", "Cluster and encode a database");
  init->add_option("dir", init_dir, "Index directory")->required();
  init->add_option("--embeddings", init_embeddings, "WEMB file; synthetic corpus when omitted");
  init->add_option("--clusters", init_clusters, "Override the cluster count K");

  std::string query_index, query_file, query_dump;
  size_t query_row = 0, query_probes = 0;
  auto* query = app.add_subcommand("query", "Encrypted search roundtrip for one query");
  query->add_option("index", query_index, "Index directory")->required();
  query->add_option("queries", query_file, "WEMB query file")->required();
  query->add_option("--row", query_row, "Row of the query file");
  query->add_option("--probes", query_probes, "Override clusters probed");
  query->add_option("--dump", query_dump, "Write request/response wire bytes here");

  std::string epoch_index, epoch_queries, epoch_truth, epoch_csv;
  auto* epoch = app.add_subcommand("epoch", "Simulate one epoch and report the server view");
  epoch->add_option("--index", epoch_index, "Index directory (crypto mode)");
  epoch->add_option("--queries", epoch_queries, "WEMB file, one query per honest client");
  epoch->add_option("--truth", epoch_truth, "JSON list of planted entries");
  epoch->add_option("--csv", epoch_csv, "Write the histogram as CSV");

  auto* audit = app.add_subcommand("audit", "Privacy accountant and sampler checks");
  auto* bench = app.add_subcommand("bench", "Mean latency per homomorphic operation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    psearch::RunConfig config = Resolve(g);
    if (gen->parsed()) {
      Emit(g, psearch::cmd_gen(config, gen_dir));
    } else if (init->parsed()) {
      if (init_clusters != 0) config.clusters = init_clusters;
      Emit(g, psearch::cmd_init(config, init_embeddings, init_dir));
    } else if (query->parsed()) {
      if (query_probes != 0) config.probes = query_probes;
      Emit(g, psearch::cmd_query(config, query_index, query_file, query_row, query_dump));
    } else if (epoch->parsed()) {
      const psearch::CommandOutput out =
          psearch::cmd_epoch(config, epoch_index, epoch_queries, epoch_truth);
      if (!epoch_csv.empty()) {
        psearch::WriteFileBytes(epoch_csv, std::vector<uint8_t>(out.csv.begin(), out.csv.end()));
      }
      Emit(g, out);
    } else if (audit->parsed()) {
      Emit(g, psearch::cmd_audit(config));
    } else if (bench->parsed()) {
      psearch::BenchResult r;
      Emit(g, psearch::cmd_bench(config, &r));
      if (!r.ordering_holds) {
        std::cerr << "error: latency ordering CtCtAdd < PtCtMult < CtRotate < CtCtMult violated\n";
        return 1;
      }
    }
  } catch (const psearch::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
