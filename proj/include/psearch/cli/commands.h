// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_CLI_COMMANDS_H_
#define PSEARCH_CLI_COMMANDS_H_

#include <cstddef>
#include <optional>
#include <string>

#include "psearch/cli/run_config.h"

namespace psearch {

// Every command returns its artifact (JSON embedding the resolved config)
// and a human summary. Both are deterministic except bench timings.
struct CommandOutput {
  std::string json;
  std::string text;
  std::string csv;  // epoch histogram rows; empty for other commands
};

// Synthetic corpus: entries.wemb, queries.wemb, truth.json, corpus.json.
CommandOutput cmd_gen(const RunConfig& config, const std::string& out_dir);

// Clusters and encodes the corpus (a WEMB file, or the synthetic corpus
// when `embeddings_path` is empty) into `out_dir`: database files,
// cuckoo.bin when metadata exceeds the inline threshold, config.json and
// manifest.json. Rerunning with the same config rewrites identical bytes.
CommandOutput cmd_init(const RunConfig& config, const std::string& embeddings_path,
                       const std::string& out_dir);

// One in-process roundtrip for row `row` of a WEMB query file. Requests and
// responses pass through their wire forms; with `dump_dir` the exact bytes
// are written as request_<i>.bin and response_<i>.bin.
CommandOutput cmd_query(const RunConfig& config, const std::string& index_dir,
                        const std::string& query_path, size_t row,
                        const std::string& dump_dir = "");

// Runs config.epoch. Crypto mode needs an index, a WEMB file with one query
// per honest client, and optionally a truth.json of planted entries.
CommandOutput cmd_epoch(const RunConfig& config, const std::string& index_dir = "",
                        const std::string& queries_path = "", const std::string& truth_path = "");

CommandOutput cmd_audit(const RunConfig& config);

struct BenchResult {
  double ct_ct_add_ms = 0;
  double pt_ct_mult_ms = 0;
  double ct_rotate_ms = 0;
  double ct_ct_mult_ms = 0;
  bool ordering_holds = false;  // add < pt mult < rotate < ct mult
};

// Mean latency of each SHE operation at the search parameters.
BenchResult run_bench(const RunConfig& config);
CommandOutput cmd_bench(const RunConfig& config, BenchResult* result = nullptr);

}  // namespace psearch

#endif  // PSEARCH_CLI_COMMANDS_H_
