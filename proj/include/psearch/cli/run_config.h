// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_CLI_RUN_CONFIG_H_
#define PSEARCH_CLI_RUN_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "psearch/cluster/cluster.h"
#include "psearch/dp/dp.h"
#include "psearch/encsearch/encsearch.h"
#include "psearch/pir/pir.h"
#include "psearch/simnet/simnet.h"

namespace psearch {

struct CorpusConfig {
  CorpusSpec spec;
  size_t metadata_bytes = 100;  // per entry; 0 disables metadata
};

struct PirConfig {
  double gamma = 5.0;
  int drop_l0 = 19;
  int drop_l1 = 13;
  size_t response_level = 1;
  ExpansionKeys keys = ExpansionKeys::kReduced;
  bool linearize = true;
  bool lazy_rescale = true;
  CuckooOptions cuckoo;

  PirParams ToParams() const;
};

// Every knob a command may read. Defaults are the production parameter
// set: n = 4096, 27/28/28-bit limbs, t = 40961, K = 256, one probe,
// epsilon = 1/800, delta = 2^-30, 400 epochs.
struct RunConfig {
  uint64_t seed = 1;
  size_t threads = 1;
  SearchParams search = SearchParams::Production(false);
  size_t clusters = 256;
  size_t probes = 1;  // clusters probed per query
  size_t kmeans_iters = 25;
  size_t topk = 100;
  ServerOptions server;
  PirConfig pir;
  PrivacyParams privacy;
  std::optional<double> stated_total_delta = 1.4901161193847656e-08;  // 2^-26
  size_t audit_draws = 0;
  size_t audit_shards = 100;
  EpochConfig epoch;
  CorpusConfig corpus;
  size_t bench_iterations = 20;

  // Collects every violated field check, then throws one ValidationError
  // listing them all. Includes the drop-bit inequality for the search
  // response and for PIR responses.
  void Validate() const;

  std::string ToJson() const;
  // Unknown keys at any level are ValidationErrors; missing keys keep
  // defaults. Validates the result.
  static RunConfig FromJson(const std::string& text);
  static RunConfig Load(const std::string& path);
};

}  // namespace psearch

#endif  // PSEARCH_CLI_RUN_CONFIG_H_
