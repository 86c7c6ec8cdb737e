// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_SIMNET_SIMNET_H_
#define PSEARCH_SIMNET_SIMNET_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "psearch/dp/dp.h"
#include "psearch/encsearch/encsearch.h"

namespace psearch {

enum class SimMode : uint8_t { kHistogramOnly = 0, kFullCrypto = 1 };

struct EpochConfig {
  size_t slots = 60;
  size_t honest_clients = 3;
  size_t malicious_clients = 0;  // real queries only, adversary-chosen clusters
  size_t clusters = 2;
  size_t max_queries = 1;        // per client per epoch
  // epsilon, delta, log base, epochs and p_override feed the mechanism and
  // the accountant; its cluster/client/query counts are taken from above.
  PrivacyParams privacy;
  std::optional<NBParams> nb_override;  // replaces nb_params(privacy)
  FakePlacement placement = FakePlacement::kOwnCluster;
  SimMode mode = SimMode::kHistogramOnly;
  uint64_t seed = 1;
  // Real clusters per honest client, fixed across epochs. Empty: each
  // client draws max_queries distinct clusters from the seed (histogram
  // mode) or routes its query embedding (crypto mode).
  std::vector<std::vector<uint32_t>> real_clusters;
  ServerOptions server;
  size_t topk = 100;
  bool record_timing = false;  // wall times break byte-identical reports

  // slots >= 1, clusters >= 1, max_queries in [1, clusters], a real list
  // per honest client when given.
  void Validate() const;
  // Privacy parameters with the counts above filled in.
  PrivacyParams ResolvedPrivacy() const;
  NBParams Noise() const;
  NBParams PerClientNoise() const;

  std::string ToJson() const;
  // Unknown keys are ValidationErrors; missing keys keep their defaults.
  static EpochConfig FromJson(const std::string& text);
};

// Fixed real clusters per honest client for this config.
std::vector<std::vector<uint32_t>> ResolveRealClusters(const EpochConfig& config);
// Fixed adversary clusters per malicious client (max_queries each, repeats
// allowed), drawn from the config seed.
std::vector<std::vector<uint32_t>> ResolveMaliciousClusters(const EpochConfig& config);

// A query as handed to the anonymizer: carries the sender.
struct Submission {
  uint32_t client = 0;
  uint32_t item = 0;
  uint32_t slot = 0;
  uint32_t cluster = 0;
  const SearchQuery* payload = nullptr;  // null in histogram mode
};

// What the server receives. No client, item or kind field exists.
struct AnonymizedRecord {
  uint32_t slot = 0;
  uint32_t cluster = 0;
  uint64_t route = 0;                    // opaque token for the way back
  const SearchQuery* payload = nullptr;
};

// Strips identities and permutes each slot's batch uniformly.
class Anonymizer {
 public:
  explicit Anonymizer(Prng rng) : rng_(std::move(rng)) {}
  std::vector<AnonymizedRecord> Batch(const std::vector<Submission>& slot_batch);
  // (client, item) for a route token; throws UsageError for unknown ones.
  std::pair<uint32_t, uint32_t> Route(uint64_t route) const;

 private:
  Prng rng_;
  std::unordered_map<uint64_t, std::pair<uint32_t, uint32_t>> routes_;
};

// Counts per (slot, cluster); the whole of the server's view.
EpochHistogram server_view(const std::vector<AnonymizedRecord>& records, size_t slots,
                           size_t clusters);

// One histogram-only epoch through plans, anonymizer and server view.
// `epoch` selects an independent randomness stream.
EpochHistogram simulate_view(const EpochConfig& config, uint64_t epoch);

// Public material for full-crypto epochs.
struct CryptoWorld {
  const EncodedDatabase* db = nullptr;
  const ClientIndex* index = nullptr;
  const ResidueContexts* residues = nullptr;
  const Embeddings* client_queries = nullptr;  // one row per honest client
  const std::vector<uint32_t>* truth = nullptr;  // planted entry per client, optional
};

struct EpochReport {
  std::string config_json;
  EpochHistogram histogram;
  uint64_t real_queries = 0;
  uint64_t fake_queries = 0;
  uint64_t malicious_queries = 0;
  NBParams noise;
  NBParams per_client_noise;
  // Full-crypto mode.
  uint64_t answered = 0;
  uint64_t request_bytes = 0;        // serialized SearchQuery bytes
  uint64_t request_ct_bytes = 0;
  uint64_t request_key_bytes = 0;
  uint64_t response_bytes = 0;       // serialized SearchResponse bytes
  OpCounts ops;
  std::vector<double> server_ms;     // only with record_timing
  uint64_t clients_ranked = 0;
  uint64_t planted_top1 = 0;
  double mrr_at_100 = 0;
  std::optional<AuditReport> audit;  // needs >= 2 honest clients

  std::string ToJson() const;
  // "slot,cluster,count" rows, header first.
  std::string HistogramCsv() const;
};

EpochReport run_epoch(const EpochConfig& config, const CryptoWorld* world = nullptr,
                      uint64_t epoch = 0);

struct CuratorCheckResult {
  size_t epochs = 0;
  // Plug-in TV of per-cluster totals against the exact curator law
  // (reals + independent NB(r, p) per cluster).
  double tv_totals_exact = 0;
  // Two-sample TV of totals against sampled central_curator epochs.
  double tv_totals_curator = 0;
  // Chi-square p-value that slots are uniform given the totals.
  double slot_uniform_p = 1;
};

CuratorCheckResult curator_equivalence_check(const EpochConfig& config, size_t epochs);

// One outcome (totals of the two moved-between clusters) of the paired runs.
struct LossPoint {
  uint64_t from_total = 0, to_total = 0;
  uint64_t count = 0, neighbour_count = 0;
  double log_ratio = 0;  // ln(count / neighbour_count); 0 when either is 0
};

struct DistinguisherReport {
  size_t trials = 0;
  uint32_t from_cluster = 0, to_cluster = 0;
  double epsilon_bound = 0;  // 2 epsilon of the mechanism
  double delta_bound = 0;    // 2 max_queries delta
  // Largest |log ratio| over outcomes seen >= min_count times on both sides.
  double epsilon_hat = 0;
  double slack = 0;            // z = 3 standard error of that log ratio
  double advantage = 0;        // empirical TV between the paired outcome laws
  double unmatched_mass = 0;   // mass on outcomes never seen on the other side
  bool testable = false;       // some outcome reached min_count on both sides
  bool within_envelope = true; // epsilon_hat - slack <= epsilon_bound
  std::vector<LossPoint> curve; // every outcome seen, ascending
};

// Paired epochs on one coupled randomness stream where client 0 (honest
// when any is) moves its max_queries real queries from
// `from` to `to`; outcomes are the per-cluster totals of those clusters.
DistinguisherReport dp_distinguisher_test(const EpochConfig& config, uint32_t from, uint32_t to,
                                          size_t trials, size_t min_count = 100);

}  // namespace psearch

#endif  // PSEARCH_SIMNET_SIMNET_H_
