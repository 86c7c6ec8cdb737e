// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_DP_DP_H_
#define PSEARCH_DP_DP_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psearch/common/prng.h"
#include "psearch/common/query_kind.h"

namespace psearch {

enum class LogBase : uint8_t { kNatural, kBase2 };

// Where a fake query drawn for cluster i is sent. kOwnCluster keeps it on
// cluster i, so per-cluster noise is exactly NB(r, p) summed over clients.
// kUniform re-targets every fake to a uniformly random cluster.
enum class FakePlacement : uint8_t { kOwnCluster, kUniform };

struct PrivacyParams {
  double epsilon = 1.0 / 800;
  double delta = 9.313225746154785e-10;  // 2^-30
  size_t max_queries = 1;                // per client per epoch
  size_t honest_clients = 250000;
  size_t clusters = 256;
  size_t epochs = 400;
  double honest_fraction = 0.5;
  LogBase log_base = LogBase::kBase2;
  // Pins p directly; epsilon then only feeds the accountant.
  std::optional<double> p_override;

  // epsilon, delta in (0,1); max_queries >= 1; honest_clients >= 2;
  // honest_fraction in (0,1].
  void Validate() const;
  size_t total_clients() const;
};

// pmf C(k + r - 1, k) p^k (1 - p)^r: mean r p / (1 - p).
struct NBParams {
  double r = 1;
  double p = 0.5;

  double mean() const { return r * p / (1 - p); }
  double variance() const { return r * p / ((1 - p) * (1 - p)); }
  // Shape split across `parts` independent contributors.
  NBParams Shard(size_t parts) const { return {r / static_cast<double>(parts), p}; }
};

// p = exp(-0.2 epsilon / max_queries), r = 3 (1 + log(1/delta)), without
// checking the (0,1) hypotheses.
NBParams nb_formula(double epsilon, double delta, size_t max_queries, LogBase base);
// Validated form; honours p_override.
NBParams nb_params(const PrivacyParams& privacy);

// Gamma(shape r, scale p/(1-p)) mixed Poisson; any real r > 0.
uint64_t sample_nb(const NBParams& nb, Prng& rng);

struct QueryDescriptor {
  uint32_t cluster = 0;
  QueryKind kind = QueryKind::kReal;
  int32_t real_index = -1;  // position in the client's real list, -1 for fakes
};

struct Schedule {
  std::vector<uint32_t> slot_of;               // item -> slot
  std::vector<std::vector<uint32_t>> by_slot;  // slot -> items, ascending
};

// Independent uniform slot in [0, slots) per item.
Schedule rand_schedule(size_t items, size_t slots, Prng& rng);

struct PlanOptions {
  size_t clusters = 1;
  size_t slots = 1;
  size_t max_real = 1;
  FakePlacement placement = FakePlacement::kOwnCluster;
};

struct QueryPlan {
  uint64_t plan_id = 0;
  std::vector<QueryDescriptor> items;  // permuted
  Schedule schedule;

  size_t real_count() const;
  size_t fake_count() const { return items.size() - real_count(); }
};

// Real queries plus NB(per_client) fakes per cluster, permuted and
// scheduled.
QueryPlan build_query_plan(const std::vector<uint32_t>& real_clusters, const NBParams& per_client,
                           const PlanOptions& options, uint64_t plan_id, Prng& rng);

// r p K / ((1 - p) U): expected fakes per honest client per epoch.
double expected_fake_queries(const PrivacyParams& privacy);

struct PrivacyGuarantee {
  double epsilon = 0;
  double delta = 0;
};

// Per epoch (2 eps, 2 max_queries delta); basic composition over `epochs`.
PrivacyGuarantee compose_privacy(double epsilon, double delta, size_t max_queries, size_t epochs);

// Slots x clusters counts, slot-major.
struct EpochHistogram {
  size_t slots = 0;
  size_t clusters = 0;
  std::vector<uint64_t> counts;

  EpochHistogram() = default;
  EpochHistogram(size_t t, size_t k) : slots(t), clusters(k), counts(t * k, 0) {}
  uint64_t& at(size_t slot, size_t cluster) { return counts[slot * clusters + cluster]; }
  uint64_t at(size_t slot, size_t cluster) const { return counts[slot * clusters + cluster]; }
  std::vector<uint64_t> totals() const;
  uint64_t total() const;
  bool operator==(const EpochHistogram& o) const = default;
};

struct CuratorOutput {
  std::vector<QueryDescriptor> list;  // permuted
  std::vector<uint64_t> totals;       // per cluster
};

// Central model: all real queries plus one NB(r, p) draw of fakes per
// cluster, uniformly permuted.
CuratorOutput central_curator(const std::vector<std::vector<uint32_t>>& client_reals,
                              const NBParams& nb, size_t clusters, size_t max_queries, Prng& rng);

struct KsResult {
  double statistic = 0;
  double p_value = 1;
};

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value (conservative
// for discrete samples).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Plug-in total variation distance between two empirical distributions
// over vectors.
double empirical_tv(const std::vector<std::vector<uint64_t>>& a,
                    const std::vector<std::vector<uint64_t>>& b);

struct SamplerCheck {
  size_t draws = 0;
  double mean = 0, variance = 0;
  double mean_rel_error = 0, variance_rel_error = 0;
  size_t shards = 0;
  KsResult divisibility;
};

struct AuditReport {
  PrivacyParams privacy;
  NBParams nb;
  NBParams per_client;
  double mechanism_epsilon = 0;  // epsilon implied by p: -5 max_queries ln p
  bool epsilon_mismatch = false;
  double expected_fakes_per_client = 0;
  PrivacyGuarantee per_epoch;
  PrivacyGuarantee composed;
  std::optional<double> stated_total_delta;
  bool stated_delta_mismatch = false;
  SamplerCheck sampler;

  std::string ToJson() const;
};

// `draws` = 0 skips the sampler statistics.
AuditReport privacy_audit(const PrivacyParams& privacy, std::optional<double> stated_total_delta,
                          size_t draws, size_t shards, uint64_t seed);

}  // namespace psearch

#endif  // PSEARCH_DP_DP_H_
