// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/dp/dp.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <random>

#include "psearch/common/error.h"

namespace psearch {

void PrivacyParams::Validate() const {
  PSEARCH_CHECK(epsilon > 0 && epsilon < 1, ValidationError, "epsilon must lie in (0,1)");
  PSEARCH_CHECK(delta > 0 && delta < 1, ValidationError, "delta must lie in (0,1)");
  PSEARCH_CHECK(max_queries >= 1, ValidationError, "max_queries must be at least 1");
  PSEARCH_CHECK(honest_clients >= 2, ValidationError, "at least two honest clients required");
  PSEARCH_CHECK(clusters >= 1, ValidationError, "at least one cluster required");
  PSEARCH_CHECK(honest_fraction > 0 && honest_fraction <= 1, ValidationError,
                "honest_fraction must lie in (0,1]");
  if (p_override) {
    PSEARCH_CHECK(*p_override > 0 && *p_override < 1, ValidationError, "p must lie in (0,1)");
  }
}

size_t PrivacyParams::total_clients() const {
  return static_cast<size_t>(std::llround(static_cast<double>(honest_clients) / honest_fraction));
}

NBParams nb_formula(double epsilon, double delta, size_t max_queries, LogBase base) {
  NBParams nb;
  nb.p = std::exp(-0.2 * epsilon / static_cast<double>(max_queries));
  nb.r = 3 * (1 + (base == LogBase::kBase2 ? -std::log2(delta) : -std::log(delta)));
  return nb;
}

NBParams nb_params(const PrivacyParams& privacy) {
  privacy.Validate();
  NBParams nb = nb_formula(privacy.epsilon, privacy.delta, privacy.max_queries, privacy.log_base);
  if (privacy.p_override) nb.p = *privacy.p_override;
  return nb;
}

uint64_t sample_nb(const NBParams& nb, Prng& rng) {
  PSEARCH_CHECK(nb.r > 0 && nb.p >= 0 && nb.p < 1, ValidationError,
                "negative binomial needs r > 0 and p in [0,1)");
  if (nb.p == 0) return 0;
  std::gamma_distribution<double> gamma(nb.r, nb.p / (1 - nb.p));
  const double rate = gamma(rng);
  if (!(rate > 0)) return 0;
  std::poisson_distribution<uint64_t> poisson(rate);
  return poisson(rng);
}

Schedule rand_schedule(size_t items, size_t slots, Prng& rng) {
  PSEARCH_CHECK(slots >= 1, ValidationError, "an epoch needs at least one slot");
  Schedule s;
  s.slot_of.resize(items);
  s.by_slot.resize(slots);
  for (size_t i = 0; i < items; ++i) {
    s.slot_of[i] = static_cast<uint32_t>(rng.UniformBelow(slots));
    s.by_slot[s.slot_of[i]].push_back(static_cast<uint32_t>(i));
  }
  return s;
}

size_t QueryPlan::real_count() const {
  return static_cast<size_t>(std::count_if(items.begin(), items.end(), [](const QueryDescriptor& d) {
    return d.kind == QueryKind::kReal;
  }));
}

QueryPlan build_query_plan(const std::vector<uint32_t>& real_clusters, const NBParams& per_client,
                           const PlanOptions& options, uint64_t plan_id, Prng& rng) {
  PSEARCH_CHECK(real_clusters.size() <= options.max_real, ValidationError,
                "more real queries than the per-epoch limit");
  PSEARCH_CHECK(options.clusters >= 1, ValidationError, "at least one cluster required");
  QueryPlan plan;
  plan.plan_id = plan_id;
  for (size_t i = 0; i < real_clusters.size(); ++i) {
    PSEARCH_CHECK(real_clusters[i] < options.clusters, ValidationError, "real query cluster out of range");
    plan.items.push_back({real_clusters[i], QueryKind::kReal, static_cast<int32_t>(i)});
  }
  for (size_t cluster = 0; cluster < options.clusters; ++cluster) {
    const uint64_t fakes = sample_nb(per_client, rng);
    for (uint64_t j = 0; j < fakes; ++j) {
      const uint32_t target = options.placement == FakePlacement::kOwnCluster
                                  ? static_cast<uint32_t>(cluster)
                                  : static_cast<uint32_t>(rng.UniformBelow(options.clusters));
      plan.items.push_back({target, QueryKind::kFake, -1});
    }
  }
  std::shuffle(plan.items.begin(), plan.items.end(), rng);
  plan.schedule = rand_schedule(plan.items.size(), options.slots, rng);
  return plan;
}

double expected_fake_queries(const PrivacyParams& privacy) {
  const NBParams nb = nb_params(privacy);
  return nb.mean() * static_cast<double>(privacy.clusters) /
         static_cast<double>(privacy.honest_clients);
}

PrivacyGuarantee compose_privacy(double epsilon, double delta, size_t max_queries, size_t epochs) {
  const double l = static_cast<double>(epochs);
  return {2 * l * epsilon, 2 * l * static_cast<double>(max_queries) * delta};
}

std::vector<uint64_t> EpochHistogram::totals() const {
  std::vector<uint64_t> out(clusters, 0);
  for (size_t s = 0; s < slots; ++s) {
    for (size_t k = 0; k < clusters; ++k) out[k] += at(s, k);
  }
  return out;
}

uint64_t EpochHistogram::total() const {
  uint64_t sum = 0;
  for (uint64_t c : counts) sum += c;
  return sum;
}

CuratorOutput central_curator(const std::vector<std::vector<uint32_t>>& client_reals,
                              const NBParams& nb, size_t clusters, size_t max_queries, Prng& rng) {
  CuratorOutput out;
  out.totals.assign(clusters, 0);
  for (const auto& reals : client_reals) {
    PSEARCH_CHECK(reals.size() <= max_queries, ValidationError,
                  "a client exceeds the per-epoch query limit");
    for (size_t i = 0; i < reals.size(); ++i) {
      PSEARCH_CHECK(reals[i] < clusters, ValidationError, "real query cluster out of range");
      out.list.push_back({reals[i], QueryKind::kReal, static_cast<int32_t>(i)});
      ++out.totals[reals[i]];
    }
  }
  for (size_t cluster = 0; cluster < clusters; ++cluster) {
    const uint64_t fakes = sample_nb(nb, rng);
    for (uint64_t j = 0; j < fakes; ++j) {
      out.list.push_back({static_cast<uint32_t>(cluster), QueryKind::kFake, -1});
    }
    out.totals[cluster] += fakes;
  }
  std::shuffle(out.list.begin(), out.list.end(), rng);
  return out;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  PSEARCH_CHECK(!a.empty() && !b.empty(), ValidationError, "KS test needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  // Kolmogorov tail: 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
  double p = 0;
  if (lambda < 0.2) {
    p = 1;
  } else {
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      p += (k % 2 == 1 ? 2 : -2) * term;
      if (term < 1e-16) break;
    }
    p = std::clamp(p, 0.0, 1.0);
  }
  return {d, p};
}

double empirical_tv(const std::vector<std::vector<uint64_t>>& a,
                    const std::vector<std::vector<uint64_t>>& b) {
  PSEARCH_CHECK(!a.empty() && !b.empty(), ValidationError, "TV needs non-empty samples");
  std::map<std::vector<uint64_t>, std::pair<double, double>> mass;
  for (const auto& v : a) mass[v].first += 1.0 / static_cast<double>(a.size());
  for (const auto& v : b) mass[v].second += 1.0 / static_cast<double>(b.size());
  double tv = 0;
  for (const auto& [key, m] : mass) tv += std::abs(m.first - m.second);
  return tv / 2;
}

AuditReport privacy_audit(const PrivacyParams& privacy, std::optional<double> stated_total_delta,
                          size_t draws, size_t shards, uint64_t seed) {
  AuditReport rep;
  rep.privacy = privacy;
  rep.nb = nb_params(privacy);
  rep.per_client = rep.nb.Shard(privacy.honest_clients);
  rep.mechanism_epsilon = -5.0 * static_cast<double>(privacy.max_queries) * std::log(rep.nb.p);
  rep.epsilon_mismatch = std::abs(rep.mechanism_epsilon - privacy.epsilon) > 1e-12 * privacy.epsilon;
  rep.expected_fakes_per_client = expected_fake_queries(privacy);
  rep.per_epoch = compose_privacy(privacy.epsilon, privacy.delta, privacy.max_queries, 1);
  rep.composed = compose_privacy(privacy.epsilon, privacy.delta, privacy.max_queries, privacy.epochs);
  rep.stated_total_delta = stated_total_delta;
  if (stated_total_delta) {
    rep.stated_delta_mismatch =
        std::abs(*stated_total_delta - rep.composed.delta) > 1e-9 * rep.composed.delta;
  }
  if (draws > 0) {
    PSEARCH_CHECK(shards >= 1, ValidationError, "shards must be at least 1");
    Prng direct_rng(seed, "audit.direct"), shard_rng(seed, "audit.shards");
    std::vector<double> direct(draws), summed(draws);
    double sum = 0, sum_sq = 0;
    const NBParams piece = rep.nb.Shard(shards);
    for (size_t i = 0; i < draws; ++i) {
      direct[i] = static_cast<double>(sample_nb(rep.nb, direct_rng));
      sum += direct[i];
      sum_sq += direct[i] * direct[i];
      uint64_t total = 0;
      for (size_t s = 0; s < shards; ++s) total += sample_nb(piece, shard_rng);
      summed[i] = static_cast<double>(total);
    }
    SamplerCheck& c = rep.sampler;
    c.draws = draws;
    c.shards = shards;
    c.mean = sum / static_cast<double>(draws);
    c.variance = sum_sq / static_cast<double>(draws) - c.mean * c.mean;
    c.mean_rel_error = std::abs(c.mean - rep.nb.mean()) / rep.nb.mean();
    c.variance_rel_error = std::abs(c.variance - rep.nb.variance()) / rep.nb.variance();
    c.divisibility = ks_two_sample(direct, summed);
  }
  return rep;
}

std::string AuditReport::ToJson() const {
  nlohmann::ordered_json j;
  auto& in = j["inputs"];
  in["epsilon"] = privacy.epsilon;
  in["delta"] = privacy.delta;
  in["max_queries"] = privacy.max_queries;
  in["honest_clients"] = privacy.honest_clients;
  in["total_clients"] = privacy.total_clients();
  in["honest_fraction"] = privacy.honest_fraction;
  in["clusters"] = privacy.clusters;
  in["epochs"] = privacy.epochs;
  in["log_base"] = privacy.log_base == LogBase::kBase2 ? "base2" : "natural";
  if (privacy.p_override) {
    in["p_override"] = *privacy.p_override;
  } else {
    in["p_override"] = nullptr;
  }
  j["nb"] = {{"r", nb.r}, {"p", nb.p}, {"mean", nb.mean()}, {"variance", nb.variance()}};
  j["per_client_nb"] = {{"r", per_client.r}, {"p", per_client.p}};
  j["mechanism_epsilon"] = mechanism_epsilon;
  j["epsilon_mismatch"] = epsilon_mismatch;
  j["expected_fakes_per_client"] = expected_fakes_per_client;
  j["per_epoch"] = {{"epsilon", per_epoch.epsilon}, {"delta", per_epoch.delta}};
  j["composed"] = {{"epsilon", composed.epsilon}, {"delta", composed.delta}};
  if (stated_total_delta) {
    j["stated_total_delta"] = *stated_total_delta;
  } else {
    j["stated_total_delta"] = nullptr;
  }
  j["stated_delta_mismatch"] = stated_delta_mismatch;
  if (sampler.draws > 0) {
    j["sampler"] = {{"draws", sampler.draws},
                    {"mean", sampler.mean},
                    {"variance", sampler.variance},
                    {"mean_rel_error", sampler.mean_rel_error},
                    {"variance_rel_error", sampler.variance_rel_error},
                    {"shards", sampler.shards},
                    {"ks_statistic", sampler.divisibility.statistic},
                    {"ks_p_value", sampler.divisibility.p_value}};
  }
  return j.dump(2);
}

}  // namespace psearch
