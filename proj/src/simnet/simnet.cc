// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/simnet/simnet.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/negative_binomial.hpp>
#include <nlohmann/json.hpp>

#include "psearch/common/error.h"

namespace psearch {

namespace {

using Json = nlohmann::ordered_json;

const char* ModeName(SimMode m) { return m == SimMode::kFullCrypto ? "crypto" : "histogram"; }
const char* PlacementName(FakePlacement p) {
  return p == FakePlacement::kUniform ? "uniform" : "own_cluster";
}

void RejectUnknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  PSEARCH_CHECK(j.is_object(), ValidationError, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    PSEARCH_CHECK(allowed.count(key) != 0, ValidationError,
                  "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void ReadIf(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

Json OpsJson(const OpCounts& o) {
  return Json{{"ct_adds", o.ct_adds},         {"pt_adds", o.pt_adds},
              {"pt_mults", o.pt_mults},       {"rotations", o.rotations},
              {"substitutions", o.substitutions}, {"key_switches", o.key_switches},
              {"tensors", o.tensors},         {"rescales", o.rescales},
              {"relinearizations", o.relinearizations}, {"mod_switches", o.mod_switches}};
}

PlanOptions MakePlanOptions(const EpochConfig& c) {
  return {c.clusters, c.slots, c.max_queries, c.placement};
}

// Who sent what in one epoch, before anonymization.
struct EpochTraffic {
  std::vector<std::vector<Submission>> by_slot;
  uint64_t real = 0, fake = 0, malicious = 0;
};

// Plans for honest clients and adversary submissions, grouped by slot.
EpochTraffic BuildTraffic(const EpochConfig& config,
                          const std::vector<std::vector<uint32_t>>& honest_reals,
                          const std::vector<std::vector<uint32_t>>& malicious_reals, Prng& epoch_rng,
                          std::vector<QueryPlan>* plans_out) {
  EpochTraffic traffic;
  traffic.by_slot.resize(config.slots);
  const PlanOptions options = MakePlanOptions(config);
  const NBParams per_client = config.PerClientNoise();
  for (size_t u = 0; u < honest_reals.size(); ++u) {
    Prng rng = epoch_rng.Fork("client", u);
    QueryPlan plan = build_query_plan(honest_reals[u], per_client, options, u, rng);
    for (size_t i = 0; i < plan.items.size(); ++i) {
      const QueryDescriptor& d = plan.items[i];
      traffic.by_slot[plan.schedule.slot_of[i]].push_back(
          {static_cast<uint32_t>(u), static_cast<uint32_t>(i), plan.schedule.slot_of[i], d.cluster,
           nullptr});
      (d.kind == QueryKind::kReal ? traffic.real : traffic.fake) += 1;
    }
    if (plans_out != nullptr) plans_out->push_back(std::move(plan));
  }
  for (size_t m = 0; m < malicious_reals.size(); ++m) {
    Prng rng = epoch_rng.Fork("adversary", m);
    const uint32_t client = static_cast<uint32_t>(honest_reals.size() + m);
    for (size_t i = 0; i < malicious_reals[m].size(); ++i) {
      const uint32_t slot = static_cast<uint32_t>(rng.UniformBelow(config.slots));
      traffic.by_slot[slot].push_back(
          {client, static_cast<uint32_t>(i), slot, malicious_reals[m][i], nullptr});
      ++traffic.malicious;
    }
  }
  return traffic;
}

std::vector<AnonymizedRecord> Anonymize(const EpochTraffic& traffic, Anonymizer& anonymizer) {
  std::vector<AnonymizedRecord> out;
  for (const auto& batch : traffic.by_slot) {
    std::vector<AnonymizedRecord> records = anonymizer.Batch(batch);
    out.insert(out.end(), records.begin(), records.end());
  }
  return out;
}

Prng EpochRng(const EpochConfig& c, uint64_t epoch) {
  return Prng(c.seed, "psearch.simnet.epoch").Fork("epoch", epoch);
}

double NbPmf(const NBParams& nb, uint64_t k) {
  // boost counts failures before r successes with success probability 1-p.
  const boost::math::negative_binomial_distribution<double> dist(nb.r, 1 - nb.p);
  return boost::math::pdf(dist, static_cast<double>(k));
}

}  // namespace

// ------------------------------------------------------------------ config

void EpochConfig::Validate() const {
  PSEARCH_CHECK(slots >= 1, ValidationError, "slots must be >= 1");
  PSEARCH_CHECK(clusters >= 1, ValidationError, "clusters must be >= 1");
  PSEARCH_CHECK(max_queries >= 1 && max_queries <= clusters, ValidationError,
                "max_queries must lie in [1, clusters]");
  PSEARCH_CHECK(honest_clients + malicious_clients >= 1, ValidationError,
                "at least one client required");
  PSEARCH_CHECK(privacy.epsilon > 0 && privacy.epsilon < 1, ValidationError,
                "epsilon must lie in (0,1)");
  PSEARCH_CHECK(privacy.delta > 0 && privacy.delta < 1, ValidationError,
                "delta must lie in (0,1)");
  if (nb_override) {
    PSEARCH_CHECK(nb_override->r > 0 && nb_override->p >= 0 && nb_override->p < 1,
                  ValidationError, "noise override needs r > 0 and p in [0,1)");
  }
  if (!real_clusters.empty()) {
    PSEARCH_CHECK(real_clusters.size() == honest_clients, ValidationError,
                  "real_clusters needs one list per honest client");
    for (const auto& list : real_clusters) {
      PSEARCH_CHECK(list.size() <= max_queries, ValidationError,
                    "a client exceeds max_queries real queries");
      for (uint32_t c : list) {
        PSEARCH_CHECK(c < clusters, ValidationError, "real cluster out of range");
      }
    }
  }
  PSEARCH_CHECK(topk >= 1, ValidationError, "topk must be >= 1");
}

PrivacyParams EpochConfig::ResolvedPrivacy() const {
  PrivacyParams p = privacy;
  p.clusters = clusters;
  p.max_queries = max_queries;
  p.honest_clients = honest_clients;
  const size_t all = honest_clients + malicious_clients;
  p.honest_fraction = all == 0 ? 1.0 : static_cast<double>(honest_clients) / static_cast<double>(all);
  return p;
}

NBParams EpochConfig::Noise() const {
  if (nb_override) return *nb_override;
  const PrivacyParams p = ResolvedPrivacy();
  NBParams nb = nb_formula(p.epsilon, p.delta, p.max_queries, p.log_base);
  if (p.p_override) nb.p = *p.p_override;
  return nb;
}

NBParams EpochConfig::PerClientNoise() const {
  const NBParams nb = Noise();
  return honest_clients == 0 ? nb : nb.Shard(honest_clients);
}

std::string EpochConfig::ToJson() const {
  Json j;
  j["slots"] = slots;
  j["honest_clients"] = honest_clients;
  j["malicious_clients"] = malicious_clients;
  j["clusters"] = clusters;
  j["max_queries"] = max_queries;
  Json pj;
  pj["epsilon"] = privacy.epsilon;
  pj["delta"] = privacy.delta;
  pj["epochs"] = privacy.epochs;
  pj["log_base"] = privacy.log_base == LogBase::kBase2 ? "base2" : "natural";
  pj["p_override"] = privacy.p_override ? Json(*privacy.p_override) : Json(nullptr);
  j["privacy"] = pj;
  j["nb_override"] =
      nb_override ? Json{{"r", nb_override->r}, {"p", nb_override->p}} : Json(nullptr);
  j["placement"] = PlacementName(placement);
  j["mode"] = ModeName(mode);
  j["seed"] = seed;
  j["real_clusters"] = real_clusters;
  j["server"] = Json{{"metadata_threshold", server.metadata_threshold},
                     {"drop_l0", server.drop_l0},
                     {"drop_l1", server.drop_l1},
                     {"response_level", server.response_level},
                     {"cache_lifted", server.cache_lifted}};
  j["topk"] = topk;
  j["record_timing"] = record_timing;
  return j.dump(2);
}

EpochConfig EpochConfig::FromJson(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("epoch config is not valid JSON: ") + e.what());
  }
  RejectUnknown(j,
                {"slots", "honest_clients", "malicious_clients", "clusters", "max_queries",
                 "privacy", "nb_override", "placement", "mode", "seed", "real_clusters", "server",
                 "topk", "record_timing"},
                "epoch config");
  EpochConfig c;
  ReadIf(j, "slots", c.slots);
  ReadIf(j, "honest_clients", c.honest_clients);
  ReadIf(j, "malicious_clients", c.malicious_clients);
  ReadIf(j, "clusters", c.clusters);
  ReadIf(j, "max_queries", c.max_queries);
  ReadIf(j, "seed", c.seed);
  ReadIf(j, "real_clusters", c.real_clusters);
  ReadIf(j, "topk", c.topk);
  ReadIf(j, "record_timing", c.record_timing);
  if (j.contains("privacy")) {
    const Json& pj = j["privacy"];
    RejectUnknown(pj, {"epsilon", "delta", "epochs", "log_base", "p_override"}, "privacy");
    ReadIf(pj, "epsilon", c.privacy.epsilon);
    ReadIf(pj, "delta", c.privacy.delta);
    ReadIf(pj, "epochs", c.privacy.epochs);
    if (pj.contains("log_base")) {
      const std::string b = pj["log_base"].is_string() ? pj["log_base"].get<std::string>() : "";
      PSEARCH_CHECK(b == "base2" || b == "natural", ValidationError,
                    "log_base must be 'base2' or 'natural'");
      c.privacy.log_base = b == "base2" ? LogBase::kBase2 : LogBase::kNatural;
    }
    if (pj.contains("p_override") && !pj["p_override"].is_null()) {
      double p = 0;
      ReadIf(pj, "p_override", p);
      c.privacy.p_override = p;
    }
  }
  if (j.contains("nb_override") && !j["nb_override"].is_null()) {
    const Json& nj = j["nb_override"];
    RejectUnknown(nj, {"r", "p"}, "nb_override");
    NBParams nb;
    ReadIf(nj, "r", nb.r);
    ReadIf(nj, "p", nb.p);
    c.nb_override = nb;
  }
  if (j.contains("placement")) {
    const std::string p = j["placement"].is_string() ? j["placement"].get<std::string>() : "";
    PSEARCH_CHECK(p == "own_cluster" || p == "uniform", ValidationError,
                  "placement must be 'own_cluster' or 'uniform'");
    c.placement = p == "uniform" ? FakePlacement::kUniform : FakePlacement::kOwnCluster;
  }
  if (j.contains("mode")) {
    const std::string m = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
    PSEARCH_CHECK(m == "histogram" || m == "crypto", ValidationError,
                  "mode must be 'histogram' or 'crypto'");
    c.mode = m == "crypto" ? SimMode::kFullCrypto : SimMode::kHistogramOnly;
  }
  if (j.contains("server")) {
    const Json& sj = j["server"];
    RejectUnknown(sj, {"metadata_threshold", "drop_l0", "drop_l1", "response_level", "cache_lifted"},
                  "server");
    ReadIf(sj, "metadata_threshold", c.server.metadata_threshold);
    ReadIf(sj, "drop_l0", c.server.drop_l0);
    ReadIf(sj, "drop_l1", c.server.drop_l1);
    ReadIf(sj, "response_level", c.server.response_level);
    ReadIf(sj, "cache_lifted", c.server.cache_lifted);
  }
  c.Validate();
  return c;
}

std::vector<std::vector<uint32_t>> ResolveRealClusters(const EpochConfig& config) {
  if (!config.real_clusters.empty()) return config.real_clusters;
  std::vector<std::vector<uint32_t>> out(config.honest_clients);
  Prng root(config.seed, "psearch.simnet.reals");
  std::vector<uint32_t> ids(config.clusters);
  std::iota(ids.begin(), ids.end(), 0u);
  for (size_t u = 0; u < config.honest_clients; ++u) {
    Prng rng = root.Fork("client", u);
    std::vector<uint32_t> pool = ids;
    std::shuffle(pool.begin(), pool.end(), rng);
    out[u].assign(pool.begin(), pool.begin() + static_cast<ptrdiff_t>(config.max_queries));
  }
  return out;
}

std::vector<std::vector<uint32_t>> ResolveMaliciousClusters(const EpochConfig& config) {
  std::vector<std::vector<uint32_t>> out(config.malicious_clients);
  Prng root(config.seed, "psearch.simnet.adversary");
  for (size_t m = 0; m < config.malicious_clients; ++m) {
    Prng rng = root.Fork("client", m);
    for (size_t i = 0; i < config.max_queries; ++i) {
      out[m].push_back(static_cast<uint32_t>(rng.UniformBelow(config.clusters)));
    }
  }
  return out;
}

// -------------------------------------------------------------- anonymizer

std::vector<AnonymizedRecord> Anonymizer::Batch(const std::vector<Submission>& slot_batch) {
  std::vector<AnonymizedRecord> out;
  out.reserve(slot_batch.size());
  for (const Submission& s : slot_batch) {
    uint64_t token = 0;
    do {
      token = rng_();
    } while (routes_.count(token) != 0);
    routes_.emplace(token, std::make_pair(s.client, s.item));
    out.push_back({s.slot, s.cluster, token, s.payload});
  }
  std::shuffle(out.begin(), out.end(), rng_);
  return out;
}

std::pair<uint32_t, uint32_t> Anonymizer::Route(uint64_t route) const {
  const auto it = routes_.find(route);
  PSEARCH_CHECK(it != routes_.end(), UsageError, "unknown route token");
  return it->second;
}

EpochHistogram server_view(const std::vector<AnonymizedRecord>& records, size_t slots,
                           size_t clusters) {
  EpochHistogram h(slots, clusters);
  for (const AnonymizedRecord& r : records) {
    PSEARCH_CHECK(r.slot < slots && r.cluster < clusters, ValidationError,
                  "record outside the histogram");
    ++h.at(r.slot, r.cluster);
  }
  return h;
}

EpochHistogram simulate_view(const EpochConfig& config, uint64_t epoch) {
  config.Validate();
  const auto reals = ResolveRealClusters(config);
  const auto adversary = ResolveMaliciousClusters(config);
  Prng rng = EpochRng(config, epoch);
  const EpochTraffic traffic = BuildTraffic(config, reals, adversary, rng, nullptr);
  Anonymizer anonymizer(rng.Fork("anonymizer"));
  return server_view(Anonymize(traffic, anonymizer), config.slots, config.clusters);
}

// ------------------------------------------------------------------ epochs

EpochReport run_epoch(const EpochConfig& config, const CryptoWorld* world, uint64_t epoch) {
  config.Validate();
  EpochReport rep;
  rep.config_json = config.ToJson();
  rep.noise = config.Noise();
  rep.per_client_noise = config.PerClientNoise();
  if (config.honest_clients >= 2) {
    rep.audit = privacy_audit(config.ResolvedPrivacy(), std::nullopt, 0, 1, config.seed);
  }

  const bool crypto = config.mode == SimMode::kFullCrypto;
  std::vector<std::vector<uint32_t>> reals;
  if (crypto) {
    PSEARCH_CHECK(world != nullptr && world->db != nullptr && world->index != nullptr &&
                      world->residues != nullptr && world->client_queries != nullptr,
                  UsageError, "crypto mode needs a database, index, residues and client queries");
    PSEARCH_CHECK(world->index->centroids_only.num_clusters() == config.clusters, ValidationError,
                  "config clusters disagree with the database");
    PSEARCH_CHECK(world->client_queries->count() >= config.honest_clients, ValidationError,
                  "one query embedding per honest client required");
    if (world->truth != nullptr) {
      PSEARCH_CHECK(world->truth->size() >= config.honest_clients, ValidationError,
                    "one planted entry per honest client required");
    }
    if (!config.real_clusters.empty()) {
      reals = config.real_clusters;
    } else {
      for (size_t u = 0; u < config.honest_clients; ++u) {
        reals.push_back(nearest_centroids(world->client_queries->row(u),
                                          world->index->centroids_only, config.max_queries));
      }
    }
  } else {
    reals = ResolveRealClusters(config);
  }
  const auto adversary = ResolveMaliciousClusters(config);

  Prng rng = EpochRng(config, epoch);
  std::vector<QueryPlan> plans;
  EpochTraffic traffic = BuildTraffic(config, reals, adversary, rng, &plans);
  rep.real_queries = traffic.real;
  rep.fake_queries = traffic.fake;
  rep.malicious_queries = traffic.malicious;

  // Client-side encryption: queries[client][item], kept by the sender.
  std::vector<std::vector<ClientQuery>> queries;
  if (crypto) {
    const SearchParams& params = world->index->params;
    const size_t clients = config.honest_clients + config.malicious_clients;
    queries.resize(clients);
    for (size_t u = 0; u < config.honest_clients; ++u) {
      Prng qrng = rng.Fork("encrypt", u);
      const QueryPlan& plan = plans[u];
      for (size_t i = 0; i < plan.items.size(); ++i) {
        const QueryDescriptor& d = plan.items[i];
        const float* embedding =
            d.kind == QueryKind::kReal ? world->client_queries->row(u).data() : nullptr;
        const uint64_t plan_id = (static_cast<uint64_t>(u + 1) << 32) | i;
        ClientQuery q = make_search_query(params, *world->residues, d.cluster, embedding, plan_id, qrng);
        q.kind = d.kind;
        queries[u].push_back(std::move(q));
      }
    }
    for (size_t m = 0; m < config.malicious_clients; ++m) {
      const size_t client = config.honest_clients + m;
      Prng qrng = rng.Fork("encrypt", client);
      for (size_t i = 0; i < adversary[m].size(); ++i) {
        const uint64_t plan_id = (static_cast<uint64_t>(client + 1) << 32) | i;
        queries[client].push_back(
            make_search_query(params, *world->residues, adversary[m][i], nullptr, plan_id, qrng));
      }
    }
    for (auto& batch : traffic.by_slot) {
      for (Submission& s : batch) s.payload = &queries[s.client][s.item].query;
    }
  }

  Anonymizer anonymizer(rng.Fork("anonymizer"));
  const std::vector<AnonymizedRecord> records = Anonymize(traffic, anonymizer);
  rep.histogram = server_view(records, config.slots, config.clusters);
  if (!crypto) return rep;

  // Server loop in slot-then-permutation order; each query independent.
  const SearchServer server(*world->db, config.server);
  std::vector<std::vector<std::optional<SearchResponse>>> inbox(queries.size());
  for (size_t c = 0; c < queries.size(); ++c) inbox[c].resize(queries[c].size());
  for (const AnonymizedRecord& r : records) {
    const SearchQuery& q = *r.payload;
    rep.request_bytes += q.Bytes().size();
    for (const Ciphertext& ct : q.cts) rep.request_ct_bytes += ct.SerializedSize();
    rep.request_key_bytes += q.evk.SerializedSize();
    const auto start = std::chrono::steady_clock::now();
    SearchResponse resp = server.Compute(q);
    if (config.record_timing) {
      rep.server_ms.push_back(
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    rep.response_bytes += resp.SerializedSize();
    rep.ops += resp.stats.ops;
    ++rep.answered;
    const auto [client, item] = anonymizer.Route(r.route);
    inbox[client][item] = std::move(resp);
  }

  // Honest clients rank their real answers; fakes are dropped inside.
  double rr_sum = 0;
  for (size_t u = 0; u < config.honest_clients; ++u) {
    std::vector<SearchResponse> responses;
    for (auto& r : inbox[u]) {
      PSEARCH_CHECK(r.has_value(), RuntimeFailure, "a response was not routed back");
      responses.push_back(std::move(*r));
    }
    if (world->truth == nullptr) continue;
    const std::vector<ScoredEntry> ranked = decrypt_and_rank(
        responses, queries[u], *world->index, *world->residues, config.topk);
    const uint32_t truth = (*world->truth)[u];
    rr_sum += mrr_at_100({ranked}, truth);
    if (!ranked.empty() && ranked.front().entry == truth) ++rep.planted_top1;
    ++rep.clients_ranked;
  }
  if (rep.clients_ranked > 0) rep.mrr_at_100 = rr_sum / static_cast<double>(rep.clients_ranked);
  return rep;
}

std::string EpochReport::ToJson() const {
  Json j;
  j["config"] = Json::parse(config_json);
  j["slots"] = histogram.slots;
  j["clusters"] = histogram.clusters;
  Json rows = Json::array();
  for (size_t s = 0; s < histogram.slots; ++s) {
    std::vector<uint64_t> row(histogram.counts.begin() + static_cast<ptrdiff_t>(s * histogram.clusters),
                              histogram.counts.begin() + static_cast<ptrdiff_t>((s + 1) * histogram.clusters));
    rows.push_back(row);
  }
  j["histogram"] = rows;
  j["cluster_totals"] = histogram.totals();
  j["queries"] = {{"real", real_queries},
                  {"fake", fake_queries},
                  {"malicious", malicious_queries},
                  {"total", histogram.total()}};
  j["noise"] = {{"r", noise.r}, {"p", noise.p}, {"mean", noise.mean()}};
  j["per_client_noise"] = {{"r", per_client_noise.r}, {"p", per_client_noise.p}};
  const double per = answered == 0 ? 0.0 : 1.0 / static_cast<double>(answered);
  j["bandwidth"] = {{"answered", answered},
                    {"request_bytes", request_bytes},
                    {"request_ct_bytes", request_ct_bytes},
                    {"request_key_bytes", request_key_bytes},
                    {"response_bytes", response_bytes},
                    {"request_bytes_per_query", static_cast<double>(request_bytes) * per},
                    {"response_bytes_per_query", static_cast<double>(response_bytes) * per}};
  j["ops"] = OpsJson(ops);
  if (!server_ms.empty()) j["server_ms"] = server_ms;
  j["correctness"] = {{"clients_ranked", clients_ranked},
                      {"planted_top1", planted_top1},
                      {"mrr_at_100", mrr_at_100}};
  j["audit"] = audit ? Json::parse(audit->ToJson()) : Json(nullptr);
  return j.dump(2);
}

std::string EpochReport::HistogramCsv() const {
  std::ostringstream out;
  out << "slot,cluster,count\n";
  for (size_t s = 0; s < histogram.slots; ++s) {
    for (size_t k = 0; k < histogram.clusters; ++k) {
      out << s << ',' << k << ',' << histogram.at(s, k) << '\n';
    }
  }
  return out.str();
}

// ------------------------------------------------------------- statistics

CuratorCheckResult curator_equivalence_check(const EpochConfig& config, size_t epochs) {
  config.Validate();
  PSEARCH_CHECK(epochs >= 1, ValidationError, "at least one epoch required");
  PSEARCH_CHECK(config.honest_clients >= 1, ValidationError,
                "the curator comparison needs honest clients");
  CuratorCheckResult res;
  res.epochs = epochs;

  auto all_reals = ResolveRealClusters(config);
  const auto adversary = ResolveMaliciousClusters(config);
  all_reals.insert(all_reals.end(), adversary.begin(), adversary.end());
  std::vector<uint64_t> real_totals(config.clusters, 0);
  for (const auto& list : all_reals) {
    for (uint32_t c : list) ++real_totals[c];
  }
  const NBParams nb = config.Noise();

  std::vector<std::vector<uint64_t>> protocol, curator;
  protocol.reserve(epochs);
  curator.reserve(epochs);
  std::map<std::vector<uint64_t>, uint64_t> counts;
  std::vector<uint64_t> per_slot(config.slots, 0);
  Prng curator_rng(config.seed, "psearch.simnet.curator");
  for (size_t e = 0; e < epochs; ++e) {
    const EpochHistogram h = simulate_view(config, e);
    std::vector<uint64_t> totals = h.totals();
    for (size_t s = 0; s < h.slots; ++s) {
      for (size_t k = 0; k < h.clusters; ++k) per_slot[s] += h.at(s, k);
    }
    ++counts[totals];
    protocol.push_back(std::move(totals));
    curator.push_back(
        central_curator(all_reals, nb, config.clusters, config.max_queries, curator_rng).totals);
  }

  // Observed outcomes contribute |p_hat - p|; unobserved ones their mass.
  double abs_sum = 0, observed_mass = 0;
  for (const auto& [totals, n] : counts) {
    double prob = 1;
    for (size_t k = 0; k < totals.size(); ++k) {
      prob *= totals[k] < real_totals[k] ? 0.0 : NbPmf(nb, totals[k] - real_totals[k]);
    }
    observed_mass += prob;
    abs_sum += std::abs(static_cast<double>(n) / static_cast<double>(epochs) - prob);
  }
  res.tv_totals_exact = 0.5 * abs_sum + 0.5 * std::max(0.0, 1.0 - observed_mass);
  res.tv_totals_curator = empirical_tv(protocol, curator);

  const uint64_t all = std::accumulate(per_slot.begin(), per_slot.end(), uint64_t{0});
  if (config.slots >= 2 && all > 0) {
    const double expected = static_cast<double>(all) / static_cast<double>(config.slots);
    double chi2 = 0;
    for (uint64_t c : per_slot) chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    const boost::math::chi_squared_distribution<double> dist(static_cast<double>(config.slots - 1));
    res.slot_uniform_p = boost::math::cdf(boost::math::complement(dist, chi2));
  }
  return res;
}

DistinguisherReport dp_distinguisher_test(const EpochConfig& config, uint32_t from, uint32_t to,
                                          size_t trials, size_t min_count) {
  config.Validate();
  PSEARCH_CHECK(config.mode == SimMode::kHistogramOnly, ValidationError,
                "the distinguisher runs in histogram-only mode");
  PSEARCH_CHECK(from < config.clusters && to < config.clusters, ValidationError,
                "cluster out of range");
  PSEARCH_CHECK(trials >= 1, ValidationError, "at least one trial required");

  // Neighbouring inputs differ only in client 0's real list.
  const std::vector<uint32_t> moved_from(config.max_queries, from), moved_to(config.max_queries, to);
  EpochConfig x = config, x_prime = config;
  if (config.honest_clients > 0) {
    x.real_clusters = ResolveRealClusters(config);
    x_prime.real_clusters = x.real_clusters;
    x.real_clusters[0] = moved_from;
    x_prime.real_clusters[0] = moved_to;
  }
  auto adversary = ResolveMaliciousClusters(config);
  const auto run = [&](const EpochConfig& c, bool neighbour, uint64_t trial) {
    if (c.honest_clients > 0) return simulate_view(c, trial);
    auto adv = adversary;
    adv[0] = neighbour ? moved_to : moved_from;
    Prng rng = EpochRng(c, trial);
    const EpochTraffic traffic = BuildTraffic(c, {}, adv, rng, nullptr);
    Anonymizer anonymizer(rng.Fork("anonymizer"));
    return server_view(Anonymize(traffic, anonymizer), c.slots, c.clusters);
  };

  std::map<std::pair<uint64_t, uint64_t>, std::pair<uint64_t, uint64_t>> outcomes;
  for (size_t t = 0; t < trials; ++t) {
    const std::vector<uint64_t> a = run(x, false, t).totals();
    const std::vector<uint64_t> b = run(x_prime, true, t).totals();
    ++outcomes[{a[from], a[to]}].first;
    ++outcomes[{b[from], b[to]}].second;
  }

  DistinguisherReport rep;
  rep.trials = trials;
  rep.from_cluster = from;
  rep.to_cluster = to;
  const PrivacyParams pp = config.ResolvedPrivacy();
  const NBParams nb = config.Noise();
  const double mech_eps = nb.p > 0 ? -5.0 * static_cast<double>(config.max_queries) * std::log(nb.p)
                                   : std::numeric_limits<double>::infinity();
  rep.epsilon_bound = 2 * mech_eps;
  rep.delta_bound = 2 * static_cast<double>(config.max_queries) * pp.delta;
  const double n = static_cast<double>(trials);
  double tv = 0;
  for (const auto& [key, c] : outcomes) {
    LossPoint pt{key.first, key.second, c.first, c.second, 0};
    tv += std::abs(static_cast<double>(c.first) - static_cast<double>(c.second)) / n;
    if (c.first == 0 || c.second == 0) {
      rep.unmatched_mass += static_cast<double>(c.first + c.second) / (2 * n);
    } else {
      pt.log_ratio = std::log(static_cast<double>(c.first) / static_cast<double>(c.second));
      if (c.first >= min_count && c.second >= min_count) {
        rep.testable = true;
        const double se = std::sqrt(1.0 / static_cast<double>(c.first) + 1.0 / static_cast<double>(c.second));
        const double loss = std::abs(pt.log_ratio);
        if (loss > rep.epsilon_hat) {
          rep.epsilon_hat = loss;
          rep.slack = 3 * se;
        }
        if (loss - 3 * se > rep.epsilon_bound) rep.within_envelope = false;
      }
    }
    rep.curve.push_back(pt);
  }
  rep.advantage = 0.5 * tv;
  return rep;
}

}  // namespace psearch
