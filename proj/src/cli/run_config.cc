// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/cli/run_config.h"

#include <functional>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "psearch/common/bytes.h"
#include "psearch/common/error.h"

namespace psearch {

namespace {

using Json = nlohmann::ordered_json;

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

std::string ReadEnum(const Json& j, const char* key, const std::set<std::string>& allowed,
                     const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  const std::string s = v.is_string() ? v.get<std::string>() : "";
  PSEARCH_CHECK(allowed.count(s) != 0, ValidationError,
                std::string("bad value for '") + key + "'");
  return s;
}

// Patches the defaults' own document so partial blocks keep other fields.
Json Patched(const std::string& defaults, const Json& user) {
  Json base = Json::parse(defaults);
  base.merge_patch(user);
  return base;
}

void Collect(std::vector<std::string>& errors, const std::function<void()>& check) {
  try {
    check();
  } catch (const ValidationError& e) {
    errors.emplace_back(e.what());
  }
}

}  // namespace

PirParams PirConfig::ToParams() const {
  PirParams p;
  p.gamma = gamma;
  p.drop_l0 = drop_l0;
  p.drop_l1 = drop_l1;
  p.response_level = response_level;
  p.keys = keys;
  p.linearize = linearize;
  p.lazy_rescale = lazy_rescale;
  return p;
}

void RunConfig::Validate() const {
  std::vector<std::string> errors;
  Collect(errors, [&] { PSEARCH_CHECK(threads >= 1, ValidationError, "threads must be >= 1"); });
  Collect(errors, [&] { search.Validate(); });
  Collect(errors, [&] {
    PSEARCH_CHECK(clusters >= 1, ValidationError, "clusters must be >= 1");
    PSEARCH_CHECK(probes >= 1 && probes <= clusters, ValidationError,
                  "probes must lie in [1, clusters]");
  });
  Collect(errors, [&] { PSEARCH_CHECK(topk >= 1, ValidationError, "topk must be >= 1"); });
  Collect(errors, [&] {
    PSEARCH_CHECK(corpus.spec.dim == search.fixed_point.dim, ValidationError,
                  "corpus dim must equal the search dim");
    PSEARCH_CHECK(corpus.spec.entries >= 1 && corpus.spec.blobs >= 1, ValidationError,
                  "corpus needs entries and blobs");
  });
  Collect(errors, [&] {
    // Server drop bits against the limb the response is reduced to.
    PSEARCH_CHECK(server.response_level >= 1 && server.response_level <= search.she.q.size(),
                  ValidationError, "server response_level out of range");
    for (size_t r = 0; r < search.plaintext_moduli.size(); ++r) {
      const BfvContext ctx(search.ResidueParams(r));
      const Evaluator ev(ctx);
      PSEARCH_CHECK(ev.DropAllowed(ctx.q_limbs()[0].value(), server.drop_l0, server.drop_l1),
                    ValidationError, "server drop_l0/drop_l1 exceed the noise margin");
    }
  });
  Collect(errors, [&] {
    const PirParams p = pir.ToParams();
    p.Validate();
    const BfvContext ctx(p.she);
    const Evaluator ev(ctx);
    PSEARCH_CHECK(ev.DropAllowed(ctx.q_limbs()[0].value(), p.drop_l0, p.drop_l1), ValidationError,
                  "pir drop_l0/drop_l1 exceed the noise margin");
    PSEARCH_CHECK(pir.cuckoo.expansion >= 1.5, ValidationError, "cuckoo expansion must be >= 1.5");
  });
  Collect(errors, [&] { privacy.Validate(); });
  Collect(errors, [&] {
    PSEARCH_CHECK(audit_shards >= 1, ValidationError, "audit_shards must be >= 1");
    if (stated_total_delta) {
      PSEARCH_CHECK(*stated_total_delta > 0 && *stated_total_delta < 1, ValidationError,
                    "stated_total_delta must lie in (0,1)");
    }
  });
  Collect(errors, [&] { epoch.Validate(); });
  Collect(errors, [&] {
    PSEARCH_CHECK(bench_iterations >= 1, ValidationError, "bench_iterations must be >= 1");
  });
  if (!errors.empty()) {
    std::string all = "invalid config:";
    for (const std::string& e : errors) all += "\n  - " + e;
    throw ValidationError(all);
  }
}

std::string RunConfig::ToJson() const {
  Json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["search"] = Json::parse(search.ToJson());
  j["clusters"] = clusters;
  j["probes"] = probes;
  j["kmeans_iters"] = kmeans_iters;
  j["topk"] = topk;
  j["server"] = Json{{"metadata_threshold", server.metadata_threshold},
                     {"drop_l0", server.drop_l0},
                     {"drop_l1", server.drop_l1},
                     {"response_level", server.response_level},
                     {"cache_lifted", server.cache_lifted}};
  j["pir"] = Json{{"gamma", pir.gamma},
                  {"drop_l0", pir.drop_l0},
                  {"drop_l1", pir.drop_l1},
                  {"response_level", pir.response_level},
                  {"keys", pir.keys == ExpansionKeys::kReduced ? "reduced" : "per_level"},
                  {"linearize", pir.linearize},
                  {"lazy_rescale", pir.lazy_rescale},
                  {"cuckoo",
                   {{"mode", pir.cuckoo.mode == CuckooMode::kTwoHash ? "two_hash" : "one_hash_split"},
                    {"expansion", pir.cuckoo.expansion},
                    {"split_capacity", pir.cuckoo.split_capacity},
                    {"max_kicks", pir.cuckoo.max_kicks},
                    {"max_retries", pir.cuckoo.max_retries}}}};
  j["privacy"] = Json{{"epsilon", privacy.epsilon},
                      {"delta", privacy.delta},
                      {"max_queries", privacy.max_queries},
                      {"honest_clients", privacy.honest_clients},
                      {"clusters", privacy.clusters},
                      {"epochs", privacy.epochs},
                      {"honest_fraction", privacy.honest_fraction},
                      {"log_base", privacy.log_base == LogBase::kBase2 ? "base2" : "natural"},
                      {"p_override", privacy.p_override ? Json(*privacy.p_override) : Json(nullptr)}};
  j["stated_total_delta"] = stated_total_delta ? Json(*stated_total_delta) : Json(nullptr);
  j["audit_draws"] = audit_draws;
  j["audit_shards"] = audit_shards;
  j["epoch"] = Json::parse(epoch.ToJson());
  j["corpus"] = Json{{"entries", corpus.spec.entries},
                     {"dim", corpus.spec.dim},
                     {"blobs", corpus.spec.blobs},
                     {"queries", corpus.spec.queries},
                     {"blob_spread", corpus.spec.blob_spread},
                     {"query_noise", corpus.spec.query_noise},
                     {"seed", corpus.spec.seed},
                     {"metadata_bytes", corpus.metadata_bytes}};
  j["bench_iterations"] = bench_iterations;
  return j.dump(2);
}

RunConfig RunConfig::FromJson(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RejectUnknown(j,
                {"seed", "threads", "search", "clusters", "probes", "kmeans_iters", "topk", "server",
                 "pir", "privacy", "stated_total_delta", "audit_draws", "audit_shards", "epoch",
                 "corpus", "bench_iterations"},
                "config");
  RunConfig c;
  ReadIf(j, "seed", c.seed);
  ReadIf(j, "threads", c.threads);
  ReadIf(j, "clusters", c.clusters);
  ReadIf(j, "probes", c.probes);
  ReadIf(j, "kmeans_iters", c.kmeans_iters);
  ReadIf(j, "topk", c.topk);
  ReadIf(j, "audit_draws", c.audit_draws);
  ReadIf(j, "audit_shards", c.audit_shards);
  ReadIf(j, "bench_iterations", c.bench_iterations);
  if (j.contains("search")) {
    RejectUnknown(j["search"], {"n", "q", "aux", "sigma", "max_lazy_terms", "plaintext_moduli", "scale", "dim"},
                  "search");
    c.search = SearchParams::FromJson(Patched(c.search.ToJson(), j["search"]).dump());
  }
  if (j.contains("server")) {
    const Json& s = j["server"];
    RejectUnknown(s, {"metadata_threshold", "drop_l0", "drop_l1", "response_level", "cache_lifted"},
                  "server");
    ReadIf(s, "metadata_threshold", c.server.metadata_threshold);
    ReadIf(s, "drop_l0", c.server.drop_l0);
    ReadIf(s, "drop_l1", c.server.drop_l1);
    ReadIf(s, "response_level", c.server.response_level);
    ReadIf(s, "cache_lifted", c.server.cache_lifted);
  }
  if (j.contains("pir")) {
    const Json& p = j["pir"];
    RejectUnknown(p, {"gamma", "drop_l0", "drop_l1", "response_level", "keys", "linearize",
                      "lazy_rescale", "cuckoo"},
                  "pir");
    ReadIf(p, "gamma", c.pir.gamma);
    ReadIf(p, "drop_l0", c.pir.drop_l0);
    ReadIf(p, "drop_l1", c.pir.drop_l1);
    ReadIf(p, "response_level", c.pir.response_level);
    c.pir.keys = ReadEnum(p, "keys", {"reduced", "per_level"}, "reduced") == "reduced"
                     ? ExpansionKeys::kReduced
                     : ExpansionKeys::kPerLevel;
    ReadIf(p, "linearize", c.pir.linearize);
    ReadIf(p, "lazy_rescale", c.pir.lazy_rescale);
    if (p.contains("cuckoo")) {
      const Json& k = p["cuckoo"];
      RejectUnknown(k, {"mode", "expansion", "split_capacity", "max_kicks", "max_retries"},
                    "pir.cuckoo");
      c.pir.cuckoo.mode = ReadEnum(k, "mode", {"two_hash", "one_hash_split"}, "two_hash") == "two_hash"
                              ? CuckooMode::kTwoHash
                              : CuckooMode::kOneHashSplit;
      ReadIf(k, "expansion", c.pir.cuckoo.expansion);
      ReadIf(k, "split_capacity", c.pir.cuckoo.split_capacity);
      ReadIf(k, "max_kicks", c.pir.cuckoo.max_kicks);
      ReadIf(k, "max_retries", c.pir.cuckoo.max_retries);
    }
  }
  if (j.contains("privacy")) {
    const Json& p = j["privacy"];
    RejectUnknown(p, {"epsilon", "delta", "max_queries", "honest_clients", "clusters", "epochs",
                      "honest_fraction", "log_base", "p_override"},
                  "privacy");
    ReadIf(p, "epsilon", c.privacy.epsilon);
    ReadIf(p, "delta", c.privacy.delta);
    ReadIf(p, "max_queries", c.privacy.max_queries);
    ReadIf(p, "honest_clients", c.privacy.honest_clients);
    ReadIf(p, "clusters", c.privacy.clusters);
    ReadIf(p, "epochs", c.privacy.epochs);
    ReadIf(p, "honest_fraction", c.privacy.honest_fraction);
    c.privacy.log_base = ReadEnum(p, "log_base", {"base2", "natural"}, "base2") == "base2"
                             ? LogBase::kBase2
                             : LogBase::kNatural;
    if (p.contains("p_override")) {
      if (p["p_override"].is_null()) {
        c.privacy.p_override.reset();
      } else {
        double v = 0;
        ReadIf(p, "p_override", v);
        c.privacy.p_override = v;
      }
    }
  }
  if (j.contains("stated_total_delta")) {
    if (j["stated_total_delta"].is_null()) {
      c.stated_total_delta.reset();
    } else {
      double v = 0;
      ReadIf(j, "stated_total_delta", v);
      c.stated_total_delta = v;
    }
  }
  if (j.contains("epoch")) {
    RejectUnknown(j["epoch"],
                  {"slots", "honest_clients", "malicious_clients", "clusters", "max_queries",
                   "privacy", "nb_override", "placement", "mode", "seed", "real_clusters", "server",
                   "topk", "record_timing"},
                  "epoch");
    c.epoch = EpochConfig::FromJson(j["epoch"].dump());
  }
  if (j.contains("corpus")) {
    const Json& s = j["corpus"];
    RejectUnknown(s, {"entries", "dim", "blobs", "queries", "blob_spread", "query_noise", "seed",
                      "metadata_bytes"},
                  "corpus");
    ReadIf(s, "entries", c.corpus.spec.entries);
    ReadIf(s, "dim", c.corpus.spec.dim);
    ReadIf(s, "blobs", c.corpus.spec.blobs);
    ReadIf(s, "queries", c.corpus.spec.queries);
    ReadIf(s, "blob_spread", c.corpus.spec.blob_spread);
    ReadIf(s, "query_noise", c.corpus.spec.query_noise);
    ReadIf(s, "seed", c.corpus.spec.seed);
    ReadIf(s, "metadata_bytes", c.corpus.metadata_bytes);
  }
  c.Validate();
  return c;
}

RunConfig RunConfig::Load(const std::string& path) {
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  return FromJson(std::string(bytes.begin(), bytes.end()));
}

}  // namespace psearch
