// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/cli/commands.h"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "psearch/common/bytes.h"
#include "psearch/common/error.h"

namespace psearch {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void WriteText(const std::string& path, const std::string& text) {
  WriteFileBytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

std::vector<uint8_t> EntryKeyword(uint32_t entry) {
  return {static_cast<uint8_t>(entry), static_cast<uint8_t>(entry >> 8),
          static_cast<uint8_t>(entry >> 16), static_cast<uint8_t>(entry >> 24)};
}

// Deterministic per-entry metadata standing in for document payloads.
std::vector<std::vector<uint8_t>> SyntheticMetadata(size_t entries, size_t bytes, uint64_t seed) {
  std::vector<std::vector<uint8_t>> out(entries);
  if (bytes == 0) return out;
  const Prng root(seed, "psearch.cli.metadata");
  for (size_t i = 0; i < entries; ++i) {
    Prng rng = root.Fork("entry", i);
    out[i].resize(bytes);
    rng.Fill(out[i].data(), bytes);
  }
  return out;
}

bool NeedsPir(const EncodedDatabase& db, const ServerOptions& server) {
  for (uint32_t k = 0; k < db.codebook.num_clusters(); ++k) {
    if (db.MaxMetadataSize(k) > server.metadata_threshold) return true;
  }
  return false;
}

Json OpsJson(const OpCounts& o) {
  return Json{{"ct_adds", o.ct_adds},
              {"pt_adds", o.pt_adds},
              {"pt_mults", o.pt_mults},
              {"rotations", o.rotations},
              {"substitutions", o.substitutions},
              {"key_switches", o.key_switches},
              {"tensors", o.tensors},
              {"rescales", o.rescales},
              {"relinearizations", o.relinearizations},
              {"mod_switches", o.mod_switches}};
}

Embeddings LoadChecked(const std::string& path, size_t dim) {
  Embeddings e = LoadEmbeddings(path);
  PSEARCH_CHECK(e.dim == dim, ValidationError,
                "embedding dim " + std::to_string(e.dim) + " does not match the configured " +
                    std::to_string(dim));
  PSEARCH_CHECK(e.count() >= 1, ValidationError, "embedding file holds no rows");
  return e;
}

}  // namespace

CommandOutput cmd_gen(const RunConfig& config, const std::string& out_dir) {
  config.Validate();
  const SyntheticCorpus corpus = GenerateCorpus(config.corpus.spec);
  fs::create_directories(out_dir);
  SaveEmbeddings(out_dir + "/entries.wemb", corpus.entries);
  SaveEmbeddings(out_dir + "/queries.wemb", corpus.queries);
  WriteText(out_dir + "/truth.json", Json(corpus.truth).dump() + "\n");
  Json j;
  j["config"] = Json::parse(config.ToJson());
  j["entries"] = corpus.entries.count();
  j["queries"] = corpus.queries.count();
  j["dim"] = corpus.entries.dim;
  j["files"] = {"entries.wemb", "queries.wemb", "truth.json"};
  const std::string json = j.dump(2) + "\n";
  WriteText(out_dir + "/corpus.json", json);
  std::ostringstream text;
  text << "generated " << corpus.entries.count() << " entries and " << corpus.queries.count()
       << " queries (dim " << corpus.entries.dim << ") in " << out_dir << "\n";
  return {json, text.str(), ""};
}

CommandOutput cmd_init(const RunConfig& config, const std::string& embeddings_path,
                       const std::string& out_dir) {
  config.Validate();
  Embeddings entries = embeddings_path.empty()
                           ? GenerateCorpus(config.corpus.spec).entries
                           : LoadChecked(embeddings_path, config.search.fixed_point.dim);
  NormalizeRows(entries);
  PSEARCH_CHECK(config.clusters <= entries.count(), ValidationError,
                "more clusters than entries");
  auto metadata = SyntheticMetadata(entries.count(), config.corpus.metadata_bytes, config.seed);
  const EncodedDatabase db =
      server_init(entries, metadata, config.clusters, config.search, config.seed, config.kmeans_iters);
  fs::create_directories(out_dir);
  db.Save(out_dir);

  Json j;
  j["config"] = Json::parse(config.ToJson());
  j["entries"] = db.num_entries();
  j["clusters"] = db.codebook.num_clusters();
  std::vector<size_t> sizes, blocks;
  for (const ClusterCube& cube : db.cubes) {
    sizes.push_back(cube.entry_count());
    blocks.push_back(cube.blocks.size());
  }
  j["cluster_sizes"] = sizes;
  j["cluster_blocks"] = blocks;
  if (NeedsPir(db, config.server)) {
    std::vector<CuckooItem> items;
    for (uint32_t e = 0; e < db.num_entries(); ++e) items.push_back({EntryKeyword(e), db.metadata[e]});
    const CuckooTable table = build_cuckoo(items, config.seed, config.pir.cuckoo);
    table.Save(out_dir + "/cuckoo.bin");
    j["cuckoo"] = {{"items", table.item_count},
                   {"buckets_per_table", table.info.buckets_per_table},
                   {"attempts", table.attempts},
                   {"max_bucket_bytes", table.MaxBucketBytes()}};
  } else {
    fs::remove(out_dir + "/cuckoo.bin");
    j["cuckoo"] = nullptr;
  }
  WriteText(out_dir + "/config.json", config.ToJson() + "\n");

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name != "manifest.json") names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  Json files = Json::object();
  for (const std::string& n : names) files[n] = fs::file_size(out_dir + "/" + n);
  j["files"] = files;
  const std::string json = j.dump(2) + "\n";
  WriteText(out_dir + "/manifest.json", json);

  std::ostringstream text;
  text << "encoded " << db.num_entries() << " entries into " << db.codebook.num_clusters()
       << " clusters at " << out_dir << "\n"
       << "metadata: " << (j["cuckoo"].is_null() ? "inline" : "cuckoo tables for PIR") << "\n";
  return {json, text.str(), ""};
}

CommandOutput cmd_query(const RunConfig& config, const std::string& index_dir,
                        const std::string& query_path, size_t row, const std::string& dump_dir) {
  config.Validate();
  PSEARCH_CHECK(fs::exists(index_dir + "/params.json"), UsageError,
                "no index at " + index_dir + " (run init first)");
  const EncodedDatabase db = EncodedDatabase::Load(index_dir);
  const size_t k = db.codebook.num_clusters();
  PSEARCH_CHECK(config.probes <= k, ValidationError,
                "probes (" + std::to_string(config.probes) + ") exceed the cluster count " +
                    std::to_string(k));
  Embeddings queries = LoadChecked(query_path, db.params.fixed_point.dim);
  PSEARCH_CHECK(row < queries.count(), ValidationError, "query row out of range");
  NormalizeInPlace(queries.row(row));
  const std::span<const float> query = queries.row(row);

  const ResidueContexts residues(db.params);
  const ClientIndex index = ClientIndex::FromDatabase(db);
  const SearchServer server(db, config.server);
  const std::vector<uint32_t> probes = nearest_centroids(query, index.centroids_only, config.probes);
  if (!dump_dir.empty()) fs::create_directories(dump_dir);

  Prng rng(config.seed, "psearch.cli.query");
  std::vector<ClientQuery> sent;
  std::vector<SearchResponse> received;
  uint64_t req_ct = 0, req_key = 0, req_total = 0, resp_ct = 0, resp_total = 0, resp_meta = 0;
  OpCounts ops;
  for (size_t i = 0; i < probes.size(); ++i) {
    ClientQuery q = make_search_query(db.params, residues, probes[i], query.data(), i, rng);
    const std::vector<uint8_t> wire = q.query.Bytes();
    for (const Ciphertext& ct : q.query.cts) req_ct += ct.SerializedSize();
    req_key += q.query.evk.SerializedSize();
    req_total += wire.size();

    ByteReader reader(wire);
    const SearchQuery at_server = SearchQuery::Deserialize(reader);
    const SearchResponse resp = server.Compute(at_server);
    ops += resp.stats.ops;
    ByteWriter w;
    resp.Serialize(w);
    const std::vector<uint8_t>& resp_wire = w.bytes();
    resp_total += resp_wire.size();
    ByteReader rr(resp_wire);
    SearchResponse back = SearchResponse::Deserialize(rr);
    resp_ct += back.CiphertextBytes();
    resp_meta += back.metadata.size();
    if (!dump_dir.empty()) {
      WriteFileBytes(dump_dir + "/request_" + std::to_string(i) + ".bin", wire);
      WriteFileBytes(dump_dir + "/response_" + std::to_string(i) + ".bin", resp_wire);
    }
    sent.push_back(std::move(q));
    received.push_back(std::move(back));
  }
  const std::vector<ScoredEntry> ranked =
      decrypt_and_rank(received, sent, index, residues, config.topk);

  Json j;
  j["config"] = Json::parse(config.ToJson());
  j["index"] = index_dir;
  j["query_row"] = row;
  j["probed_clusters"] = probes;
  Json results = Json::array();
  for (const ScoredEntry& e : ranked) results.push_back({{"entry", e.entry}, {"score", e.score}});
  j["results"] = results;
  j["bandwidth"] = {{"request_ciphertext_bytes", req_ct},
                    {"request_key_bytes", req_key},
                    {"request_bytes", req_total},
                    {"response_ciphertext_bytes", resp_ct},
                    {"response_metadata_bytes", resp_meta},
                    {"response_bytes", resp_total}};
  j["server_ops"] = OpsJson(ops);

  // Metadata over the inline threshold comes back by keyword PIR.
  const bool has_cuckoo = fs::exists(index_dir + "/cuckoo.bin");
  if (has_cuckoo && !ranked.empty()) {
    const PirServer pir(CuckooTable::Load(index_dir + "/cuckoo.bin"), config.pir.ToParams());
    Prng pir_rng(config.seed, "psearch.cli.pir");
    const KeywordFetchResult fetched = keyword_fetch(EntryKeyword(ranked.front().entry), pir, pir_rng);
    j["metadata_fetch"] = {{"entry", ranked.front().entry},
                           {"found", fetched.value.has_value()},
                           {"value_bytes", fetched.value ? fetched.value->size() : 0},
                           {"pir_queries", fetched.queries},
                           {"request_bytes", fetched.request_bytes},
                           {"response_bytes", fetched.response_bytes},
                           {"reliable", fetched.reliable}};
  } else {
    j["metadata_fetch"] = nullptr;
  }
  const std::string json = j.dump(2) + "\n";

  std::ostringstream text;
  text << "probed clusters:";
  for (uint32_t c : probes) text << ' ' << c;
  text << "\nrequest: " << req_total << " bytes (" << req_ct << " ciphertext, " << req_key
       << " evaluation keys)\nresponse: " << resp_total << " bytes (" << resp_ct
       << " ciphertext, " << resp_meta << " metadata)\ntop results:\n";
  for (size_t i = 0; i < std::min<size_t>(ranked.size(), 10); ++i) {
    text << "  " << i + 1 << ". entry " << ranked[i].entry << " score " << ranked[i].score << "\n";
  }
  if (!j["metadata_fetch"].is_null()) {
    text << "metadata for entry " << ranked.front().entry << ": "
         << (j["metadata_fetch"]["found"].get<bool>() ? "found" : "missing") << " via "
         << j["metadata_fetch"]["pir_queries"].get<size_t>() << " PIR queries\n";
  }
  return {json, text.str(), ""};
}

CommandOutput cmd_epoch(const RunConfig& config, const std::string& index_dir,
                        const std::string& queries_path, const std::string& truth_path) {
  config.Validate();
  EpochReport report;
  if (config.epoch.mode == SimMode::kFullCrypto) {
    PSEARCH_CHECK(!index_dir.empty() && !queries_path.empty(), UsageError,
                  "crypto epochs need --index and --queries");
    const EncodedDatabase db = EncodedDatabase::Load(index_dir);
    const ClientIndex index = ClientIndex::FromDatabase(db);
    const ResidueContexts residues(db.params);
    Embeddings queries = LoadChecked(queries_path, db.params.fixed_point.dim);
    NormalizeRows(queries);
    std::vector<uint32_t> truth;
    if (!truth_path.empty()) {
      const auto bytes = ReadFileBytes(truth_path);
      try {
        truth = Json::parse(bytes.begin(), bytes.end()).get<std::vector<uint32_t>>();
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("truth file: ") + e.what());
      }
    }
    const CryptoWorld world{&db, &index, &residues, &queries, truth_path.empty() ? nullptr : &truth};
    report = run_epoch(config.epoch, &world);
  } else {
    report = run_epoch(config.epoch);
  }
  Json j = Json::parse(report.ToJson());
  j["run_config"] = Json::parse(config.ToJson());
  const std::string json = j.dump(2) + "\n";
  std::ostringstream text;
  text << "epoch: " << report.histogram.slots << " slots, " << report.histogram.clusters
       << " clusters\nqueries: " << report.real_queries << " real, " << report.fake_queries
       << " fake, " << report.malicious_queries << " malicious\ncluster totals:";
  for (uint64_t t : report.histogram.totals()) text << ' ' << t;
  text << "\n";
  if (report.answered > 0) {
    text << "answered " << report.answered << " queries; request " << report.request_bytes
         << " bytes, response " << report.response_bytes << " bytes\n";
  }
  if (report.clients_ranked > 0) text << "MRR@100 " << report.mrr_at_100 << "\n";
  return {json, text.str(), report.HistogramCsv()};
}

CommandOutput cmd_audit(const RunConfig& config) {
  config.Validate();
  const AuditReport a = privacy_audit(config.privacy, config.stated_total_delta, config.audit_draws,
                                      config.audit_shards, config.seed);
  Json j = Json::parse(a.ToJson());
  j["config"] = Json::parse(config.ToJson());
  const std::string json = j.dump(2) + "\n";
  std::ostringstream text;
  text << "noise: NB(r=" << a.nb.r << ", p=" << a.nb.p << "), mean " << a.nb.mean()
       << " per cluster\nexpected fakes per client per epoch: " << a.expected_fakes_per_client
       << "\nper epoch: (" << a.per_epoch.epsilon << ", " << a.per_epoch.delta << ")\ncomposed over "
       << config.privacy.epochs << " epochs: (" << a.composed.epsilon << ", " << a.composed.delta
       << ")\n";
  if (a.stated_delta_mismatch) text << "note: stated total delta differs from the composition\n";
  if (a.epsilon_mismatch) text << "note: p implies a different epsilon\n";
  return {json, text.str(), ""};
}

BenchResult run_bench(const RunConfig& config) {
  config.Validate();
  const SheParams params = config.search.ResidueParams(0);
  const BfvContext ctx(params);
  const Evaluator ev(ctx);
  const BatchEncoder enc(ctx);
  Prng rng(config.seed, "psearch.cli.bench");
  const SecretKey sk = GenerateSecretKey(ctx, rng);
  const EvaluationKey evk = GenerateEvaluationKey(ctx, sk, {ctx.GaloisElt(1)}, true, rng);
  std::vector<uint64_t> slots(enc.slot_count());
  for (auto& s : slots) s = rng.UniformBelow(params.t);
  const Plaintext pt = enc.Encode(slots);
  const Ciphertext a = ev.Encrypt(sk, pt, rng), b = ev.Encrypt(sk, pt, rng);
  const RingPoly lifted = ev.LiftPlain(pt, a.level());

  const size_t iters = config.bench_iterations;
  const auto time_ms = [&](auto&& op) {
    op();  // warm-up
    const auto start = std::chrono::steady_clock::now();
    for (size_t i = 0; i < iters; ++i) op();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() /
           static_cast<double>(iters);
  };
  BenchResult r;
  Ciphertext sink;
  r.ct_ct_add_ms = time_ms([&] { sink = ev.Add(a, b); });
  r.pt_ct_mult_ms = time_ms([&] { sink = ev.MulPlain(a, lifted); });
  r.ct_rotate_ms = time_ms([&] { sink = ev.Rotate(a, 1, evk); });
  r.ct_ct_mult_ms = time_ms([&] { sink = ev.Multiply(a, b, evk); });
  r.ordering_holds = r.ct_ct_add_ms < r.pt_ct_mult_ms && r.pt_ct_mult_ms < r.ct_rotate_ms &&
                     r.ct_rotate_ms < r.ct_ct_mult_ms;
  return r;
}

CommandOutput cmd_bench(const RunConfig& config, BenchResult* result) {
  const BenchResult r = run_bench(config);
  if (result != nullptr) *result = r;
  Json j;
  j["config"] = Json::parse(config.ToJson());
  j["iterations"] = config.bench_iterations;
  j["mean_ms"] = {{"ct_ct_add", r.ct_ct_add_ms},
                  {"pt_ct_mult", r.pt_ct_mult_ms},
                  {"ct_rotate", r.ct_rotate_ms},
                  {"ct_ct_mult", r.ct_ct_mult_ms}};
  j["ordering_holds"] = r.ordering_holds;
  std::ostringstream text;
  text << "operation      mean ms\n"
       << "CtCtAdd        " << r.ct_ct_add_ms << "\n"
       << "PtCtMult       " << r.pt_ct_mult_ms << "\n"
       << "CtRotate       " << r.ct_rotate_ms << "\n"
       << "CtCtMult       " << r.ct_ct_mult_ms << "\n"
       << "ordering CtCtAdd < PtCtMult < CtRotate < CtCtMult: "
       << (r.ordering_holds ? "holds" : "VIOLATED") << "\n";
  return {j.dump(2) + "\n", text.str(), ""};
}

}  // namespace psearch
