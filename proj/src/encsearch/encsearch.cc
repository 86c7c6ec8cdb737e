// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/encsearch/encsearch.h"

#include <algorithm>

#include "psearch/common/error.h"

namespace psearch {

namespace {

void PutBlob(ByteWriter& w, const std::vector<uint8_t>& bytes) {
  w.U32(static_cast<uint32_t>(bytes.size()));
  w.Raw(bytes.data(), bytes.size());
}

std::vector<uint8_t> GetBlob(ByteReader& r) {
  const uint32_t len = r.U32();
  PSEARCH_CHECK(len <= r.remaining(), RuntimeFailure, "truncated message");
  std::vector<uint8_t> out(len);
  r.Raw(out.data(), len);
  return out;
}

template <typename T>
std::vector<uint8_t> BytesOf(const T& value) {
  ByteWriter w;
  value.Serialize(w);
  return w.Take();
}

template <typename T>
T ParseBlob(ByteReader& r) {
  const auto bytes = GetBlob(r);
  ByteReader inner(bytes);
  T value = T::Deserialize(inner);
  PSEARCH_CHECK(inner.done(), RuntimeFailure, "trailing bytes in message component");
  return value;
}

}  // namespace

void SearchQuery::Serialize(ByteWriter& w) const {
  w.U32(cluster_id);
  w.U64(plan_id);
  w.U8(static_cast<uint8_t>(cts.size()));
  for (const Ciphertext& ct : cts) PutBlob(w, BytesOf(ct));
  PutBlob(w, BytesOf(evk));
}

SearchQuery SearchQuery::Deserialize(ByteReader& r) {
  SearchQuery q;
  q.cluster_id = r.U32();
  q.plan_id = r.U64();
  const uint8_t count = r.U8();
  for (uint8_t i = 0; i < count; ++i) q.cts.push_back(ParseBlob<Ciphertext>(r));
  q.evk = ParseBlob<EvaluationKey>(r);
  return q;
}

std::vector<uint8_t> SearchQuery::Bytes() const { return BytesOf(*this); }

void SearchResponse::Serialize(ByteWriter& w) const {
  w.U32(cluster_id);
  w.U64(plan_id);
  w.U8(static_cast<uint8_t>((metadata_inline ? 1 : 0) | (budget_exhausted ? 2 : 0)));
  w.U32(static_cast<uint32_t>(scores.size()));
  w.U8(static_cast<uint8_t>(scores.empty() ? 0 : scores[0].size()));
  for (const auto& block : scores) {
    for (const Ciphertext& ct : block) PutBlob(w, BytesOf(ct));
  }
  PutBlob(w, metadata);
}

SearchResponse SearchResponse::Deserialize(ByteReader& r) {
  SearchResponse out;
  out.cluster_id = r.U32();
  out.plan_id = r.U64();
  const uint8_t flags = r.U8();
  PSEARCH_CHECK(flags < 4, RuntimeFailure, "unknown response flags");
  out.metadata_inline = flags & 1;
  out.budget_exhausted = flags & 2;
  const uint32_t blocks = r.U32();
  const uint8_t residues = r.U8();
  PSEARCH_CHECK(blocks <= r.remaining(), RuntimeFailure, "truncated response");
  for (uint32_t b = 0; b < blocks; ++b) {
    std::vector<Ciphertext> row;
    for (uint8_t i = 0; i < residues; ++i) row.push_back(ParseBlob<Ciphertext>(r));
    out.scores.push_back(std::move(row));
  }
  out.metadata = GetBlob(r);
  return out;
}

size_t SearchResponse::SerializedSize() const { return BytesOf(*this).size(); }

size_t SearchResponse::CiphertextBytes() const {
  size_t total = 0;
  for (const auto& block : scores) {
    for (const Ciphertext& ct : block) total += ct.SerializedSize();
  }
  return total;
}

std::set<uint64_t> SearchGaloisElements(const BfvContext& ctx, const CubeLayout& layout) {
  std::set<uint64_t> elts;
  if (layout.baby > 1) elts.insert(ctx.GaloisElt(1));
  if (layout.giant > 1) elts.insert(ctx.GaloisElt(static_cast<long>(layout.baby)));
  return elts;
}

SearchServer::SearchServer(const EncodedDatabase& db, ServerOptions options)
    : db_(db), options_(options), residues_(db.params), layout_(db.params.layout()) {
  db_.params.Validate();
  PSEARCH_CHECK(options_.response_level >= 1 && options_.response_level <= db_.params.she.q.size(),
                ValidationError, "response level out of range");
  if (!options_.cache_lifted) return;
  const size_t top = db_.params.she.q.size();
  for (const ClusterCube& cube : db_.cubes) {
    std::vector<std::vector<std::vector<RingPoly>>> per_block;
    for (const CubeBlock& block : cube.blocks) {
      std::vector<std::vector<RingPoly>> per_residue;
      for (size_t r = 0; r < residues_.size(); ++r) {
        const Evaluator ev(residues_.context(r));
        std::vector<RingPoly> lifted;
        for (const Plaintext& pt : block.diagonals[r]) lifted.push_back(ev.LiftPlain(pt, top));
        per_residue.push_back(std::move(lifted));
      }
      per_block.push_back(std::move(per_residue));
    }
    lifted_.push_back(std::move(per_block));
  }
}

SearchResponse SearchServer::Compute(const SearchQuery& query) const {
  PSEARCH_CHECK(query.cluster_id < db_.cubes.size(), ValidationError, "unknown cluster");
  PSEARCH_CHECK(query.cts.size() == residues_.size(), ValidationError,
                "query carries the wrong number of residue ciphertexts");
  const ClusterCube& cube = db_.cubes[query.cluster_id];
  const size_t top = db_.params.she.q.size();
  const size_t g = layout_.baby, h = layout_.giant, d = layout_.dim;

  SearchResponse response;
  response.cluster_id = query.cluster_id;
  response.plan_id = query.plan_id;
  response.scores.resize(cube.blocks.size());
  response.stats.residues = residues_.size();
  response.stats.blocks = cube.blocks.size();
  response.stats.bsgs_rotation_terms = (g - 1) + h;

  for (size_t r = 0; r < residues_.size(); ++r) {
    const BfvContext& ctx = residues_.context(r);
    const Evaluator ev(ctx);
    const Ciphertext& ct = query.cts[r];
    PSEARCH_CHECK(ct.t == ctx.t() && !ct.compressed && ct.size() == 2 && ct.level() == top,
                  ValidationError, "query ciphertext does not match the residue parameters");
    PSEARCH_CHECK(query.evk.key_id == ctx.key_id(), ValidationError,
                  "evaluation key belongs to another parameter set");
    for (uint64_t elt : SearchGaloisElements(ctx, layout_)) {
      PSEARCH_CHECK(query.evk.HasGalois(elt), ValidationError, "missing rotation key");
    }
    // Baby steps: ct rotated by 0..g-1, chained one step at a time.
    std::vector<Ciphertext> baby{ct};
    for (size_t a = 1; a < g; ++a) baby.push_back(ev.Rotate(baby.back(), 1, query.evk));

    for (size_t b_index = 0; b_index < cube.blocks.size(); ++b_index) {
      const CubeBlock& block = cube.blocks[b_index];
      RingPoly scratch;
      auto lifted = [&](size_t j) -> const RingPoly& {
        if (options_.cache_lifted) return lifted_[query.cluster_id][b_index][r][j];
        scratch = ev.LiftPlain(block.diagonals[r][j], top);
        return scratch;
      };
      // Horner over giant steps: acc = Rot(acc, g) + inner_k, k descending.
      Ciphertext acc;
      for (size_t k = h; k-- > 0;) {
        Ciphertext inner;
        for (size_t a = 0; a < g && a + k * g < d; ++a) {
          ev.MulPlainAccumulate(inner, baby[a], lifted(a + k * g));
        }
        if (acc.parts.empty()) {
          acc = std::move(inner);
        } else {
          acc = ev.Rotate(acc, static_cast<long>(g), query.evk);
          ev.AddInPlace(acc, inner);
        }
      }
      Ciphertext low = ev.ModSwitchTo(acc, options_.response_level);
      if (low.budget_estimate() <= 0) response.budget_exhausted = true;
      if (options_.drop_l0 > 0 || options_.drop_l1 > 0) {
        PSEARCH_CHECK(options_.response_level == 1, ValidationError,
                      "dropping low bits needs a single-limb response");
        low = ev.DropLsbs(low, options_.drop_l0, options_.drop_l1);
      }
      response.scores[b_index].push_back(std::move(low));
    }
    response.stats.ops += ev.counters().Snapshot();
  }

  if (db_.MaxMetadataSize(query.cluster_id) <= options_.metadata_threshold) {
    response.metadata_inline = true;
    response.metadata = db_.ClusterMetadata(query.cluster_id);
  }
  return response;
}

SearchResponse server_compute(const EncodedDatabase& db, const SearchQuery& query,
                              const ServerOptions& options) {
  return SearchServer(db, options).Compute(query);
}

ClientIndex ClientIndex::FromDatabase(const EncodedDatabase& db) {
  ClientIndex index;
  index.params = db.params;
  index.centroids_only.centroids = db.codebook.centroids;
  for (const ClusterCube& cube : db.cubes) {
    std::vector<std::vector<uint32_t>> maps;
    for (const CubeBlock& block : cube.blocks) maps.push_back(block.entries);
    index.slot_maps.push_back(std::move(maps));
  }
  return index;
}

ClientQuery make_search_query(const SearchParams& params, const ResidueContexts& residues,
                              uint32_t cluster_id, const float* embedding, uint64_t plan_id,
                              Prng& rng) {
  const CubeLayout layout = params.layout();
  const size_t dim = params.fixed_point.dim;
  std::vector<int64_t> scaled(dim, 0);
  if (embedding != nullptr) {
    scaled = scale_embedding_signed(std::span<const float>(embedding, dim), params.fixed_point);
  }
  const BfvContext& ctx0 = residues.context(0);
  ClientQuery out;
  out.kind = embedding == nullptr ? QueryKind::kFake : QueryKind::kReal;
  Prng key_rng = rng.Fork("search.keys", plan_id);
  out.sk = GenerateSecretKey(ctx0, key_rng);
  // One key pair serves every residue: keys depend on the ring and limbs only.
  out.query.evk = GenerateEvaluationKey(ctx0, out.sk, SearchGaloisElements(ctx0, layout), false, key_rng);
  out.query.evk.plan_id = plan_id;
  out.query.cluster_id = cluster_id;
  out.query.plan_id = plan_id;
  Prng enc_rng = rng.Fork("search.encrypt", plan_id);
  for (size_t r = 0; r < residues.size(); ++r) {
    PSEARCH_CHECK(residues.context(r).key_id() == out.sk.key_id, UsageError,
                  "residue contexts disagree on the key basis");
    const Evaluator ev(residues.context(r));
    out.query.cts.push_back(ev.Encrypt(out.sk, pack_query(scaled, layout, residues.encoder(r)), enc_rng));
  }
  return out;
}

std::vector<ScoredEntry> DecryptScores(const SearchResponse& response, const ClientQuery& query,
                                       const ClientIndex& index, const ResidueContexts& residues,
                                       bool* reliable) {
  PSEARCH_CHECK(response.plan_id == query.query.plan_id &&
                    response.cluster_id == query.query.cluster_id,
                ValidationError, "response does not answer this query");
  PSEARCH_CHECK(response.cluster_id < index.slot_maps.size(), ValidationError, "unknown cluster");
  const auto& maps = index.slot_maps[response.cluster_id];
  PSEARCH_CHECK(response.scores.size() == maps.size(), ValidationError,
                "response block count differs from the slot map");
  const CubeLayout layout = index.params.layout();
  const PlaintextCrt crt(index.params.plaintext_moduli);
  if (reliable != nullptr) *reliable = !response.budget_exhausted;
  std::vector<ScoredEntry> out;
  for (size_t b = 0; b < maps.size(); ++b) {
    PSEARCH_CHECK(response.scores[b].size() == residues.size(), ValidationError,
                  "response residue count mismatch");
    std::vector<std::vector<uint64_t>> slots;
    for (size_t r = 0; r < residues.size(); ++r) {
      const Evaluator ev(residues.context(r));
      PSEARCH_CHECK(response.scores[b][r].t == residues.context(r).t(), ValidationError,
                    "response residue modulus mismatch");
      DecryptResult dec = ev.Decrypt(query.sk, response.scores[b][r]);
      if (reliable != nullptr && !dec.reliable) *reliable = false;
      slots.push_back(residues.encoder(r).Decode(dec.plaintext));
    }
    std::vector<uint64_t> column(residues.size());
    for (size_t k = 0; k < maps[b].size(); ++k) {
      const size_t slot = layout.SlotOf(k);
      for (size_t r = 0; r < residues.size(); ++r) column[r] = slots[r][slot];
      out.push_back({maps[b][k], crt.CombineOne(column)});
    }
  }
  return out;
}

std::vector<ScoredEntry> decrypt_and_rank(const std::vector<SearchResponse>& responses,
                                          const std::vector<ClientQuery>& queries,
                                          const ClientIndex& index,
                                          const ResidueContexts& residues, size_t topk) {
  PSEARCH_CHECK(responses.size() == queries.size(), ValidationError,
                "one response per query expected");
  std::vector<ScoredEntry> merged;
  for (size_t i = 0; i < responses.size(); ++i) {
    if (queries[i].kind == QueryKind::kFake) continue;
    auto part = DecryptScores(responses[i], queries[i], index, residues);
    merged.insert(merged.end(), part.begin(), part.end());
  }
  SortByScore(merged);
  if (merged.size() > topk) merged.resize(topk);
  return merged;
}

}  // namespace psearch
