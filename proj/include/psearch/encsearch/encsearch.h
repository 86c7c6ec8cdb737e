// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_ENCSEARCH_ENCSEARCH_H_
#define PSEARCH_ENCSEARCH_ENCSEARCH_H_

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "psearch/bfv/bfv.h"
#include "psearch/cluster/cluster.h"
#include "psearch/common/query_kind.h"
#include "psearch/packing/packing.h"

namespace psearch {

// What the server receives. The real/fake kind is deliberately absent.
// Wire: cluster u32, plan u64, residue count u8, each ciphertext and the
// evaluation key as u32 length + bytes.
struct SearchQuery {
  uint32_t cluster_id = 0;
  uint64_t plan_id = 0;
  std::vector<Ciphertext> cts;  // one per plaintext residue
  EvaluationKey evk;

  void Serialize(ByteWriter& w) const;
  static SearchQuery Deserialize(ByteReader& r);
  std::vector<uint8_t> Bytes() const;
};

// Client-side state for one query: the wire query plus what never leaves
// the client.
struct ClientQuery {
  SearchQuery query;
  QueryKind kind = QueryKind::kReal;
  SecretKey sk;
};

// Per-query instrumentation, summed over residues unless noted.
struct SearchStats {
  size_t residues = 0;
  size_t blocks = 0;
  // Rotation terms of the BSGS sum per block and residue: (g-1) + h, the
  // giant term for k = 0 being the identity.
  size_t bsgs_rotation_terms = 0;
  OpCounts ops;  // includes key_switches and pt_mults
};

// Wire: cluster u32, plan u64, flags u8 (bit0 metadata inline, bit1 budget
// exhausted), block count u32, residue count u8, compressed ciphertexts as
// u32 length + bytes in [block][residue] order, metadata u32 length + bytes.
struct SearchResponse {
  uint32_t cluster_id = 0;
  uint64_t plan_id = 0;
  std::vector<std::vector<Ciphertext>> scores;  // [block][residue], compressed
  bool metadata_inline = false;
  std::vector<uint8_t> metadata;                // ClusterMetadata blob when inline
  bool budget_exhausted = false;
  SearchStats stats;                            // not serialized

  void Serialize(ByteWriter& w) const;
  static SearchResponse Deserialize(ByteReader& r);
  size_t SerializedSize() const;
  // Bytes of score ciphertexts alone.
  size_t CiphertextBytes() const;
};

struct ServerOptions {
  size_t metadata_threshold = 64;  // bytes per entry; larger goes through PIR
  int drop_l0 = 9;
  int drop_l1 = 0;
  size_t response_level = 1;
  // Keeps every diagonal lifted to evaluation form at full level. Costs
  // 8 * n * limbs bytes per diagonal; off by default.
  bool cache_lifted = false;
};

// Rotation keys a search query must carry: one step and g steps.
std::set<uint64_t> SearchGaloisElements(const BfvContext& ctx, const CubeLayout& layout);

// Stateless w.r.t. queries; the database and caches are read-only after
// construction, so Compute may run concurrently.
class SearchServer {
 public:
  SearchServer(const EncodedDatabase& db, ServerOptions options = {});
  SearchResponse Compute(const SearchQuery& query) const;
  const ResidueContexts& residues() const { return residues_; }
  const EncodedDatabase& database() const { return db_; }

 private:
  const EncodedDatabase& db_;
  ServerOptions options_;
  ResidueContexts residues_;
  CubeLayout layout_;
  // [cluster][block][residue][diagonal] when cache_lifted.
  std::vector<std::vector<std::vector<std::vector<RingPoly>>>> lifted_;
};

SearchResponse server_compute(const EncodedDatabase& db, const SearchQuery& query,
                              const ServerOptions& options = {});

// Public data a client holds: parameters, centroids and per-cluster slot
// maps (entry index per cube position of each block).
struct ClientIndex {
  SearchParams params;
  Codebook centroids_only;  // centroids; assignment left empty
  std::vector<std::vector<std::vector<uint32_t>>> slot_maps;  // [cluster][block]

  static ClientIndex FromDatabase(const EncodedDatabase& db);
};

// Fresh secret and evaluation key per query. A null `embedding` builds a
// fake query encrypting the zero vector.
ClientQuery make_search_query(const SearchParams& params, const ResidueContexts& residues,
                              uint32_t cluster_id, const float* embedding, uint64_t plan_id,
                              Prng& rng);

// Decrypts one response into scored entries of its cluster. Throws
// ValidationError when the response does not belong to the query.
std::vector<ScoredEntry> DecryptScores(const SearchResponse& response, const ClientQuery& query,
                                       const ClientIndex& index, const ResidueContexts& residues,
                                       bool* reliable = nullptr);

// Merges real responses, skipping fake queries, and returns the top `topk`.
// responses[i] answers queries[i].
std::vector<ScoredEntry> decrypt_and_rank(const std::vector<SearchResponse>& responses,
                                          const std::vector<ClientQuery>& queries,
                                          const ClientIndex& index,
                                          const ResidueContexts& residues, size_t topk);

}  // namespace psearch

#endif  // PSEARCH_ENCSEARCH_ENCSEARCH_H_
