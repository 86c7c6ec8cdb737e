// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_PIR_PIR_H_
#define PSEARCH_PIR_PIR_H_

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "psearch/bfv/bfv.h"

namespace psearch {

// ---------------------------------------------------------------- cuckoo

// kTwoHash: a keyword lives at h0 in table 0 or h1 in table 1, one item per
// bucket, random-walk eviction. kOneHashSplit: a partition hash picks one
// table, a single hash picks the bucket, buckets hold up to `capacity`.
enum class CuckooMode : uint8_t { kTwoHash = 0, kOneHashSplit = 1 };

struct CuckooOptions {
  CuckooMode mode = CuckooMode::kTwoHash;
  // Item slots per table over item count; at least 1.5.
  double expansion = 1.5;
  // Items per bucket in kOneHashSplit; kTwoHash always uses 1.
  size_t split_capacity = 3;
  size_t max_kicks = 1000;
  size_t max_retries = 8;
};

using Fingerprint = std::array<uint8_t, 16>;
// Unkeyed 16-byte hash of the keyword; what tables store and hash.
Fingerprint KeywordFingerprint(std::span<const uint8_t> keyword);

struct CuckooItem {
  std::vector<uint8_t> keyword;
  std::vector<uint8_t> value;
};

struct StoredItem {
  Fingerprint fingerprint{};
  std::vector<uint8_t> value;
};

// What a client needs to locate a keyword.
struct CuckooPublic {
  CuckooMode mode = CuckooMode::kTwoHash;
  uint64_t seed = 0;  // final seed after retries
  size_t buckets_per_table = 0;
  size_t capacity = 1;

  size_t Bucket(size_t table, const Fingerprint& fp) const;
  // kOneHashSplit only: the table a keyword belongs to.
  size_t Partition(const Fingerprint& fp) const;
  // (table, bucket) pairs to probe: two for kTwoHash, one for the split.
  std::vector<std::pair<size_t, size_t>> Candidates(const Fingerprint& fp) const;
};

struct CuckooTable {
  CuckooPublic info;
  std::array<std::vector<std::vector<StoredItem>>, 2> tables;  // [table][bucket] -> items
  size_t item_count = 0;
  size_t attempts = 0;  // builds tried, >= 1
  size_t kicks = 0;     // evictions in the successful build

  // Plaintext scan over every bucket; the oracle for placement.
  std::optional<std::vector<uint8_t>> ScanLookup(std::span<const uint8_t> keyword) const;
  // Bucket wire form: count u8, then per item fingerprint[16], u32 length,
  // bytes; zero padded to `width`.
  std::vector<uint8_t> EncodeBucket(size_t table, size_t bucket, size_t width) const;
  size_t MaxBucketBytes() const;

  void Save(const std::string& path) const;
  static CuckooTable Load(const std::string& path);
};

// Placement with up to options.max_retries reseeds (seed + attempt).
// Throws ValidationError on duplicate keywords, RuntimeFailure when every
// attempt fails.
CuckooTable build_cuckoo(const std::vector<CuckooItem>& items, uint64_t seed,
                         const CuckooOptions& options = {});

// Items of one decoded bucket.
std::vector<StoredItem> ParseBucket(std::span<const uint8_t> bytes);

// ------------------------------------------------------------------- PIR

// Continuous optimum of (gamma + 2) d1 + 2 d2 with d1 d2 >= C, rounded:
// d2 = round(sqrt(1 + gamma/2) sqrt(C)), d1 = ceil(C / d2).
std::pair<size_t, size_t> choose_dims_formula(size_t buckets, double gamma);
// Exact integer minimizer of the same cost; ties go to the d2 closest to
// the continuous optimum. Returns (d1, d2).
std::pair<size_t, size_t> choose_dims(size_t buckets, double gamma);
double PirDimsCost(size_t d1, size_t d2, double gamma);

enum class ExpansionKeys : uint8_t {
  kPerLevel = 0,  // one substitution key per expansion level
  kReduced = 1,   // deepest ceil(levels/2) levels; shallower ones composed
};

struct PirParams {
  SheParams she = SheParams::Pir();
  double gamma = 5.0;  // ct-ct multiplication cost in rotations
  int drop_l0 = 19;
  int drop_l1 = 13;
  size_t response_level = 1;
  ExpansionKeys keys = ExpansionKeys::kReduced;
  bool linearize = true;
  bool lazy_rescale = true;

  void Validate() const;
};

// d1 rows (ct-ct dimension) by d2 columns (plaintext dimension); `chunks`
// plaintexts per bucket. Bucket b sits at row b / d2, column b % d2.
struct PirLayout {
  size_t d1 = 1, d2 = 1;
  size_t chunks = 1;
  size_t bucket_bytes = 0;

  size_t positions() const { return d1 * d2; }
  size_t outputs() const { return d1 + d2; }
  static PirLayout ForBuckets(size_t buckets, size_t bucket_bytes, size_t n, double gamma);
  static PirLayout Fixed(size_t d1, size_t d2, size_t bucket_bytes, size_t n);
};

// Bytes as 4-bit coefficients, low nibble first; needs t > 16.
std::vector<Plaintext> BytesToPlaintexts(std::span<const uint8_t> bytes, size_t chunks, size_t n,
                                         uint64_t t);
std::vector<uint8_t> PlaintextsToBytes(const std::vector<Plaintext>& pts, size_t byte_count);

struct PirDatabase {
  PirLayout layout;
  // [chunk][row * d2 + column]; empty coefficient vectors mark zero cells.
  std::vector<std::vector<Plaintext>> cells;

  static PirDatabase FromBuckets(const std::vector<std::vector<uint8_t>>& buckets,
                                 const PirLayout& layout, const BfvContext& ctx);
};

// Number of expansion levels for `outputs` indicators: ceil(log2(outputs)).
size_t ExpansionLevels(size_t outputs);
// Galois elements n/2^j + 1 the client ships for the given strategy.
std::set<uint64_t> ExpansionGaloisElements(size_t n, size_t outputs, ExpansionKeys keys);

// Wire: plan u64, table u8, ciphertext, evaluation key.
struct PirQuery {
  uint64_t plan_id = 0;
  uint8_t table = 0;
  Ciphertext ct;
  EvaluationKey evk;

  void Serialize(ByteWriter& w) const;
  static PirQuery Deserialize(ByteReader& r);
  size_t SerializedSize() const;
};

struct PirClientQuery {
  PirQuery query;
  SecretKey sk;
  size_t row = 0, col = 0;
};

// One ciphertext with 2^-levels at coefficients `row` and d1 + col. Keys
// and encryption noise come from forks of `rng` keyed by plan_id, so
// distinct queries need distinct plan ids.
PirClientQuery encode_pir_query(size_t row, size_t col, const PirLayout& layout,
                                const PirParams& params, const BfvContext& ctx, Prng& rng,
                                uint64_t plan_id = 0, uint8_t table = 0);

// Substitutions the expansion tree performs for the given choices.
size_t ExpansionSubstitutions(size_t outputs, ExpansionKeys keys, bool linearize, size_t n);

// d1 + d2 indicator ciphertexts, rows first. Throws ValidationError when a
// needed substitution is neither held nor a power of a held element.
std::vector<Ciphertext> oblivious_expand(const Evaluator& ev, const Ciphertext& query,
                                         size_t outputs, const EvaluationKey& evk,
                                         bool linearize = true);

// Wire: plan u64, table u8, flags u8 (bit0 budget exhausted), chunk count
// u32, ciphertexts.
struct PirResponse {
  uint64_t plan_id = 0;
  uint8_t table = 0;
  std::vector<Ciphertext> chunks;
  bool budget_exhausted = false;
  OpCounts ops;  // not serialized

  void Serialize(ByteWriter& w) const;
  static PirResponse Deserialize(ByteReader& r);
  size_t SerializedSize() const;
};

// a = D c over the columns, then r^T a with one ct-ct product per row and
// chunk. Lazy mode accumulates tensors and rescales once per chunk.
// `expanded` holds rows then columns. Responses are left uncompressed.
PirResponse pir_respond(const PirDatabase& db, const Evaluator& ev,
                        const std::vector<Ciphertext>& expanded, const EvaluationKey& evk,
                        bool lazy_rescale = true);
// Outer product r_i c_j first (d1 d2 ct-ct products, independent of the
// chunk count), then plaintext inner products per chunk.
PirResponse pir_respond_large(const PirDatabase& db, const Evaluator& ev,
                              const std::vector<Ciphertext>& expanded, const EvaluationKey& evk);

// Chunk bytes recovered from a response; `reliable` reports the static
// budget check.
std::vector<uint8_t> decode_pir_response(const PirResponse& response, const PirClientQuery& query,
                                         const PirLayout& layout, const Evaluator& ev,
                                         bool* reliable = nullptr);

// Server over one cuckoo table: per-table databases, stateless per query.
class PirServer {
 public:
  PirServer(CuckooTable table, PirParams params);
  // Expands, responds (swapping the order when chunks exceed d2), switches
  // to the response level and drops low bits.
  PirResponse Answer(const PirQuery& query) const;

  const CuckooPublic& public_info() const { return table_.info; }
  const PirLayout& layout() const { return layout_; }
  const PirParams& params() const { return params_; }
  const BfvContext& context() const { return ctx_; }
  const CuckooTable& table() const { return table_; }

 private:
  CuckooTable table_;
  PirParams params_;
  BfvContext ctx_;
  PirLayout layout_;  // shared by both tables
  std::array<PirDatabase, 2> dbs_;
};

struct KeywordFetchResult {
  std::optional<std::vector<uint8_t>> value;  // nullopt: not found
  size_t queries = 0;
  size_t request_bytes = 0;
  size_t response_bytes = 0;
  bool reliable = true;
  OpCounts server_ops;
};

// Client side: one PIR query per candidate position with fresh keys, then
// a fingerprint match. `server` stands in for the transport.
KeywordFetchResult keyword_fetch(std::span<const uint8_t> keyword, const PirServer& server,
                                 Prng& rng, uint64_t plan_id = 0);

}  // namespace psearch

#endif  // PSEARCH_PIR_PIR_H_
