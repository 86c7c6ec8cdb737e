// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/pir/pir.h"

#include <sodium.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "psearch/common/error.h"

namespace psearch {
namespace {

constexpr uint32_t kCuckooMagic = 0x4B435543;  // "CUCK"
constexpr uint32_t kCuckooVersion = 1;
constexpr size_t kItemHeader = 16 + 4;

uint64_t KeyedHash64(uint64_t seed, const Fingerprint& fp, uint8_t tag) {
  uint8_t key[16];
  for (int i = 0; i < 8; ++i) key[i] = static_cast<uint8_t>(seed >> (8 * i));
  const char label[8] = {'c', 'u', 'c', 'k', 'o', 'o', 'h', 0};
  std::copy(label, label + 8, key + 8);
  uint8_t in[17];
  std::copy(fp.begin(), fp.end(), in);
  in[16] = tag;
  uint8_t out[8];
  crypto_generichash(out, sizeof(out), in, sizeof(in), key, sizeof(key));
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(out[i]) << (8 * i);
  return v;
}

OpCounts Diff(const OpCounts& a, const OpCounts& b) {
  OpCounts d;
  d.ct_adds = a.ct_adds - b.ct_adds;
  d.pt_adds = a.pt_adds - b.pt_adds;
  d.pt_mults = a.pt_mults - b.pt_mults;
  d.rotations = a.rotations - b.rotations;
  d.substitutions = a.substitutions - b.substitutions;
  d.key_switches = a.key_switches - b.key_switches;
  d.tensors = a.tensors - b.tensors;
  d.rescales = a.rescales - b.rescales;
  d.relinearizations = a.relinearizations - b.relinearizations;
  d.mod_switches = a.mod_switches - b.mod_switches;
  return d;
}

size_t ItemBytes(const StoredItem& item) { return kItemHeader + item.value.size(); }

}  // namespace

// ---------------------------------------------------------------- cuckoo

Fingerprint KeywordFingerprint(std::span<const uint8_t> keyword) {
  Fingerprint fp;
  crypto_generichash(fp.data(), fp.size(), keyword.data(), keyword.size(), nullptr, 0);
  return fp;
}

size_t CuckooPublic::Bucket(size_t table, const Fingerprint& fp) const {
  PSEARCH_CHECK(buckets_per_table > 0 && table < 2, UsageError, "invalid cuckoo table");
  return KeyedHash64(seed, fp, static_cast<uint8_t>(table)) % buckets_per_table;
}

size_t CuckooPublic::Partition(const Fingerprint& fp) const {
  return KeyedHash64(seed, fp, 2) & 1;
}

std::vector<std::pair<size_t, size_t>> CuckooPublic::Candidates(const Fingerprint& fp) const {
  if (mode == CuckooMode::kTwoHash) return {{0, Bucket(0, fp)}, {1, Bucket(1, fp)}};
  const size_t table = Partition(fp);
  return {{table, Bucket(table, fp)}};
}

std::optional<std::vector<uint8_t>> CuckooTable::ScanLookup(
    std::span<const uint8_t> keyword) const {
  const Fingerprint fp = KeywordFingerprint(keyword);
  for (const auto& table : tables) {
    for (const auto& bucket : table) {
      for (const StoredItem& item : bucket) {
        if (item.fingerprint == fp) return item.value;
      }
    }
  }
  return std::nullopt;
}

std::vector<uint8_t> CuckooTable::EncodeBucket(size_t table, size_t bucket, size_t width) const {
  const auto& items = tables.at(table).at(bucket);
  ByteWriter w;
  w.U8(static_cast<uint8_t>(items.size()));
  for (const StoredItem& item : items) {
    w.Raw(item.fingerprint.data(), item.fingerprint.size());
    w.U32(static_cast<uint32_t>(item.value.size()));
    w.Raw(item.value.data(), item.value.size());
  }
  std::vector<uint8_t> out = w.Take();
  PSEARCH_CHECK(out.size() <= width, UsageError, "bucket wider than the encoding width");
  out.resize(width, 0);
  return out;
}

size_t CuckooTable::MaxBucketBytes() const {
  size_t best = 1;
  for (const auto& table : tables) {
    for (const auto& bucket : table) {
      size_t bytes = 1;
      for (const StoredItem& item : bucket) bytes += ItemBytes(item);
      best = std::max(best, bytes);
    }
  }
  return best;
}

std::vector<StoredItem> ParseBucket(std::span<const uint8_t> bytes) {
  ByteReader r(bytes.data(), bytes.size());
  const size_t count = r.U8();
  std::vector<StoredItem> items(count);
  for (StoredItem& item : items) {
    r.Raw(item.fingerprint.data(), item.fingerprint.size());
    const uint32_t len = r.U32();
    PSEARCH_CHECK(len <= r.remaining(), RuntimeFailure, "bucket item overruns its bucket");
    item.value.resize(len);
    r.Raw(item.value.data(), len);
  }
  return items;
}

void CuckooTable::Save(const std::string& path) const {
  ByteWriter w;
  w.U32(kCuckooMagic);
  w.U32(kCuckooVersion);
  w.U8(static_cast<uint8_t>(info.mode));
  w.U64(info.seed);
  w.U64(info.buckets_per_table);
  w.U32(static_cast<uint32_t>(info.capacity));
  w.U64(item_count);
  w.U32(static_cast<uint32_t>(attempts));
  w.U64(kicks);
  for (const auto& table : tables) {
    for (const auto& bucket : table) {
      w.U8(static_cast<uint8_t>(bucket.size()));
      for (const StoredItem& item : bucket) {
        w.Raw(item.fingerprint.data(), item.fingerprint.size());
        w.U32(static_cast<uint32_t>(item.value.size()));
        w.Raw(item.value.data(), item.value.size());
      }
    }
  }
  WriteFileBytes(path, w.bytes());
}

CuckooTable CuckooTable::Load(const std::string& path) {
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  ByteReader r(bytes);
  PSEARCH_CHECK(r.U32() == kCuckooMagic, RuntimeFailure, "not a cuckoo table file");
  PSEARCH_CHECK(r.U32() == kCuckooVersion, RuntimeFailure, "unsupported cuckoo table version");
  CuckooTable t;
  const uint8_t mode = r.U8();
  PSEARCH_CHECK(mode <= 1, RuntimeFailure, "unknown cuckoo mode");
  t.info.mode = static_cast<CuckooMode>(mode);
  t.info.seed = r.U64();
  t.info.buckets_per_table = r.U64();
  t.info.capacity = r.U32();
  PSEARCH_CHECK(t.info.buckets_per_table <= (size_t{1} << 32) && t.info.capacity >= 1,
                RuntimeFailure, "corrupt cuckoo header");
  t.item_count = r.U64();
  t.attempts = r.U32();
  t.kicks = r.U64();
  for (auto& table : t.tables) {
    table.resize(t.info.buckets_per_table);
    for (auto& bucket : table) {
      const size_t count = r.U8();
      PSEARCH_CHECK(count <= t.info.capacity, RuntimeFailure, "bucket over capacity");
      bucket.resize(count);
      for (StoredItem& item : bucket) {
        r.Raw(item.fingerprint.data(), item.fingerprint.size());
        const uint32_t len = r.U32();
        PSEARCH_CHECK(len <= r.remaining(), RuntimeFailure, "truncated cuckoo table");
        item.value.resize(len);
        r.Raw(item.value.data(), len);
      }
    }
  }
  PSEARCH_CHECK(r.done(), RuntimeFailure, "trailing bytes in cuckoo table");
  return t;
}

namespace {

// One placement attempt; false on failure.
bool TryBuild(const std::vector<StoredItem>& items, const CuckooOptions& options,
              CuckooTable& t) {
  const CuckooPublic& info = t.info;
  for (auto& table : t.tables) table.assign(info.buckets_per_table, {});
  t.kicks = 0;
  if (info.mode == CuckooMode::kOneHashSplit) {
    for (const StoredItem& item : items) {
      const size_t table = info.Partition(item.fingerprint);
      auto& bucket = t.tables[table][info.Bucket(table, item.fingerprint)];
      if (bucket.size() >= info.capacity) return false;
      bucket.push_back(item);
    }
    return true;
  }
  Prng walk(info.seed, "cuckoo.walk");
  for (const StoredItem& item : items) {
    StoredItem cur = item;
    size_t from = 2;  // table the current item was evicted from
    bool placed = false;
    for (size_t kick = 0; kick <= options.max_kicks && !placed; ++kick) {
      for (size_t table = 0; table < 2 && !placed; ++table) {
        auto& bucket = t.tables[table][info.Bucket(table, cur.fingerprint)];
        if (bucket.empty()) {
          bucket.push_back(std::move(cur));
          placed = true;
        }
      }
      if (placed) break;
      const size_t table = from == 2 ? walk.UniformBelow(2) : 1 - from;
      auto& bucket = t.tables[table][info.Bucket(table, cur.fingerprint)];
      std::swap(cur, bucket[0]);
      from = table;
      ++t.kicks;
    }
    if (!placed) return false;
  }
  return true;
}

}  // namespace

CuckooTable build_cuckoo(const std::vector<CuckooItem>& items, uint64_t seed,
                         const CuckooOptions& options) {
  PSEARCH_CHECK(options.expansion >= 1.5, ValidationError, "cuckoo expansion must be >= 1.5");
  PSEARCH_CHECK(options.split_capacity >= 1 && options.split_capacity <= 255, ValidationError,
                "bucket capacity must be in [1, 255]");
  std::vector<StoredItem> stored;
  stored.reserve(items.size());
  std::set<Fingerprint> seen;
  for (const CuckooItem& item : items) {
    StoredItem s{KeywordFingerprint(item.keyword), item.value};
    PSEARCH_CHECK(seen.insert(s.fingerprint).second, ValidationError, "duplicate keyword");
    PSEARCH_CHECK(item.value.size() <= UINT32_MAX, ValidationError, "value too large");
    stored.push_back(std::move(s));
  }
  CuckooTable t;
  t.info.mode = options.mode;
  t.info.capacity = options.mode == CuckooMode::kTwoHash ? 1 : options.split_capacity;
  // Each table holds `expansion` times the items in slots.
  t.info.buckets_per_table = std::max<size_t>(
      1, static_cast<size_t>(std::ceil(options.expansion * static_cast<double>(items.size()) /
                                       static_cast<double>(t.info.capacity))));
  t.item_count = items.size();
  for (size_t attempt = 0; attempt <= options.max_retries; ++attempt) {
    t.info.seed = seed + attempt;
    t.attempts = attempt + 1;
    if (TryBuild(stored, options, t)) return t;
  }
  throw RuntimeFailure("cuckoo placement failed after " + std::to_string(t.attempts) +
                       " attempts (" + std::to_string(items.size()) + " items, " +
                       std::to_string(t.info.buckets_per_table) + " buckets per table)");
}

// ------------------------------------------------------------------- PIR

std::pair<size_t, size_t> choose_dims_formula(size_t buckets, double gamma) {
  PSEARCH_CHECK(buckets >= 1, ValidationError, "bucket count must be >= 1");
  PSEARCH_CHECK(gamma > 0, ValidationError, "gamma must be positive");
  const double c = static_cast<double>(buckets);
  size_t d2 = static_cast<size_t>(std::llround(std::sqrt(1 + gamma / 2) * std::sqrt(c)));
  d2 = std::clamp<size_t>(d2, 1, buckets);
  return {(buckets + d2 - 1) / d2, d2};
}

double PirDimsCost(size_t d1, size_t d2, double gamma) {
  return (gamma + 2) * static_cast<double>(d1) + 2 * static_cast<double>(d2);
}

std::pair<size_t, size_t> choose_dims(size_t buckets, double gamma) {
  PSEARCH_CHECK(buckets >= 1, ValidationError, "bucket count must be >= 1");
  PSEARCH_CHECK(gamma > 0, ValidationError, "gamma must be positive");
  const double target = std::sqrt(1 + gamma / 2) * std::sqrt(static_cast<double>(buckets));
  // For a fixed row count the cheapest column count is ceil(C / d1).
  std::pair<size_t, size_t> best{buckets, 1};
  double best_cost = PirDimsCost(buckets, 1, gamma);
  for (size_t d1 = 1; d1 <= buckets; ++d1) {
    const size_t d2 = (buckets + d1 - 1) / d1;
    if ((buckets + d2 - 1) / d2 != d1) continue;  // a smaller d1 serves this d2
    const double cost = PirDimsCost(d1, d2, gamma);
    const bool closer = std::abs(static_cast<double>(d2) - target) <
                        std::abs(static_cast<double>(best.second) - target);
    if (cost < best_cost - 1e-9 || (std::abs(cost - best_cost) <= 1e-9 && closer)) {
      best = {d1, d2};
      best_cost = cost;
    }
  }
  return best;
}

void PirParams::Validate() const {
  she.Validate();
  PSEARCH_CHECK(she.t > 16, ValidationError, "PIR plaintext modulus must exceed 16");
  PSEARCH_CHECK(gamma > 0, ValidationError, "gamma must be positive");
  PSEARCH_CHECK(response_level >= 1 && response_level <= she.q.size(), ValidationError,
                "response level out of range");
  PSEARCH_CHECK(drop_l0 >= 0 && drop_l1 >= 0, ValidationError, "drop widths must be >= 0");
}

PirLayout PirLayout::Fixed(size_t d1, size_t d2, size_t bucket_bytes, size_t n) {
  PSEARCH_CHECK(d1 >= 1 && d2 >= 1, ValidationError, "PIR dimensions must be >= 1");
  PSEARCH_CHECK(d1 + d2 <= n, ValidationError, "d1 + d2 must not exceed the ring degree");
  PirLayout l;
  l.d1 = d1;
  l.d2 = d2;
  l.bucket_bytes = std::max<size_t>(bucket_bytes, 1);
  const size_t per_plaintext = n / 2;  // two nibbles per byte
  l.chunks = (l.bucket_bytes + per_plaintext - 1) / per_plaintext;
  return l;
}

PirLayout PirLayout::ForBuckets(size_t buckets, size_t bucket_bytes, size_t n, double gamma) {
  const auto [d1, d2] = choose_dims(buckets, gamma);
  return Fixed(d1, d2, bucket_bytes, n);
}

std::vector<Plaintext> BytesToPlaintexts(std::span<const uint8_t> bytes, size_t chunks, size_t n,
                                         uint64_t t) {
  PSEARCH_CHECK(t > 16, ValidationError, "nibble packing needs t > 16");
  PSEARCH_CHECK(bytes.size() <= chunks * (n / 2), ValidationError, "bytes exceed chunk capacity");
  std::vector<Plaintext> out(chunks, Plaintext{std::vector<uint64_t>(n, 0), t});
  for (size_t b = 0; b < bytes.size(); ++b) {
    const size_t coeff = 2 * b;
    Plaintext& pt = out[coeff / n];
    pt.coeffs[coeff % n] = bytes[b] & 0xF;
    pt.coeffs[coeff % n + 1] = bytes[b] >> 4;
  }
  return out;
}

std::vector<uint8_t> PlaintextsToBytes(const std::vector<Plaintext>& pts, size_t byte_count) {
  PSEARCH_CHECK(!pts.empty(), ValidationError, "no plaintexts");
  const size_t n = pts[0].coeffs.size();
  PSEARCH_CHECK(byte_count <= pts.size() * (n / 2), ValidationError, "byte count too large");
  std::vector<uint8_t> out(byte_count);
  for (size_t b = 0; b < byte_count; ++b) {
    const size_t coeff = 2 * b;
    const Plaintext& pt = pts[coeff / n];
    out[b] = static_cast<uint8_t>((pt.coeffs[coeff % n] & 0xF) |
                                  ((pt.coeffs[coeff % n + 1] & 0xF) << 4));
  }
  return out;
}

PirDatabase PirDatabase::FromBuckets(const std::vector<std::vector<uint8_t>>& buckets,
                                     const PirLayout& layout, const BfvContext& ctx) {
  PSEARCH_CHECK(buckets.size() <= layout.positions(), ValidationError,
                "more buckets than PIR positions");
  PirDatabase db;
  db.layout = layout;
  db.cells.assign(layout.chunks, std::vector<Plaintext>(layout.positions(), Plaintext{{}, ctx.t()}));
  for (size_t b = 0; b < buckets.size(); ++b) {
    PSEARCH_CHECK(buckets[b].size() <= layout.bucket_bytes, ValidationError,
                  "bucket exceeds the layout width");
    const bool zero = std::all_of(buckets[b].begin(), buckets[b].end(), [](uint8_t v) { return v == 0; });
    if (zero) continue;
    std::vector<Plaintext> pts = BytesToPlaintexts(buckets[b], layout.chunks, ctx.n(), ctx.t());
    for (size_t k = 0; k < layout.chunks; ++k) {
      const bool empty = std::all_of(pts[k].coeffs.begin(), pts[k].coeffs.end(),
                                     [](uint64_t v) { return v == 0; });
      if (!empty) db.cells[k][b] = std::move(pts[k]);
    }
  }
  return db;
}

size_t ExpansionLevels(size_t outputs) {
  PSEARCH_CHECK(outputs >= 1, ValidationError, "expansion needs at least one output");
  return static_cast<size_t>(std::bit_width(outputs - 1));
}

namespace {

uint64_t LevelElement(size_t n, size_t level) { return n / (size_t{1} << level) + 1; }

uint64_t PowMod(uint64_t base, uint64_t exp, uint64_t mod) {
  unsigned __int128 r = 1, b = base % mod;
  while (exp) {
    if (exp & 1) r = r * b % mod;
    b = b * b % mod;
    exp >>= 1;
  }
  return static_cast<uint64_t>(r);
}

constexpr uint64_t kMaxComposition = 64;

// (held element, power) with the fewest substitutions reaching `elt`.
std::optional<std::pair<uint64_t, uint64_t>> DerivationOf(uint64_t elt,
                                                          const std::set<uint64_t>& held,
                                                          uint64_t two_n) {
  if (held.count(elt)) return std::make_pair(elt, uint64_t{1});
  std::optional<std::pair<uint64_t, uint64_t>> best;
  for (uint64_t h : held) {
    uint64_t acc = h;
    for (uint64_t p = 1; p <= kMaxComposition; ++p) {
      if (acc == elt) {
        if (!best || p < best->second) best = std::make_pair(h, p);
        break;
      }
      acc = static_cast<uint64_t>(static_cast<unsigned __int128>(acc) * h % two_n);
    }
  }
  return best;
}

}  // namespace

std::set<uint64_t> ExpansionGaloisElements(size_t n, size_t outputs, ExpansionKeys keys) {
  PSEARCH_CHECK(outputs <= n, ValidationError, "more expansion outputs than the ring degree");
  const size_t levels = ExpansionLevels(outputs);
  std::set<uint64_t> held;
  if (keys == ExpansionKeys::kPerLevel) {
    for (size_t j = 0; j < levels; ++j) held.insert(LevelElement(n, j));
    return held;
  }
  for (size_t j = levels / 2; j < levels; ++j) held.insert(LevelElement(n, j));
  // Shallow levels whose element is not a small power of a held one.
  for (size_t j = 0; j < levels / 2; ++j) {
    if (!DerivationOf(LevelElement(n, j), held, 2 * n)) held.insert(LevelElement(n, j));
  }
  return held;
}

size_t ExpansionSubstitutions(size_t outputs, ExpansionKeys keys, bool linearize, size_t n) {
  const std::set<uint64_t> held = ExpansionGaloisElements(n, outputs, keys);
  size_t total = 0;
  for (size_t j = 0; j < ExpansionLevels(outputs); ++j) {
    const size_t m = size_t{1} << j;
    const size_t nodes = std::min(m, outputs);
    const size_t high = outputs > m ? std::min(m, outputs - m) : 0;
    const uint64_t power = DerivationOf(LevelElement(n, j), held, 2 * n)->second;
    total += power * (linearize ? nodes : nodes + high);
  }
  return total;
}

PirClientQuery encode_pir_query(size_t row, size_t col, const PirLayout& layout,
                                const PirParams& params, const BfvContext& ctx, Prng& rng,
                                uint64_t plan_id, uint8_t table) {
  PSEARCH_CHECK(row < layout.d1 && col < layout.d2, ValidationError, "PIR index out of range");
  PSEARCH_CHECK(layout.outputs() <= ctx.n(), ValidationError, "d1 + d2 exceeds the ring degree");
  const uint64_t t = ctx.t();
  const size_t levels = ExpansionLevels(layout.outputs());
  // 2^-levels mod t; the expansion multiplies each coefficient by 2^levels.
  const uint64_t inv = PowMod(PowMod(2, levels, t), t - 2, t);
  std::vector<uint64_t> coeffs(ctx.n(), 0);
  coeffs[row] = inv;
  coeffs[layout.d1 + col] = inv;
  PirClientQuery out;
  out.row = row;
  out.col = col;
  Prng key_rng = rng.Fork("pir.keys", plan_id);
  Prng enc_rng = rng.Fork("pir.encrypt", plan_id);
  out.sk = GenerateSecretKey(ctx, key_rng);
  out.query.evk = GenerateEvaluationKey(
      ctx, out.sk, ExpansionGaloisElements(ctx.n(), layout.outputs(), params.keys), true, key_rng);
  out.query.evk.plan_id = plan_id;
  Evaluator ev(ctx);
  out.query.ct = ev.Encrypt(out.sk, EncodeCoefficients(coeffs, ctx.n(), t), enc_rng);
  out.query.plan_id = plan_id;
  out.query.table = table;
  return out;
}

namespace {

// Exact product with +-X^k, k in [0, 2n); leaves the noise unchanged.
Ciphertext MulMonomial(const Ciphertext& ct, size_t k, size_t n) {
  std::vector<int64_t> coeffs(n, 0);
  coeffs[k % n] = k < n ? 1 : -1;
  RingPoly mono = RingPoly::FromSigned(n, ct.parts[0].limbs(), coeffs);
  mono.NttForward();
  Ciphertext out = ct;
  for (RingPoly& p : out.parts) p *= mono;
  return out;
}

Ciphertext SubstituteComposed(const Evaluator& ev, const Ciphertext& ct,
                              const std::pair<uint64_t, uint64_t>& path,
                              const EvaluationKey& evk) {
  Ciphertext out = ev.Substitute(ct, path.first, evk);
  for (uint64_t p = 1; p < path.second; ++p) out = ev.Substitute(out, path.first, evk);
  return out;
}

Ciphertext ZeroLike(const BfvContext& ctx, size_t level, uint64_t t) {
  Ciphertext z;
  z.t = t;
  for (int k = 0; k < 2; ++k) z.parts.emplace_back(ctx.n(), ctx.LimbsAt(level), PolyForm::kEvaluation);
  return z;
}

}  // namespace

std::vector<Ciphertext> oblivious_expand(const Evaluator& ev, const Ciphertext& query,
                                         size_t outputs, const EvaluationKey& evk,
                                         bool linearize) {
  const BfvContext& ctx = ev.context();
  const size_t n = ctx.n();
  PSEARCH_CHECK(outputs >= 1 && outputs <= n, ValidationError, "expansion outputs out of range");
  PSEARCH_CHECK(query.size() == 2 && !query.compressed, ValidationError,
                "PIR query must be a fresh two-part ciphertext");
  std::set<uint64_t> held;
  for (const auto& [elt, key] : evk.galois) held.insert(elt);
  const size_t levels = ExpansionLevels(outputs);
  std::vector<Ciphertext> cur{query};
  for (size_t j = 0; j < levels; ++j) {
    const size_t m = size_t{1} << j;
    const uint64_t elt = LevelElement(n, j);
    const auto path = DerivationOf(elt, held, 2 * n);
    PSEARCH_CHECK(path.has_value(), ValidationError,
                  "substitution key for element " + std::to_string(elt) +
                      " is neither held nor derivable");
    std::vector<Ciphertext> next(std::min(2 * m, outputs));
    for (size_t b = 0; b < cur.size(); ++b) {
      const Ciphertext& c = cur[b];
      const bool high = b + m < outputs;
      if (linearize) {
        // Sub(X^-m c) = -X^-m Sub(c) at this level's element.
        const Ciphertext s = SubstituteComposed(ev, c, *path, evk);
        if (high) next[b + m] = MulMonomial(ev.Sub(c, s), 2 * n - m, n);
        next[b] = ev.Add(c, s);
      } else {
        next[b] = ev.Add(c, SubstituteComposed(ev, c, *path, evk));
        if (high) {
          const Ciphertext shifted = MulMonomial(c, 2 * n - m, n);
          next[b + m] = ev.Add(shifted, SubstituteComposed(ev, shifted, *path, evk));
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

void PirQuery::Serialize(ByteWriter& w) const {
  w.U64(plan_id);
  w.U8(table);
  ct.Serialize(w);
  evk.Serialize(w);
}

PirQuery PirQuery::Deserialize(ByteReader& r) {
  PirQuery q;
  q.plan_id = r.U64();
  q.table = r.U8();
  q.ct = Ciphertext::Deserialize(r);
  q.evk = EvaluationKey::Deserialize(r);
  return q;
}

size_t PirQuery::SerializedSize() const {
  return 8 + 1 + ct.SerializedSize() + evk.SerializedSize();
}

void PirResponse::Serialize(ByteWriter& w) const {
  w.U64(plan_id);
  w.U8(table);
  w.U8(budget_exhausted ? 1 : 0);
  w.U32(static_cast<uint32_t>(chunks.size()));
  for (const Ciphertext& c : chunks) c.Serialize(w);
}

PirResponse PirResponse::Deserialize(ByteReader& r) {
  PirResponse p;
  p.plan_id = r.U64();
  p.table = r.U8();
  const uint8_t flags = r.U8();
  PSEARCH_CHECK(flags <= 1, RuntimeFailure, "unknown PIR response flags");
  p.budget_exhausted = flags & 1;
  const uint32_t count = r.U32();
  PSEARCH_CHECK(count <= r.remaining(), RuntimeFailure, "truncated PIR response");
  for (uint32_t i = 0; i < count; ++i) p.chunks.push_back(Ciphertext::Deserialize(r));
  return p;
}

size_t PirResponse::SerializedSize() const {
  size_t s = 8 + 1 + 1 + 4;
  for (const Ciphertext& c : chunks) s += c.SerializedSize();
  return s;
}

namespace {

void CheckExpanded(const PirDatabase& db, const std::vector<Ciphertext>& expanded) {
  PSEARCH_CHECK(expanded.size() == db.layout.outputs(), ValidationError,
                "expanded query has the wrong number of indicators");
  for (const Ciphertext& c : expanded) {
    PSEARCH_CHECK(c.size() == 2 && !c.compressed && c.level() == expanded[0].level(),
                  ValidationError, "malformed expanded indicator");
  }
}

}  // namespace

PirResponse pir_respond(const PirDatabase& db, const Evaluator& ev,
                        const std::vector<Ciphertext>& expanded, const EvaluationKey& evk,
                        bool lazy_rescale) {
  CheckExpanded(db, expanded);
  const OpCounts before = ev.counters().Snapshot();
  const PirLayout& l = db.layout;
  const size_t level = expanded[0].level();
  PirResponse resp;
  for (size_t k = 0; k < l.chunks; ++k) {
    TensorCiphertext lazy;
    Ciphertext eager;
    for (size_t i = 0; i < l.d1; ++i) {
      Ciphertext a;
      for (size_t j = 0; j < l.d2; ++j) {
        const Plaintext& cell = db.cells[k][i * l.d2 + j];
        if (cell.coeffs.empty()) continue;
        ev.MulPlainAccumulate(a, expanded[l.d1 + j], ev.LiftPlain(cell, level));
      }
      if (a.parts.empty()) continue;
      TensorCiphertext term = ev.Tensor(expanded[i], a);
      if (lazy_rescale) {
        ev.AddTensorInPlace(lazy, term);
      } else if (eager.parts.empty()) {
        eager = ev.Rescale(term);
      } else {
        ev.AddInPlace(eager, ev.Rescale(term));
      }
    }
    Ciphertext out;
    if (lazy_rescale && !lazy.parts.empty()) {
      out = ev.Rescale(lazy);
    } else if (!lazy_rescale && !eager.parts.empty()) {
      out = std::move(eager);
    } else {
      out = ZeroLike(ev.context(), level, expanded[0].t);
    }
    resp.chunks.push_back(ev.Relinearize(out, evk));
  }
  resp.ops = Diff(ev.counters().Snapshot(), before);
  return resp;
}

PirResponse pir_respond_large(const PirDatabase& db, const Evaluator& ev,
                              const std::vector<Ciphertext>& expanded, const EvaluationKey& evk) {
  CheckExpanded(db, expanded);
  const OpCounts before = ev.counters().Snapshot();
  const PirLayout& l = db.layout;
  const size_t level = expanded[0].level();
  std::vector<Ciphertext> acc(l.chunks);
  for (size_t i = 0; i < l.d1; ++i) {
    for (size_t j = 0; j < l.d2; ++j) {
      const size_t cell = i * l.d2 + j;
      bool any = false;
      for (size_t k = 0; k < l.chunks && !any; ++k) any = !db.cells[k][cell].coeffs.empty();
      if (!any) continue;
      const Ciphertext product = ev.Rescale(ev.Tensor(expanded[i], expanded[l.d1 + j]));
      for (size_t k = 0; k < l.chunks; ++k) {
        const Plaintext& pt = db.cells[k][cell];
        if (!pt.coeffs.empty()) ev.MulPlainAccumulate(acc[k], product, ev.LiftPlain(pt, level));
      }
    }
  }
  PirResponse resp;
  for (Ciphertext& c : acc) {
    if (c.parts.empty()) c = ZeroLike(ev.context(), level, expanded[0].t);
    resp.chunks.push_back(ev.Relinearize(c, evk));
  }
  resp.ops = Diff(ev.counters().Snapshot(), before);
  return resp;
}

std::vector<uint8_t> decode_pir_response(const PirResponse& response, const PirClientQuery& query,
                                         const PirLayout& layout, const Evaluator& ev,
                                         bool* reliable) {
  PSEARCH_CHECK(response.plan_id == query.query.plan_id && response.table == query.query.table,
                ValidationError, "PIR response does not answer this query");
  PSEARCH_CHECK(response.chunks.size() == layout.chunks, ValidationError,
                "PIR response has the wrong chunk count");
  bool ok = !response.budget_exhausted;
  std::vector<Plaintext> pts;
  for (const Ciphertext& c : response.chunks) {
    DecryptResult d = ev.Decrypt(query.sk, c);
    ok = ok && d.reliable;
    pts.push_back(std::move(d.plaintext));
  }
  if (reliable) *reliable = ok;
  return PlaintextsToBytes(pts, layout.bucket_bytes);
}

PirServer::PirServer(CuckooTable table, PirParams params)
    : table_(std::move(table)), params_(std::move(params)), ctx_((params_.Validate(), params_.she)) {
  const size_t width = table_.MaxBucketBytes();
  layout_ = PirLayout::ForBuckets(table_.info.buckets_per_table, width, ctx_.n(), params_.gamma);
  PSEARCH_CHECK(layout_.outputs() <= ctx_.n(), ValidationError,
                "table too large for one expansion; raise the ring degree");
  Evaluator probe(ctx_);
  PSEARCH_CHECK(probe.DropAllowed(ctx_.q_limbs()[0].value(), params_.drop_l0, params_.drop_l1),
                ValidationError, "drop widths violate the decryption bound");
  for (size_t t = 0; t < 2; ++t) {
    std::vector<std::vector<uint8_t>> buckets;
    buckets.reserve(table_.info.buckets_per_table);
    for (size_t b = 0; b < table_.info.buckets_per_table; ++b) {
      buckets.push_back(table_.EncodeBucket(t, b, width));
    }
    dbs_[t] = PirDatabase::FromBuckets(buckets, layout_, ctx_);
  }
}

PirResponse PirServer::Answer(const PirQuery& query) const {
  PSEARCH_CHECK(query.table < 2, ValidationError, "PIR table index out of range");
  PSEARCH_CHECK(query.evk.key_id == ctx_.key_id(), ValidationError,
                "evaluation key belongs to another parameter set");
  PSEARCH_CHECK(query.evk.relin.has_value(), ValidationError, "PIR query lacks a relinearization key");
  PSEARCH_CHECK(query.ct.size() == 2 && !query.ct.compressed &&
                    query.ct.level() == ctx_.max_level() && query.ct.t == ctx_.t(),
                ValidationError, "malformed PIR query ciphertext");
  Evaluator ev(ctx_);
  const std::vector<Ciphertext> expanded =
      oblivious_expand(ev, query.ct, layout_.outputs(), query.evk, params_.linearize);
  const PirDatabase& db = dbs_[query.table];
  PirResponse resp = layout_.chunks > layout_.d2
                         ? pir_respond_large(db, ev, expanded, query.evk)
                         : pir_respond(db, ev, expanded, query.evk, params_.lazy_rescale);
  for (Ciphertext& c : resp.chunks) {
    c = ev.DropLsbs(ev.ModSwitchTo(c, params_.response_level), params_.drop_l0, params_.drop_l1);
    resp.budget_exhausted = resp.budget_exhausted || c.budget_estimate() <= 0;
  }
  resp.plan_id = query.plan_id;
  resp.table = query.table;
  resp.ops = ev.counters().Snapshot();
  return resp;
}

KeywordFetchResult keyword_fetch(std::span<const uint8_t> keyword, const PirServer& server,
                                 Prng& rng, uint64_t plan_id) {
  const Fingerprint fp = KeywordFingerprint(keyword);
  const CuckooPublic& info = server.public_info();
  const PirLayout& layout = server.layout();
  Evaluator ev(server.context());
  KeywordFetchResult result;
  for (const auto& [table, bucket] : info.Candidates(fp)) {
    const uint64_t id = plan_id * 2 + table;
    const PirClientQuery q = encode_pir_query(bucket / layout.d2, bucket % layout.d2, layout,
                                              server.params(), server.context(), rng, id,
                                              static_cast<uint8_t>(table));
    ByteWriter w;
    q.query.Serialize(w);
    result.request_bytes += w.size();
    ByteReader r(w.bytes());
    const PirResponse resp = server.Answer(PirQuery::Deserialize(r));
    ByteWriter rw;
    resp.Serialize(rw);
    result.response_bytes += rw.size();
    ByteReader rr(rw.bytes());
    bool reliable = true;
    const std::vector<uint8_t> bytes =
        decode_pir_response(PirResponse::Deserialize(rr), q, layout, ev, &reliable);
    result.reliable = result.reliable && reliable;
    ++result.queries;
    result.server_ops += resp.ops;
    for (StoredItem& item : ParseBucket(bytes)) {
      if (item.fingerprint == fp && !result.value) result.value = std::move(item.value);
    }
  }
  return result;
}

}  // namespace psearch
