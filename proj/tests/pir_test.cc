// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "psearch/common/error.h"
#include "psearch/pir/pir.h"

namespace psearch {
namespace {

std::vector<uint8_t> Bytes(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<CuckooItem> RandomItems(size_t count, size_t value_len, Prng& rng) {
  std::vector<CuckooItem> items(count);
  for (size_t i = 0; i < count; ++i) {
    items[i].keyword = Bytes("kw-" + std::to_string(i) + "-" + std::to_string(rng()));
    items[i].value.resize(value_len);
    rng.Fill(items[i].value.data(), value_len);
  }
  return items;
}

PirParams ToyPir() {
  PirParams p;
  p.she = SheParams::Toy(64, 17, 3, false);
  return p;
}

// ---------------------------------------------------------------- cuckoo

TEST(CuckooTest, EmptyAndSingle) {
  const CuckooTable empty = build_cuckoo({}, 1);
  EXPECT_EQ(empty.item_count, 0u);
  for (const auto& table : empty.tables) {
    for (const auto& bucket : table) EXPECT_TRUE(bucket.empty());
  }
  const CuckooTable one = build_cuckoo({{Bytes("k"), Bytes("v")}}, 2);
  const Fingerprint fp = KeywordFingerprint(Bytes("k"));
  const auto& bucket = one.tables[0][one.info.Bucket(0, fp)];
  ASSERT_EQ(bucket.size(), 1u);
  EXPECT_EQ(bucket[0].value, Bytes("v"));
  EXPECT_EQ(one.ScanLookup(Bytes("k")), Bytes("v"));
  EXPECT_FALSE(one.ScanLookup(Bytes("x")).has_value());
}

TEST(CuckooTest, RejectsBadInput) {
  EXPECT_THROW(build_cuckoo({{Bytes("a"), {}}, {Bytes("a"), {}}}, 1), ValidationError);
  CuckooOptions o;
  o.expansion = 1.2;
  EXPECT_THROW(build_cuckoo({}, 1, o), ValidationError);
}

TEST(CuckooTest, PlacementAtScale) {
  Prng rng(1, "test.cuckoo");
  const std::vector<CuckooItem> items = RandomItems(4096, 4, rng);
  CuckooOptions o;
  o.max_retries = 0;
  size_t ok = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    try {
      const CuckooTable t = build_cuckoo(items, seed * 1000, o);
      ++ok;
      if (seed != 0) continue;
      // Scan oracle agrees with the candidate positions for every entry.
      for (const CuckooItem& item : items) {
        const Fingerprint fp = KeywordFingerprint(item.keyword);
        ASSERT_EQ(t.ScanLookup(item.keyword), item.value);
        size_t hits = 0;
        for (const auto& [table, bucket] : t.info.Candidates(fp)) {
          for (const StoredItem& s : t.tables[table][bucket]) hits += s.fingerprint == fp;
        }
        ASSERT_EQ(hits, 1u);
      }
    } catch (const RuntimeFailure&) {
    }
  }
  EXPECT_GE(ok, 99u);
}

TEST(CuckooTest, DeterministicAndPersistent) {
  Prng rng(2, "test.cuckoo.persist");
  const std::vector<CuckooItem> items = RandomItems(300, 7, rng);
  const CuckooTable a = build_cuckoo(items, 5), b = build_cuckoo(items, 5);
  const std::string path = (std::filesystem::temp_directory_path() / "psearch_cuckoo.bin").string();
  a.Save(path);
  const CuckooTable c = CuckooTable::Load(path);
  for (const CuckooTable* t : {&b, &c}) {
    EXPECT_EQ(t->info.seed, a.info.seed);
    EXPECT_EQ(t->info.buckets_per_table, a.info.buckets_per_table);
    for (size_t table = 0; table < 2; ++table) {
      for (size_t i = 0; i < a.info.buckets_per_table; ++i) {
        EXPECT_EQ(t->EncodeBucket(table, i, 64), a.EncodeBucket(table, i, 64));
      }
    }
  }
  std::vector<uint8_t> raw = ReadFileBytes(path);
  raw.pop_back();
  WriteFileBytes(path, raw);
  EXPECT_THROW(CuckooTable::Load(path), RuntimeFailure);
  std::filesystem::remove(path);
}

TEST(CuckooTest, OneHashSplit) {
  Prng rng(3, "test.cuckoo.split");
  const std::vector<CuckooItem> items = RandomItems(1024, 3, rng);
  CuckooOptions o;
  o.mode = CuckooMode::kOneHashSplit;
  o.expansion = 12;
  const CuckooTable t = build_cuckoo(items, 9, o);
  EXPECT_EQ(t.info.capacity, 3u);
  for (const CuckooItem& item : items) {
    const Fingerprint fp = KeywordFingerprint(item.keyword);
    const auto cand = t.info.Candidates(fp);
    ASSERT_EQ(cand.size(), 1u);
    bool found = false;
    for (const StoredItem& s : t.tables[cand[0].first][cand[0].second]) found |= s.fingerprint == fp;
    EXPECT_TRUE(found);
  }
  for (const auto& table : t.tables) {
    for (const auto& bucket : table) EXPECT_LE(bucket.size(), 3u);
  }
  // Capacity 1 at minimal expansion cannot hold 2000 items.
  o.split_capacity = 1;
  o.expansion = 1.5;
  EXPECT_THROW(build_cuckoo(RandomItems(2000, 1, rng), 1, o), RuntimeFailure);
}

// ------------------------------------------------------------ dimensions

TEST(ChooseDimsTest, FormulaShape) {
  for (size_t c : {64u, 1000u, 4096u}) {
    const auto [d1, d2] = choose_dims_formula(c, 1e-9);
    EXPECT_EQ(d2, static_cast<size_t>(std::llround(std::sqrt(static_cast<double>(c)))));
    EXPECT_GE(d1 * d2, c);
  }
  const auto [d1, d2] = choose_dims_formula(4096, 5);
  EXPECT_EQ(d2, 120u);
  EXPECT_EQ(d1, 35u);
  EXPECT_NEAR(static_cast<double>(d2) / std::sqrt(4096.0), 1.87, 0.01);
  // The rounded continuous optimum is not the integer optimum here.
  EXPECT_EQ(PirDimsCost(35, 120, 5), 485.0);
  const auto [e1, e2] = choose_dims(4096, 5);
  EXPECT_EQ(PirDimsCost(e1, e2, 5), 480.0);
  EXPECT_THROW(choose_dims(0, 5), ValidationError);
  EXPECT_THROW(choose_dims(10, 0), ValidationError);
}

TEST(ChooseDimsTest, MatchesExhaustiveSearch) {
  const double gamma = 5;
  for (size_t c = 64; c <= 8192; ++c) {
    double best = 1e300;
    for (size_t d2 = 1; d2 <= c; ++d2) {
      best = std::min(best, (gamma + 2) * static_cast<double>((c + d2 - 1) / d2) + 2.0 * d2);
    }
    const auto [d1, d2] = choose_dims(c, gamma);
    ASSERT_GE(d1 * d2, c);
    ASSERT_EQ(PirDimsCost(d1, d2, gamma), best) << "C=" << c;
  }
}

// -------------------------------------------------------------- encoding

TEST(PirEncodingTest, BytesRoundTrip) {
  Prng rng(4, "test.pir.bytes");
  std::vector<uint8_t> bytes(100);
  rng.Fill(bytes.data(), bytes.size());
  const auto pts = BytesToPlaintexts(bytes, 7, 32, 17);
  ASSERT_EQ(pts.size(), 7u);
  for (const Plaintext& p : pts) {
    for (uint64_t v : p.coeffs) EXPECT_LT(v, 16u);
  }
  EXPECT_EQ(PlaintextsToBytes(pts, 100), bytes);
  EXPECT_THROW(BytesToPlaintexts(bytes, 6, 32, 17), ValidationError);
  EXPECT_THROW(BytesToPlaintexts(bytes, 7, 32, 13), ValidationError);
}

// ------------------------------------------------------------- expansion

class PirToyTest : public ::testing::Test {
 protected:
  PirParams params = ToyPir();
  BfvContext ctx{params.she};
  Evaluator ev{ctx};
};

TEST_F(PirToyTest, ExpansionExhaustive) {
  const PirLayout layout = PirLayout::Fixed(4, 4, 8, ctx.n());
  Prng rng(5, "test.pir.expand");
  uint64_t plan = 0;
  for (ExpansionKeys keys : {ExpansionKeys::kPerLevel, ExpansionKeys::kReduced}) {
    params.keys = keys;
    for (size_t row = 0; row < 4; ++row) {
      for (size_t col = 0; col < 4; ++col) {
        const PirClientQuery q = encode_pir_query(row, col, layout, params, ctx, rng, ++plan);
        for (bool linearize : {true, false}) {
          const OpCounts before = ev.counters().Snapshot();
          const auto out = oblivious_expand(ev, q.query.ct, 8, q.query.evk, linearize);
          EXPECT_EQ(ev.counters().Snapshot().substitutions - before.substitutions,
                    ExpansionSubstitutions(8, keys, linearize, ctx.n()));
          ASSERT_EQ(out.size(), 8u);
          for (size_t i = 0; i < 8; ++i) {
            const Plaintext p = ev.Decrypt(q.sk, out[i]).plaintext;
            const bool hot = i == row || i == 4 + col;
            EXPECT_EQ(p.coeffs[0], hot ? 1u : 0u) << row << col << i;
            for (size_t j = 1; j < p.coeffs.size(); ++j) ASSERT_EQ(p.coeffs[j], 0u);
          }
        }
      }
    }
  }
}

TEST(ExpansionKeysTest, ReducedSetIsSmallerAndCheaper) {
  const size_t n = 4096;
  for (size_t outputs = 2; outputs <= n; ++outputs) {
    const size_t levels = ExpansionLevels(outputs);
    const auto reduced = ExpansionGaloisElements(n, outputs, ExpansionKeys::kReduced);
    const auto full = ExpansionGaloisElements(n, outputs, ExpansionKeys::kPerLevel);
    ASSERT_EQ(full.size(), levels);
    ASSERT_LE(reduced.size(), full.size());
    ASSERT_LE(ExpansionSubstitutions(outputs, ExpansionKeys::kReduced, true, n),
              ExpansionSubstitutions(outputs, ExpansionKeys::kPerLevel, false, n))
        << outputs;
    ASSERT_LE(ExpansionSubstitutions(outputs, ExpansionKeys::kPerLevel, true, n),
              ExpansionSubstitutions(outputs, ExpansionKeys::kPerLevel, false, n));
  }
  // At 95 outputs (a 1536-bucket table): 4 of 7 keys.
  EXPECT_EQ(ExpansionGaloisElements(n, 95, ExpansionKeys::kReduced).size(), 4u);
}

TEST_F(PirToyTest, ExpansionMissingKey) {
  const PirLayout layout = PirLayout::Fixed(4, 4, 8, ctx.n());
  Prng rng(6, "test.pir.missing");
  PirClientQuery q = encode_pir_query(1, 2, layout, params, ctx, rng, 1);
  q.query.evk.galois.erase(q.query.evk.galois.begin());
  EXPECT_THROW(oblivious_expand(ev, q.query.ct, 8, q.query.evk), ValidationError);
}

// --------------------------------------------------------------- respond

std::vector<std::vector<uint8_t>> RandomBuckets(size_t count, size_t width, Prng& rng) {
  std::vector<std::vector<uint8_t>> b(count, std::vector<uint8_t>(width));
  for (auto& v : b) rng.Fill(v.data(), width);
  return b;
}

TEST_F(PirToyTest, RespondExhaustiveLazyAndEager) {
  Prng rng(7, "test.pir.respond");
  const PirLayout layout = PirLayout::Fixed(4, 4, 40, ctx.n());  // 2 chunks
  ASSERT_EQ(layout.chunks, 2u);
  const auto buckets = RandomBuckets(16, 40, rng);
  const PirDatabase db = PirDatabase::FromBuckets(buckets, layout, ctx);
  uint64_t plan = 0;
  for (size_t pos = 0; pos < 16; ++pos) {
    const PirClientQuery q = encode_pir_query(pos / 4, pos % 4, layout, params, ctx, rng, ++plan);
    const auto expanded = oblivious_expand(ev, q.query.ct, 8, q.query.evk);
    PirResponse lazy = pir_respond(db, ev, expanded, q.query.evk, true);
    PirResponse eager = pir_respond(db, ev, expanded, q.query.evk, false);
    EXPECT_EQ(lazy.ops.rescales, layout.chunks);
    EXPECT_EQ(eager.ops.rescales, layout.chunks * layout.d1);
    EXPECT_EQ(lazy.ops.tensors, layout.chunks * layout.d1);
    for (PirResponse* r : {&lazy, &eager}) {
      r->plan_id = q.query.plan_id;
      bool reliable = false;
      EXPECT_EQ(decode_pir_response(*r, q, layout, ev, &reliable), buckets[pos]) << pos;
      EXPECT_TRUE(reliable);
    }
  }
}

TEST_F(PirToyTest, IdenticalBuckets) {
  Prng rng(8, "test.pir.same");
  const PirLayout layout = PirLayout::Fixed(3, 5, 12, ctx.n());
  const std::vector<std::vector<uint8_t>> buckets(15, Bytes("same-content"));
  const PirDatabase db = PirDatabase::FromBuckets(buckets, layout, ctx);
  for (size_t pos : {0u, 7u, 14u}) {
    const PirClientQuery q = encode_pir_query(pos / 5, pos % 5, layout, params, ctx, rng, pos + 1);
    PirResponse r = pir_respond(db, ev, oblivious_expand(ev, q.query.ct, 8, q.query.evk), q.query.evk);
    r.plan_id = q.query.plan_id;
    EXPECT_EQ(decode_pir_response(r, q, layout, ev), Bytes("same-content"));
  }
}

TEST_F(PirToyTest, LargeEntryOrderSwap) {
  Prng rng(9, "test.pir.large");
  const PirLayout big = PirLayout::Fixed(2, 4, 8 * 32, ctx.n());
  ASSERT_EQ(big.chunks, 8u);
  const auto buckets = RandomBuckets(8, big.bucket_bytes, rng);
  const PirDatabase db = PirDatabase::FromBuckets(buckets, big, ctx);
  for (size_t pos = 0; pos < 8; ++pos) {
    const PirClientQuery q = encode_pir_query(pos / 4, pos % 4, big, params, ctx, rng, pos + 1);
    const auto expanded = oblivious_expand(ev, q.query.ct, 6, q.query.evk);
    PirResponse standard = pir_respond(db, ev, expanded, q.query.evk);
    PirResponse swapped = pir_respond_large(db, ev, expanded, q.query.evk);
    EXPECT_EQ(standard.ops.tensors, big.d1 * big.chunks);
    EXPECT_EQ(swapped.ops.tensors, big.d1 * big.d2);
    standard.plan_id = swapped.plan_id = q.query.plan_id;
    const auto a = decode_pir_response(standard, q, big, ev);
    const auto b = decode_pir_response(swapped, q, big, ev);
    EXPECT_EQ(a, buckets[pos]);
    EXPECT_EQ(b, a);
  }
  // One chunk: both paths valid and equal.
  const PirLayout small = PirLayout::Fixed(2, 4, 20, ctx.n());
  const auto sb = RandomBuckets(8, 20, rng);
  const PirDatabase sdb = PirDatabase::FromBuckets(sb, small, ctx);
  const PirClientQuery q = encode_pir_query(1, 3, small, params, ctx, rng, 99);
  const auto expanded = oblivious_expand(ev, q.query.ct, 6, q.query.evk);
  PirResponse x = pir_respond(sdb, ev, expanded, q.query.evk);
  PirResponse y = pir_respond_large(sdb, ev, expanded, q.query.evk);
  x.plan_id = y.plan_id = 99;
  EXPECT_EQ(decode_pir_response(x, q, small, ev), sb[7]);
  EXPECT_EQ(decode_pir_response(y, q, small, ev), sb[7]);
}

TEST_F(PirToyTest, ServerKeywordFetchAndWire) {
  Prng rng(10, "test.pir.server");
  const std::vector<CuckooItem> items = RandomItems(12, 5, rng);
  PirServer server(build_cuckoo(items, 3), params);
  for (size_t i = 0; i < items.size(); ++i) {
    const KeywordFetchResult r = keyword_fetch(items[i].keyword, server, rng, i);
    EXPECT_EQ(r.queries, 2u);
    EXPECT_TRUE(r.reliable);
    ASSERT_TRUE(r.value.has_value());
    EXPECT_EQ(*r.value, items[i].value);
  }
  const KeywordFetchResult miss = keyword_fetch(Bytes("absent"), server, rng, 100);
  EXPECT_FALSE(miss.value.has_value());

  // Wire round trips are byte-exact.
  const PirClientQuery q = encode_pir_query(0, 0, server.layout(), params, ctx, rng, 7, 1);
  ByteWriter w;
  q.query.Serialize(w);
  EXPECT_EQ(w.size(), q.query.SerializedSize());
  ByteReader r(w.bytes());
  const PirQuery back = PirQuery::Deserialize(r);
  ByteWriter w2;
  back.Serialize(w2);
  EXPECT_EQ(w.bytes(), w2.bytes());
  const PirResponse resp = server.Answer(back);
  EXPECT_EQ(resp.table, 1);
  ByteWriter rw;
  resp.Serialize(rw);
  EXPECT_EQ(rw.size(), resp.SerializedSize());
  for (const Ciphertext& c : resp.chunks) EXPECT_TRUE(c.compressed);

  PirQuery bad = back;
  bad.table = 2;
  EXPECT_THROW(server.Answer(bad), ValidationError);
  bad = back;
  bad.evk.relin.reset();
  EXPECT_THROW(server.Answer(bad), ValidationError);
}

// 1024 entries at the production ring. The acceptance run covers 100
// present and 100 absent keywords; this covers a quarter of that.
TEST(PirProductionTest, KeywordFetchPresentAbsent) {
  Prng rng(11, "test.pir.production");
  const std::vector<CuckooItem> items = RandomItems(1024, 100, rng);
  PirServer server(build_cuckoo(items, 1), PirParams{});
  size_t correct = 0;
  for (size_t i = 0; i < 25; ++i) {
    const CuckooItem& item = items[(i * 37) % items.size()];
    const KeywordFetchResult r = keyword_fetch(item.keyword, server, rng, 2 * i);
    correct += r.value.has_value() && *r.value == item.value;
    const KeywordFetchResult miss =
        keyword_fetch(Bytes("absent-" + std::to_string(i)), server, rng, 2 * i + 1);
    correct += !miss.value.has_value();
  }
  EXPECT_EQ(correct, 50u);
}

}  // namespace
}  // namespace psearch
