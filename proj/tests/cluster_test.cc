// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "psearch/cluster/cluster.h"
#include "psearch/common/error.h"
#include "psearch/common/prng.h"

namespace psearch {
namespace {

Embeddings RandomUnit(size_t count, size_t dim, uint64_t seed) {
  Prng rng(seed, "test.unit");
  std::normal_distribution<double> normal;
  Embeddings e(count, dim);
  for (float& v : e.values) v = static_cast<float>(normal(rng));
  NormalizeRows(e);
  return e;
}

TEST(EmbeddingsTest, WembRoundTripAndValidation) {
  Embeddings e = RandomUnit(10, 7, 1);
  ByteWriter w;
  WriteEmbeddings(w, e);
  EXPECT_EQ(w.size(), 4u + 2 + 4 + 4 + 10 * 7 * 4);
  ByteReader r(w.bytes());
  Embeddings back = ReadEmbeddings(r);
  EXPECT_EQ(back.dim, 7u);
  EXPECT_EQ(back.values, e.values);
  for (size_t i = 0; i < e.count(); ++i) EXPECT_NEAR(Dot(e.row(i), e.row(i)), 1.0, 1e-5);

  std::vector<uint8_t> bad = w.bytes();
  bad[0] = 'X';
  ByteReader rb(bad);
  EXPECT_THROW(ReadEmbeddings(rb), RuntimeFailure);
  std::vector<uint8_t> cut(w.bytes().begin(), w.bytes().end() - 3);
  ByteReader rc(cut);
  EXPECT_THROW(ReadEmbeddings(rc), RuntimeFailure);
}

TEST(KmeansTest, EveryPointItsOwnCentroid) {
  Embeddings e = RandomUnit(30, 5, 2);
  Codebook cb = kmeans(e, 30, 20, 3);
  EXPECT_NEAR(cb.objective_history.back(), 0.0, 1e-9);
  std::vector<uint32_t> sorted = cb.assignment;
  std::sort(sorted.begin(), sorted.end());
  for (uint32_t i = 0; i < 30; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(KmeansTest, SingleClusterIsTheMean) {
  Embeddings e = RandomUnit(50, 6, 4);
  Codebook cb = kmeans(e, 1, 10, 5);
  for (size_t j = 0; j < 6; ++j) {
    double mean = 0;
    for (size_t i = 0; i < 50; ++i) mean += e.row(i)[j];
    EXPECT_NEAR(cb.centroids.row(0)[j], mean / 50, 1e-5);
  }
}

TEST(KmeansTest, RecoversSeparatedBlobs) {
  Prng rng(6, "test.blobs");
  std::normal_distribution<double> normal(0, 0.3);
  Embeddings e(1000, 8);
  std::vector<int> label(1000);
  for (size_t i = 0; i < 1000; ++i) {
    label[i] = static_cast<int>(rng.UniformBelow(2));
    for (size_t j = 0; j < 8; ++j) e.row(i)[j] = static_cast<float>((label[i] ? 5.0 : -5.0) + normal(rng));
  }
  Codebook cb = kmeans(e, 2, 50, 7);
  size_t agree = 0;
  for (size_t i = 0; i < 1000; ++i) agree += (static_cast<int>(cb.assignment[i]) == label[i]);
  agree = std::max(agree, 1000 - agree);  // labels are defined up to a swap
  EXPECT_GE(agree, 990u);
}

TEST(KmeansTest, DeterministicMonotoneAndPartitioning) {
  SyntheticCorpus c = GenerateCorpus({.entries = 600, .dim = 16, .blobs = 6, .queries = 0, .seed = 8});
  Codebook a = kmeans(c.entries, 10, 30, 9), b = kmeans(c.entries, 10, 30, 9);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.centroids.values, b.centroids.values);
  for (size_t i = 1; i < a.objective_history.size(); ++i) {
    EXPECT_LE(a.objective_history[i], a.objective_history[i - 1] + 1e-9);
  }
  size_t total = 0;
  for (size_t k = 0; k < a.members.size(); ++k) {
    EXPECT_FALSE(a.members[k].empty());
    total += a.members[k].size();
    for (uint32_t m : a.members[k]) EXPECT_EQ(a.assignment[m], k);
  }
  EXPECT_EQ(total, 600u);
  // Each entry at its nearest centroid.
  for (size_t i = 0; i < 600; ++i) {
    const double own = SquaredDistance(c.entries.row(i), a.centroids.row(a.assignment[i]));
    for (size_t k = 0; k < 10; ++k) {
      EXPECT_LE(own, SquaredDistance(c.entries.row(i), a.centroids.row(k)) + 1e-12);
    }
  }
  EXPECT_THROW(kmeans(c.entries, 601, 5, 1), ValidationError);
}

TEST(KmeansTest, CodebookSerializationRoundTrip) {
  Embeddings e = RandomUnit(40, 4, 10);
  Codebook cb = kmeans(e, 3, 10, 11);
  ByteWriter w;
  cb.Serialize(w);
  ByteReader r(w.bytes());
  Codebook back = Codebook::Deserialize(r);
  EXPECT_EQ(back.assignment, cb.assignment);
  EXPECT_EQ(back.members, cb.members);
  EXPECT_EQ(back.centroids.values, cb.centroids.values);
}

TEST(NearestCentroidsTest, MatchesBruteForce) {
  Embeddings e = RandomUnit(200, 12, 12);
  Codebook cb = kmeans(e, 16, 20, 13);
  for (size_t k = 0; k < 16; ++k) EXPECT_EQ(nearest_centroids(cb.centroids.row(k), cb, 1)[0], k);
  Embeddings queries = RandomUnit(100, 12, 14);
  for (size_t q = 0; q < 100; ++q) {
    auto all = nearest_centroids(queries.row(q), cb, 16);
    std::vector<uint32_t> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    for (uint32_t i = 0; i < 16; ++i) EXPECT_EQ(sorted[i], i);
    size_t best = 0;
    for (size_t k = 1; k < 16; ++k) {
      if (Dot(queries.row(q), cb.centroids.row(k)) > Dot(queries.row(q), cb.centroids.row(best))) best = k;
    }
    EXPECT_EQ(all[0], best);
    for (size_t i = 1; i < 16; ++i) {
      EXPECT_GE(Dot(queries.row(q), cb.centroids.row(all[i - 1])),
                Dot(queries.row(q), cb.centroids.row(all[i])));
    }
  }
  EXPECT_THROW(nearest_centroids(queries.row(0), cb, 17), ValidationError);
}

TEST(NearestCentroidsTest, TiesGoToLowerId) {
  Codebook cb;
  cb.centroids = Embeddings(3, 2);
  cb.centroids.row(0)[0] = 0;
  cb.centroids.row(1)[0] = 1;
  cb.centroids.row(2)[0] = 1;
  const float q[2] = {1, 0};
  EXPECT_EQ(nearest_centroids(q, cb, 3), (std::vector<uint32_t>{1, 2, 0}));
}

TEST(FixedPointTest, PrecisionBounds) {
  const FixedPointParams crt = FixedPointParams::MaxPrecision(40961ull * 65537ull, 192);
  EXPECT_EQ(crt.scale, 32768.0);  // 15 bits
  const FixedPointParams single = FixedPointParams::MaxPrecision(40961, 192);
  EXPECT_EQ(single.scale, 128.0);
  EXPECT_THROW((FixedPointParams{65536, 40961ull * 65537ull, 192}.Validate()), ValidationError);
  std::vector<float> zero(192, 0.0f);
  EXPECT_EQ(scale_embedding(zero, crt), std::vector<uint64_t>(192, 0));
}

TEST(FixedPointTest, InnerProductErrorBoundAndNoWrap) {
  const FixedPointParams fp = FixedPointParams::MaxPrecision(40961ull * 65537ull, 192);
  Embeddings e = RandomUnit(400, 192, 15);
  const double p = fp.scale;
  const double bound = p * std::sqrt(192.0) + 192.0 / 4;
  for (size_t i = 0; i + 1 < 400; i += 2) {
    auto u = scale_embedding_signed(e.row(i), fp), v = scale_embedding_signed(e.row(i + 1), fp);
    int64_t dot = 0;
    for (size_t j = 0; j < 192; ++j) dot += u[j] * v[j];
    EXPECT_LE(std::abs(static_cast<double>(dot) - p * p * Dot(e.row(i), e.row(i + 1))), bound);
    EXPECT_LT(std::abs(static_cast<double>(dot)), static_cast<double>(fp.t) / 2);
    // Self inner products are the extreme case.
    int64_t self = 0;
    for (size_t j = 0; j < 192; ++j) self += u[j] * u[j];
    EXPECT_LT(static_cast<double>(self), static_cast<double>(fp.t) / 2);
  }
  auto residues = scale_embedding(e.row(0), fp);
  auto signed_values = scale_embedding_signed(e.row(0), fp);
  for (size_t j = 0; j < 192; ++j) {
    const int64_t back = residues[j] > fp.t / 2 ? static_cast<int64_t>(residues[j]) - static_cast<int64_t>(fp.t)
                                                : static_cast<int64_t>(residues[j]);
    EXPECT_EQ(back, signed_values[j]);
  }
}

TEST(MrrTest, BasicCases) {
  std::vector<ScoredEntry> probe = {{5, 10}, {7, 30}, {9, 20}};
  EXPECT_DOUBLE_EQ(mrr_at_100({probe}, 7), 1.0);
  EXPECT_DOUBLE_EQ(mrr_at_100({probe}, 9), 0.5);
  EXPECT_DOUBLE_EQ(mrr_at_100({probe}, 11), 0.0);
  // Tie broken by lower entry index.
  EXPECT_DOUBLE_EQ(mrr_at_100({{{4, 1}}, {{3, 1}}}, 3), 1.0);
  std::vector<ScoredEntry> many;
  for (uint32_t i = 0; i < 150; ++i) many.push_back({i, 1000 - static_cast<int64_t>(i)});
  EXPECT_DOUBLE_EQ(mrr_at_100({many}, 99), 0.01);
  EXPECT_DOUBLE_EQ(mrr_at_100({many}, 100), 0.0);
}

TEST(MrrTest, ExhaustiveProbeEqualsBruteForce) {
  SyntheticCorpus c = GenerateCorpus({.entries = 1000, .dim = 32, .blobs = 8, .queries = 50, .seed = 16});
  Codebook cb = kmeans(c.entries, 8, 20, 17);
  const FixedPointParams fp = FixedPointParams::MaxPrecision(40961ull * 65537ull, 32);
  std::vector<std::vector<int64_t>> scaled;
  for (size_t i = 0; i < 1000; ++i) scaled.push_back(scale_embedding_signed(c.entries.row(i), fp));
  for (size_t q = 0; q < 50; ++q) {
    auto sq = scale_embedding_signed(c.queries.row(q), fp);
    auto score = [&](uint32_t i) {
      int64_t s = 0;
      for (size_t j = 0; j < 32; ++j) s += sq[j] * scaled[i][j];
      return s;
    };
    std::vector<std::vector<ScoredEntry>> probes;
    for (uint32_t k : nearest_centroids(c.queries.row(q), cb, 8)) {
      std::vector<ScoredEntry> p;
      for (uint32_t m : cb.members[k]) p.push_back({m, score(m)});
      probes.push_back(p);
    }
    // Brute force: rank of the truth among all entries.
    const int64_t truth_score = score(c.truth[q]);
    size_t rank = 1;
    for (uint32_t i = 0; i < 1000; ++i) {
      const int64_t s = score(i);
      if (s > truth_score || (s == truth_score && i < c.truth[q])) ++rank;
    }
    const double expected = rank <= 100 ? 1.0 / static_cast<double>(rank) : 0.0;
    EXPECT_DOUBLE_EQ(mrr_at_100(probes, c.truth[q]), expected);
  }
}

// Per query, extra probes can only lower the truth's rank when the added
// candidates outscore it; on average over the corpus MRR does not fall.
TEST(MrrTest, MeanNonDecreasingInProbes) {
  SyntheticCorpus c = GenerateCorpus({.entries = 2000, .dim = 32, .blobs = 16, .queries = 200, .seed = 18});
  Codebook cb = kmeans(c.entries, 16, 20, 19);
  double prev = -1;
  for (size_t delta : {1, 3, 5}) {
    double total = 0;
    for (size_t q = 0; q < 200; ++q) {
      std::vector<std::vector<ScoredEntry>> probes;
      for (uint32_t k : nearest_centroids(c.queries.row(q), cb, delta)) {
        std::vector<ScoredEntry> p;
        for (uint32_t m : cb.members[k]) {
          p.push_back({m, static_cast<int64_t>(std::llround(1e6 * Dot(c.queries.row(q), c.entries.row(m))))});
        }
        probes.push_back(p);
      }
      total += mrr_at_100(probes, c.truth[q]);
    }
    EXPECT_GE(total / 200, prev);
    prev = total / 200;
  }
}

}  // namespace
}  // namespace psearch
