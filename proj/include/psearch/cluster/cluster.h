// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_CLUSTER_CLUSTER_H_
#define PSEARCH_CLUSTER_CLUSTER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "psearch/common/bytes.h"

namespace psearch {

// Row-major matrix of `count` embedding vectors of dimension `dim`.
struct Embeddings {
  size_t dim = 0;
  std::vector<float> values;

  Embeddings() = default;
  Embeddings(size_t count, size_t d) : dim(d), values(count * d, 0.0f) {}

  size_t count() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<float> row(size_t i) { return {values.data() + i * dim, dim}; }
  std::span<const float> row(size_t i) const { return {values.data() + i * dim, dim}; }
  void Append(std::span<const float> v);
};

double Dot(std::span<const float> a, std::span<const float> b);
double SquaredDistance(std::span<const float> a, std::span<const float> b);
// Scales to unit L2 norm; zero vectors stay zero.
void NormalizeInPlace(std::span<float> v);
void NormalizeRows(Embeddings& e);

// WEMB file: "WEMB", version u16, count u32, dim u32, then f32 row-major,
// all little-endian.
void WriteEmbeddings(ByteWriter& w, const Embeddings& e);
Embeddings ReadEmbeddings(ByteReader& r);
void SaveEmbeddings(const std::string& path, const Embeddings& e);
Embeddings LoadEmbeddings(const std::string& path);

struct Codebook {
  Embeddings centroids;
  std::vector<uint32_t> assignment;            // entry -> cluster
  std::vector<std::vector<uint32_t>> members;  // cluster -> ascending entries
  std::vector<double> objective_history;       // sum of squared distances per iteration

  size_t num_clusters() const { return centroids.count(); }
  // Centroids in WEMB format, then count u32 and the assignment list.
  void Serialize(ByteWriter& w) const;
  static Codebook Deserialize(ByteReader& r);
};

// Lloyd's algorithm from k-means++ seeds. Ties go to the lower centroid id;
// an emptied cluster takes the point farthest from its centroid inside the
// largest cluster. Deterministic under `seed`.
Codebook kmeans(const Embeddings& data, size_t k, size_t max_iters, uint64_t seed);

// The `delta` cluster ids with the largest inner product against `query`,
// descending, ties to the lower id.
std::vector<uint32_t> nearest_centroids(std::span<const float> query, const Codebook& codebook,
                                        size_t delta);

// round(scale * x) must keep inner products of unit vectors inside
// (-t/2, t/2): scale < sqrt((t - 1) / 2) - sqrt(dim) / 2.
struct FixedPointParams {
  double scale = 128;
  uint64_t t = 40961;  // or the product of the plaintext CRT moduli
  size_t dim = 192;

  void Validate() const;
  // Largest power of two satisfying the bound.
  static FixedPointParams MaxPrecision(uint64_t t, size_t dim);
};

// round(scale * e_i) as signed integers.
std::vector<int64_t> scale_embedding_signed(std::span<const float> e, const FixedPointParams& fp);
// Same values represented in Z_t (negative x as t - |x|).
std::vector<uint64_t> scale_embedding(std::span<const float> e, const FixedPointParams& fp);

struct ScoredEntry {
  uint32_t entry = 0;
  int64_t score = 0;
};

// Descending by score, ties to the lower entry index.
void SortByScore(std::vector<ScoredEntry>& v);

// Reciprocal rank of `truth` among the merged candidates (top 100 only),
// 0 when absent or ranked below 100.
double mrr_at_100(const std::vector<std::vector<ScoredEntry>>& probes, uint32_t truth);

// Clustered Gaussian corpus with planted nearest neighbours: each query is a
// perturbed copy of a database entry, which is its ground truth.
struct SyntheticCorpus {
  Embeddings entries;
  Embeddings queries;
  std::vector<uint32_t> truth;        // query -> entry
  std::vector<uint32_t> blob_of_entry;
};

struct CorpusSpec {
  size_t entries = 1000;
  size_t dim = 192;
  size_t blobs = 8;
  size_t queries = 100;
  double blob_spread = 0.35;   // per-coordinate std relative to 1/sqrt(dim)
  double query_noise = 0.25;   // perturbation norm relative to entry norm
  uint64_t seed = 1;
};

SyntheticCorpus GenerateCorpus(const CorpusSpec& spec);

}  // namespace psearch

#endif  // PSEARCH_CLUSTER_CLUSTER_H_
