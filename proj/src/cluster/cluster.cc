// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/cluster/cluster.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "psearch/common/error.h"
#include "psearch/common/prng.h"

namespace psearch {

void Embeddings::Append(std::span<const float> v) {
  if (dim == 0) dim = v.size();
  PSEARCH_CHECK(v.size() == dim, UsageError, "embedding dimension mismatch");
  values.insert(values.end(), v.begin(), v.end());
}

double Dot(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double SquaredDistance(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

void NormalizeInPlace(std::span<float> v) {
  double norm = 0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm == 0) return;
  for (float& x : v) x = static_cast<float>(x / norm);
}

void NormalizeRows(Embeddings& e) {
  for (size_t i = 0; i < e.count(); ++i) NormalizeInPlace(e.row(i));
}

void WriteEmbeddings(ByteWriter& w, const Embeddings& e) {
  w.Raw(reinterpret_cast<const uint8_t*>("WEMB"), 4);
  w.U16(1);
  w.U32(static_cast<uint32_t>(e.count()));
  w.U32(static_cast<uint32_t>(e.dim));
  for (float v : e.values) w.F32(v);
}

Embeddings ReadEmbeddings(ByteReader& r) {
  uint8_t magic[4];
  r.Raw(magic, 4);
  PSEARCH_CHECK(std::equal(magic, magic + 4, "WEMB"), RuntimeFailure, "bad embedding file magic");
  PSEARCH_CHECK(r.U16() == 1, RuntimeFailure, "unsupported embedding file version");
  const size_t count = r.U32();
  const size_t dim = r.U32();
  PSEARCH_CHECK(dim > 0 || count == 0, RuntimeFailure, "embedding dimension is zero");
  PSEARCH_CHECK(r.remaining() >= count * dim * 4, RuntimeFailure, "truncated embedding file");
  Embeddings e(count, dim);
  for (float& v : e.values) v = r.F32();
  return e;
}

void SaveEmbeddings(const std::string& path, const Embeddings& e) {
  ByteWriter w;
  WriteEmbeddings(w, e);
  WriteFileBytes(path, w.bytes());
}

Embeddings LoadEmbeddings(const std::string& path) {
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  ByteReader r(bytes);
  Embeddings e = ReadEmbeddings(r);
  PSEARCH_CHECK(r.done(), RuntimeFailure, "trailing bytes in embedding file");
  return e;
}

void Codebook::Serialize(ByteWriter& w) const {
  WriteEmbeddings(w, centroids);
  w.U32(static_cast<uint32_t>(assignment.size()));
  for (uint32_t a : assignment) w.U32(a);
}

Codebook Codebook::Deserialize(ByteReader& r) {
  Codebook cb;
  cb.centroids = ReadEmbeddings(r);
  const size_t count = r.U32();
  cb.assignment.resize(count);
  cb.members.assign(cb.centroids.count(), {});
  for (size_t i = 0; i < count; ++i) {
    cb.assignment[i] = r.U32();
    PSEARCH_CHECK(cb.assignment[i] < cb.centroids.count(), RuntimeFailure,
                  "assignment refers to a missing centroid");
    cb.members[cb.assignment[i]].push_back(static_cast<uint32_t>(i));
  }
  return cb;
}

namespace {

// Index of the nearest centroid, ties to the lower id.
uint32_t Nearest(std::span<const float> x, const Embeddings& centroids, double* dist) {
  uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < centroids.count(); ++c) {
    const double d = SquaredDistance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<uint32_t>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

Embeddings PlusPlusSeeds(const Embeddings& data, size_t k, Prng& rng) {
  const size_t n = data.count();
  Embeddings centroids;
  centroids.dim = data.dim;
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  size_t pick = rng.UniformBelow(n);
  for (size_t c = 0; c < k; ++c) {
    chosen[pick] = true;
    centroids.Append(data.row(pick));
    if (c + 1 == k) break;
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], SquaredDistance(data.row(i), data.row(pick)));
      total += d2[i];
    }
    if (total > 0) {
      double target = rng.UniformDouble() * total;
      pick = n;
      for (size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0) continue;
        target -= d2[i];
        if (target < 0) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // floating-point tail: last positive-weight point
        for (size_t i = n; i-- > 0;) {
          if (d2[i] > 0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point duplicates a seed; take an unchosen one.
      std::vector<size_t> rest;
      for (size_t i = 0; i < n; ++i) {
        if (!chosen[i]) rest.push_back(i);
      }
      pick = rest[rng.UniformBelow(rest.size())];
    }
  }
  return centroids;
}

}  // namespace

Codebook kmeans(const Embeddings& data, size_t k, size_t max_iters, uint64_t seed) {
  const size_t n = data.count();
  PSEARCH_CHECK(k >= 1, ValidationError, "k-means needs at least one cluster");
  PSEARCH_CHECK(k <= n, ValidationError, "k-means: more clusters than points");
  Prng rng(seed, "psearch.kmeans");
  Codebook cb;
  cb.centroids = PlusPlusSeeds(data, k, rng);
  cb.assignment.assign(n, 0);
  const size_t dim = data.dim;

  for (size_t iter = 0; iter < std::max<size_t>(max_iters, 1); ++iter) {
    double objective = 0;
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      double d = 0;
      const uint32_t a = Nearest(data.row(i), cb.centroids, &d);
      changed |= (iter == 0) || a != cb.assignment[i];
      cb.assignment[i] = a;
      objective += d;
    }
    cb.objective_history.push_back(objective);
    if (!changed) break;

    std::vector<double> sums(k * dim, 0.0);
    std::vector<size_t> counts(k, 0);
    for (size_t i = 0; i < n; ++i) {
      const uint32_t a = cb.assignment[i];
      ++counts[a];
      const auto x = data.row(i);
      for (size_t j = 0; j < dim; ++j) sums[a * dim + j] += x[j];
    }
    for (size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto dst = cb.centroids.row(c);
      for (size_t j = 0; j < dim; ++j) dst[j] = static_cast<float>(sums[c * dim + j] / counts[c]);
    }
    // Repair empty clusters by splitting the largest one.
    for (size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      const size_t largest =
          static_cast<size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      size_t far = n;
      double far_d = -1;
      for (size_t i = 0; i < n; ++i) {
        if (cb.assignment[i] != largest) continue;
        const double d = SquaredDistance(data.row(i), cb.centroids.row(largest));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      const auto src = data.row(far);
      std::copy(src.begin(), src.end(), cb.centroids.row(c).begin());
      cb.assignment[far] = static_cast<uint32_t>(c);
      --counts[largest];
      counts[c] = 1;
    }
  }
  // Final snapshot: every entry at its nearest centroid.
  double objective = 0;
  for (size_t i = 0; i < n; ++i) {
    double d = 0;
    cb.assignment[i] = Nearest(data.row(i), cb.centroids, &d);
    objective += d;
  }
  if (objective < cb.objective_history.back()) cb.objective_history.push_back(objective);
  cb.members.assign(k, {});
  for (size_t i = 0; i < n; ++i) cb.members[cb.assignment[i]].push_back(static_cast<uint32_t>(i));
  return cb;
}

std::vector<uint32_t> nearest_centroids(std::span<const float> query, const Codebook& codebook,
                                        size_t delta) {
  const size_t k = codebook.num_clusters();
  PSEARCH_CHECK(delta <= k, ValidationError, "more probes than clusters");
  PSEARCH_CHECK(query.size() == codebook.centroids.dim, UsageError, "query dimension mismatch");
  std::vector<std::pair<double, uint32_t>> scored(k);
  for (size_t c = 0; c < k; ++c) {
    scored[c] = {Dot(query, codebook.centroids.row(c)), static_cast<uint32_t>(c)};
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<uint32_t> out(delta);
  for (size_t i = 0; i < delta; ++i) out[i] = scored[i].second;
  return out;
}

void FixedPointParams::Validate() const {
  PSEARCH_CHECK(scale >= 1, ValidationError, "fixed-point scale must be >= 1");
  PSEARCH_CHECK(dim >= 1, ValidationError, "dimension must be positive");
  const double bound = std::sqrt((static_cast<double>(t) - 1) / 2) -
                       std::sqrt(static_cast<double>(dim)) / 2;
  PSEARCH_CHECK(scale < bound, ValidationError,
                "fixed-point scale too large: inner products would wrap modulo t");
}

FixedPointParams FixedPointParams::MaxPrecision(uint64_t t, size_t dim) {
  FixedPointParams fp{1, t, dim};
  fp.Validate();
  while (true) {
    FixedPointParams next{fp.scale * 2, t, dim};
    try {
      next.Validate();
    } catch (const ValidationError&) {
      return fp;
    }
    fp = next;
  }
}

std::vector<int64_t> scale_embedding_signed(std::span<const float> e, const FixedPointParams& fp) {
  PSEARCH_CHECK(e.size() == fp.dim, UsageError, "embedding dimension mismatch");
  std::vector<int64_t> out(e.size());
  for (size_t i = 0; i < e.size(); ++i) out[i] = std::llround(fp.scale * static_cast<double>(e[i]));
  return out;
}

std::vector<uint64_t> scale_embedding(std::span<const float> e, const FixedPointParams& fp) {
  fp.Validate();
  const std::vector<int64_t> s = scale_embedding_signed(e, fp);
  std::vector<uint64_t> out(s.size());
  const int64_t t = static_cast<int64_t>(fp.t);
  for (size_t i = 0; i < s.size(); ++i) out[i] = static_cast<uint64_t>(((s[i] % t) + t) % t);
  return out;
}

void SortByScore(std::vector<ScoredEntry>& v) {
  std::sort(v.begin(), v.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
    return a.score != b.score ? a.score > b.score : a.entry < b.entry;
  });
}

double mrr_at_100(const std::vector<std::vector<ScoredEntry>>& probes, uint32_t truth) {
  std::vector<ScoredEntry> merged;
  for (const auto& p : probes) merged.insert(merged.end(), p.begin(), p.end());
  SortByScore(merged);
  const size_t limit = std::min<size_t>(merged.size(), 100);
  for (size_t i = 0; i < limit; ++i) {
    if (merged[i].entry == truth) return 1.0 / static_cast<double>(i + 1);
  }
  return 0;
}

SyntheticCorpus GenerateCorpus(const CorpusSpec& spec) {
  PSEARCH_CHECK(spec.entries >= 1 && spec.dim >= 1 && spec.blobs >= 1, ValidationError,
                "corpus needs entries, dimension and blobs");
  Prng rng(spec.seed, "psearch.corpus");
  std::normal_distribution<double> normal(0.0, 1.0);
  const size_t dim = spec.dim;
  Embeddings centers(spec.blobs, dim);
  for (float& v : centers.values) v = static_cast<float>(normal(rng));
  NormalizeRows(centers);

  SyntheticCorpus c;
  c.entries = Embeddings(spec.entries, dim);
  c.blob_of_entry.resize(spec.entries);
  const double spread = spec.blob_spread / std::sqrt(static_cast<double>(dim));
  for (size_t i = 0; i < spec.entries; ++i) {
    const size_t b = rng.UniformBelow(spec.blobs);
    c.blob_of_entry[i] = static_cast<uint32_t>(b);
    auto row = c.entries.row(i);
    for (size_t j = 0; j < dim; ++j) {
      row[j] = static_cast<float>(centers.row(b)[j] + spread * normal(rng));
    }
    NormalizeInPlace(row);
  }
  c.queries = Embeddings(spec.queries, dim);
  c.truth.resize(spec.queries);
  const double noise = spec.query_noise / std::sqrt(static_cast<double>(dim));
  for (size_t q = 0; q < spec.queries; ++q) {
    const size_t target = rng.UniformBelow(spec.entries);
    c.truth[q] = static_cast<uint32_t>(target);
    auto row = c.queries.row(q);
    for (size_t j = 0; j < dim; ++j) {
      row[j] = static_cast<float>(c.entries.row(target)[j] + noise * normal(rng));
    }
    NormalizeInPlace(row);
  }
  return c;
}

}  // namespace psearch
