// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_PACKING_PACKING_H_
#define PSEARCH_PACKING_PACKING_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "psearch/bfv/bfv.h"
#include "psearch/bfv/params.h"
#include "psearch/cluster/cluster.h"

namespace psearch {

// Slot layout of one cube. The n slots form two rows of R = n/2; rotation
// moves both rows left in lockstep. Cube position k lives in row
// k / per_row at column k % per_row. The query row is periodic with period
// d over all R columns, so a column c sees q[(c + j) mod d] after rotation
// by j < d as long as c + j < R or d divides R. Hence per_row = R when d | R
// and R - d + 1 otherwise.
struct CubeLayout {
  size_t n = 0;
  size_t dim = 0;
  size_t row_size = 0;
  size_t per_row = 0;
  size_t baby = 0;   // ceil(sqrt(dim))
  size_t giant = 0;  // ceil(dim / baby)

  // Requires 1 <= dim <= n/2 and n a power of two.
  static CubeLayout Make(size_t n, size_t dim);
  size_t capacity() const { return 2 * per_row; }
  // Slot index (row * row_size + column) of cube position k.
  size_t SlotOf(size_t position) const {
    return (position / per_row) * row_size + position % per_row;
  }
  bool operator==(const CubeLayout& o) const = default;
};

// Row rotation of a slot vector, matching Evaluator::Rotate semantics.
std::vector<uint64_t> RotateSlotRows(std::span<const uint64_t> slots, size_t row_size, long steps);

// Diagonal j holds, at the slot of position k, entry_k[(column + j) mod d];
// with `prerotate`, diagonal b*g + a is then rotated right by b*g.
// `entries` are signed fixed-point vectors of length d, at most capacity().
std::vector<std::vector<uint64_t>> PackDiagonals(const CubeLayout& layout,
                                                 const std::vector<std::vector<int64_t>>& entries,
                                                 uint64_t t, bool prerotate = true);

// Query slots: both rows hold q[c mod d] at every column c.
std::vector<uint64_t> PackQuerySlots(const CubeLayout& layout, std::span<const int64_t> query,
                                     uint64_t t);
Plaintext pack_query(std::span<const int64_t> query, const CubeLayout& layout,
                     const BatchEncoder& encoder);

// Plaintext replica of the encrypted pipeline: baby-step rotations of the
// query, slot products with pre-rotated diagonals, Horner giant steps.
std::vector<uint64_t> SimulateBsgs(const CubeLayout& layout,
                                   const std::vector<std::vector<uint64_t>>& prerotated,
                                   std::span<const uint64_t> query_slots, uint64_t t);

// Residue number system over the plaintext moduli (one or two). Combined
// values are lifted to (-T/2, T/2] with T the product.
class PlaintextCrt {
 public:
  explicit PlaintextCrt(std::vector<uint64_t> moduli);
  const std::vector<uint64_t>& moduli() const { return moduli_; }
  size_t size() const { return moduli_.size(); }
  uint64_t product() const { return product_; }
  std::vector<std::vector<uint64_t>> Split(std::span<const int64_t> values) const;
  std::vector<int64_t> Combine(const std::vector<std::vector<uint64_t>>& residues) const;
  int64_t CombineOne(std::span<const uint64_t> residues) const;

 private:
  std::vector<uint64_t> moduli_;
  uint64_t product_ = 1;
  std::vector<uint64_t> basis_;  // CRT idempotents mod product
};

std::vector<std::vector<uint64_t>> plaintext_crt_split(std::span<const int64_t> values, uint64_t t0,
                                                       uint64_t t1);
std::vector<int64_t> plaintext_crt_combine(const std::vector<uint64_t>& r0,
                                           const std::vector<uint64_t>& r1, uint64_t t0,
                                           uint64_t t1);

struct SearchParams {
  SheParams she;                           // its t is unused; see plaintext_moduli
  std::vector<uint64_t> plaintext_moduli;  // one modulus, or two for the CRT path
  FixedPointParams fixed_point;

  // Search ring with t = 40961 alone (crt = false) or 40961 * 65537, and
  // the largest power-of-two scale admitted by the wrap-around bound.
  static SearchParams Production(bool crt = true, size_t dim = 192);
  static SearchParams Toy(size_t n, size_t dim, std::vector<uint64_t> moduli);
  void Validate() const;
  SheParams ResidueParams(size_t residue) const;
  CubeLayout layout() const { return CubeLayout::Make(she.n, fixed_point.dim); }
  std::string ToJson() const;
  static SearchParams FromJson(const std::string& text);
};

// One ciphertext's worth of entries of a cluster.
struct CubeBlock {
  std::vector<uint32_t> entries;  // global entry index per cube position
  // [residue][diagonal], pre-rotated, batch-encoded.
  std::vector<std::vector<Plaintext>> diagonals;
};

// A cluster larger than one block's capacity spans several blocks; each
// yields its own response ciphertext.
struct ClusterCube {
  uint32_t cluster_id = 0;
  std::vector<CubeBlock> blocks;
  size_t entry_count() const;
};

// Shared per-residue encryption state: contexts and encoders are immutable
// once built.
class ResidueContexts {
 public:
  explicit ResidueContexts(const SearchParams& params);
  size_t size() const { return contexts_.size(); }
  const BfvContext& context(size_t r) const { return *contexts_[r]; }
  const BatchEncoder& encoder(size_t r) const { return *encoders_[r]; }

 private:
  std::vector<std::unique_ptr<BfvContext>> contexts_;
  std::vector<std::unique_ptr<BatchEncoder>> encoders_;
};

struct EncodedDatabase {
  SearchParams params;
  Codebook codebook;
  std::vector<ClusterCube> cubes;               // indexed by cluster id
  std::vector<std::vector<uint8_t>> metadata;   // per entry

  size_t num_entries() const { return codebook.assignment.size(); }
  // Count u32, then per member (ascending): entry u32, length u32, bytes.
  std::vector<uint8_t> ClusterMetadata(uint32_t cluster) const;
  size_t MaxMetadataSize(uint32_t cluster) const;

  // Directory with params.json, codebook.bin, cube_<k>.bin, metadata_<k>.bin.
  void Save(const std::string& dir) const;
  static EncodedDatabase Load(const std::string& dir);
};

std::vector<std::vector<uint8_t>> ParseClusterMetadata(const std::vector<uint8_t>& blob,
                                                       std::vector<uint32_t>* entries);

// Packs one cluster's members (signed fixed-point vectors) into blocks.
ClusterCube PackCluster(uint32_t cluster_id, const std::vector<uint32_t>& members,
                        const std::vector<std::vector<int64_t>>& scaled,
                        const SearchParams& params, const ResidueContexts& residues);

// Clusters `embeddings` (unit rows) into `clusters` groups and encodes each.
// `metadata` is empty or one blob per entry.
EncodedDatabase server_init(const Embeddings& embeddings,
                            std::vector<std::vector<uint8_t>> metadata, size_t clusters,
                            const SearchParams& params, uint64_t seed, size_t kmeans_iters = 25);

}  // namespace psearch

#endif  // PSEARCH_PACKING_PACKING_H_
