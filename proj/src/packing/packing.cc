// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/packing/packing.h"

#include <algorithm>
#include <bit>
#include <filesystem>
#include <numeric>
#include <boost/integer/mod_inverse.hpp>
#include <nlohmann/json.hpp>

#include "psearch/common/error.h"
#include "psearch/ring/modulus.h"

namespace psearch {

using u128 = unsigned __int128;

CubeLayout CubeLayout::Make(size_t n, size_t dim) {
  PSEARCH_CHECK(n >= 4 && std::has_single_bit(n), ValidationError, "ring degree must be a power of two");
  PSEARCH_CHECK(dim >= 1 && dim <= n / 2, ValidationError,
                "embedding dimension must lie in [1, n/2]");
  CubeLayout l;
  l.n = n;
  l.dim = dim;
  l.row_size = n / 2;
  l.per_row = l.row_size % dim == 0 ? l.row_size : l.row_size - dim + 1;
  l.baby = 1;
  while (l.baby * l.baby < dim) ++l.baby;
  l.giant = (dim + l.baby - 1) / l.baby;
  return l;
}

std::vector<uint64_t> RotateSlotRows(std::span<const uint64_t> slots, size_t row_size, long steps) {
  std::vector<uint64_t> out(slots.size());
  const long row = static_cast<long>(row_size);
  const size_t shift = static_cast<size_t>(((steps % row) + row) % row);
  for (size_t base = 0; base < slots.size(); base += row_size) {
    for (size_t c = 0; c < row_size; ++c) out[base + c] = slots[base + (c + shift) % row_size];
  }
  return out;
}

std::vector<std::vector<uint64_t>> PackDiagonals(const CubeLayout& layout,
                                                 const std::vector<std::vector<int64_t>>& entries,
                                                 uint64_t t, bool prerotate) {
  PSEARCH_CHECK(entries.size() <= layout.capacity(), ValidationError,
                "cube holds at most " + std::to_string(layout.capacity()) + " entries");
  const Modulus mod(t);
  const size_t d = layout.dim;
  std::vector<std::vector<uint64_t>> diagonals(d, std::vector<uint64_t>(layout.n, 0));
  for (size_t k = 0; k < entries.size(); ++k) {
    PSEARCH_CHECK(entries[k].size() == d, ValidationError, "entry dimension mismatch");
    const size_t slot = layout.SlotOf(k);
    const size_t column = k % layout.per_row;
    for (size_t j = 0; j < d; ++j) diagonals[j][slot] = mod.FromSigned(entries[k][(column + j) % d]);
  }
  if (prerotate) {
    for (size_t j = layout.baby; j < d; ++j) {
      const long giant_shift = static_cast<long>((j / layout.baby) * layout.baby);
      diagonals[j] = RotateSlotRows(diagonals[j], layout.row_size, -giant_shift);
    }
  }
  return diagonals;
}

std::vector<uint64_t> PackQuerySlots(const CubeLayout& layout, std::span<const int64_t> query,
                                     uint64_t t) {
  PSEARCH_CHECK(query.size() == layout.dim, ValidationError, "query dimension mismatch");
  const Modulus mod(t);
  std::vector<uint64_t> slots(layout.n);
  for (size_t s = 0; s < layout.n; ++s) slots[s] = mod.FromSigned(query[(s % layout.row_size) % layout.dim]);
  return slots;
}

Plaintext pack_query(std::span<const int64_t> query, const CubeLayout& layout,
                     const BatchEncoder& encoder) {
  PSEARCH_CHECK(encoder.slot_count() == layout.n, ValidationError, "encoder ring mismatch");
  return encoder.Encode(PackQuerySlots(layout, query, encoder.plain_modulus()));
}

std::vector<uint64_t> SimulateBsgs(const CubeLayout& layout,
                                   const std::vector<std::vector<uint64_t>>& prerotated,
                                   std::span<const uint64_t> query_slots, uint64_t t) {
  PSEARCH_CHECK(prerotated.size() == layout.dim, ValidationError, "need one vector per diagonal");
  const Modulus mod(t);
  std::vector<std::vector<uint64_t>> baby(layout.baby);
  for (size_t a = 0; a < layout.baby; ++a) {
    baby[a] = RotateSlotRows(query_slots, layout.row_size, static_cast<long>(a));
  }
  std::vector<uint64_t> acc;
  for (size_t b = layout.giant; b-- > 0;) {
    std::vector<uint64_t> inner(layout.n, 0);
    for (size_t a = 0; a < layout.baby && a + b * layout.baby < layout.dim; ++a) {
      const auto& diag = prerotated[a + b * layout.baby];
      for (size_t s = 0; s < layout.n; ++s) inner[s] = mod.Add(inner[s], mod.Mul(diag[s], baby[a][s]));
    }
    if (acc.empty()) {
      acc = std::move(inner);
    } else {
      acc = RotateSlotRows(acc, layout.row_size, static_cast<long>(layout.baby));
      for (size_t s = 0; s < layout.n; ++s) acc[s] = mod.Add(acc[s], inner[s]);
    }
  }
  return acc;
}

PlaintextCrt::PlaintextCrt(std::vector<uint64_t> moduli) : moduli_(std::move(moduli)) {
  PSEARCH_CHECK(!moduli_.empty(), ValidationError, "at least one plaintext modulus required");
  for (size_t i = 0; i < moduli_.size(); ++i) {
    PSEARCH_CHECK(moduli_[i] >= 2, ValidationError, "plaintext modulus must be at least 2");
    for (size_t j = 0; j < i; ++j) {
      PSEARCH_CHECK(std::gcd(moduli_[i], moduli_[j]) == 1, ValidationError,
                    "plaintext moduli must be coprime");
    }
    PSEARCH_CHECK(static_cast<u128>(product_) * moduli_[i] < (u128{1} << 62), ValidationError,
                  "plaintext modulus product exceeds 62 bits");
    product_ *= moduli_[i];
  }
  for (uint64_t ti : moduli_) {
    const uint64_t cofactor = product_ / ti;
    // Moduli need only be coprime, not prime.
    const int64_t inv = boost::integer::mod_inverse(static_cast<int64_t>(cofactor % ti), static_cast<int64_t>(ti));
    basis_.push_back(static_cast<uint64_t>(static_cast<u128>(cofactor) * inv % product_));
  }
}

std::vector<std::vector<uint64_t>> PlaintextCrt::Split(std::span<const int64_t> values) const {
  std::vector<std::vector<uint64_t>> out;
  for (uint64_t ti : moduli_) {
    const Modulus m(ti);
    std::vector<uint64_t> r(values.size());
    for (size_t i = 0; i < values.size(); ++i) r[i] = m.FromSigned(values[i]);
    out.push_back(std::move(r));
  }
  return out;
}

int64_t PlaintextCrt::CombineOne(std::span<const uint64_t> residues) const {
  PSEARCH_CHECK(residues.size() == moduli_.size(), ValidationError, "residue count mismatch");
  u128 acc = 0;
  for (size_t i = 0; i < moduli_.size(); ++i) {
    PSEARCH_CHECK(residues[i] < moduli_[i], ValidationError, "residue out of range");
    acc += static_cast<u128>(residues[i]) * basis_[i] % product_;
  }
  const uint64_t x = static_cast<uint64_t>(acc % product_);
  return x > product_ / 2 ? static_cast<int64_t>(x) - static_cast<int64_t>(product_)
                          : static_cast<int64_t>(x);
}

std::vector<int64_t> PlaintextCrt::Combine(const std::vector<std::vector<uint64_t>>& residues) const {
  PSEARCH_CHECK(residues.size() == moduli_.size(), ValidationError, "residue count mismatch");
  const size_t count = residues[0].size();
  for (const auto& r : residues) {
    PSEARCH_CHECK(r.size() == count, ValidationError, "residue vectors differ in length");
  }
  std::vector<int64_t> out(count);
  std::vector<uint64_t> column(moduli_.size());
  for (size_t i = 0; i < count; ++i) {
    for (size_t m = 0; m < moduli_.size(); ++m) column[m] = residues[m][i];
    out[i] = CombineOne(column);
  }
  return out;
}

std::vector<std::vector<uint64_t>> plaintext_crt_split(std::span<const int64_t> values, uint64_t t0,
                                                       uint64_t t1) {
  return PlaintextCrt({t0, t1}).Split(values);
}

std::vector<int64_t> plaintext_crt_combine(const std::vector<uint64_t>& r0,
                                           const std::vector<uint64_t>& r1, uint64_t t0,
                                           uint64_t t1) {
  return PlaintextCrt({t0, t1}).Combine({r0, r1});
}

SearchParams SearchParams::Production(bool crt, size_t dim) {
  SearchParams p;
  p.she = SheParams::Search(40961);
  p.plaintext_moduli = crt ? std::vector<uint64_t>{40961, 65537} : std::vector<uint64_t>{40961};
  p.fixed_point = FixedPointParams::MaxPrecision(PlaintextCrt(p.plaintext_moduli).product(), dim);
  return p;
}

SearchParams SearchParams::Toy(size_t n, size_t dim, std::vector<uint64_t> moduli) {
  SearchParams p;
  p.she = SheParams::Toy(n, moduli.at(0));
  p.plaintext_moduli = std::move(moduli);
  p.fixed_point = FixedPointParams::MaxPrecision(PlaintextCrt(p.plaintext_moduli).product(), dim);
  return p;
}

SheParams SearchParams::ResidueParams(size_t residue) const {
  SheParams p = she;
  p.t = plaintext_moduli.at(residue);
  p.batching = true;
  return p;
}

void SearchParams::Validate() const {
  const PlaintextCrt crt(plaintext_moduli);
  for (size_t r = 0; r < plaintext_moduli.size(); ++r) ResidueParams(r).Validate();
  PSEARCH_CHECK(fixed_point.t == crt.product(), ValidationError,
                "fixed-point modulus must equal the plaintext modulus product");
  fixed_point.Validate();
  (void)CubeLayout::Make(she.n, fixed_point.dim);
}

std::string SearchParams::ToJson() const {
  nlohmann::ordered_json j;
  j["n"] = she.n;
  j["q"] = she.q;
  j["aux"] = she.aux;
  j["sigma"] = she.sigma;
  j["max_lazy_terms"] = she.max_lazy_terms;
  j["plaintext_moduli"] = plaintext_moduli;
  j["scale"] = fixed_point.scale;
  j["dim"] = fixed_point.dim;
  return j.dump(2);
}

SearchParams SearchParams::FromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeFailure(std::string("params file: ") + e.what());
  }
  static const std::vector<std::string> kKeys = {"n",   "q",     "aux",  "sigma", "max_lazy_terms",
                                                 "plaintext_moduli", "scale", "dim"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    PSEARCH_CHECK(std::find(kKeys.begin(), kKeys.end(), it.key()) != kKeys.end(), ValidationError,
                  "unknown params key: " + it.key());
  }
  SearchParams p;
  try {
    p.she.n = j.at("n").get<size_t>();
    p.she.q = j.at("q").get<std::vector<uint64_t>>();
    p.she.aux = j.at("aux").get<uint64_t>();
    p.she.sigma = j.at("sigma").get<double>();
    p.she.max_lazy_terms = j.at("max_lazy_terms").get<size_t>();
    p.plaintext_moduli = j.at("plaintext_moduli").get<std::vector<uint64_t>>();
    p.fixed_point.scale = j.at("scale").get<double>();
    p.fixed_point.dim = j.at("dim").get<size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("params file: ") + e.what());
  }
  p.she.t = p.plaintext_moduli.empty() ? 0 : p.plaintext_moduli[0];
  p.fixed_point.t = PlaintextCrt(p.plaintext_moduli).product();
  p.Validate();
  return p;
}

size_t ClusterCube::entry_count() const {
  size_t total = 0;
  for (const auto& b : blocks) total += b.entries.size();
  return total;
}

ResidueContexts::ResidueContexts(const SearchParams& params) {
  for (size_t r = 0; r < params.plaintext_moduli.size(); ++r) {
    contexts_.push_back(std::make_unique<BfvContext>(params.ResidueParams(r)));
    encoders_.push_back(std::make_unique<BatchEncoder>(*contexts_.back()));
  }
}

ClusterCube PackCluster(uint32_t cluster_id, const std::vector<uint32_t>& members,
                        const std::vector<std::vector<int64_t>>& scaled,
                        const SearchParams& params, const ResidueContexts& residues) {
  const CubeLayout layout = params.layout();
  ClusterCube cube;
  cube.cluster_id = cluster_id;
  for (size_t begin = 0; begin < members.size(); begin += layout.capacity()) {
    const size_t end = std::min(members.size(), begin + layout.capacity());
    CubeBlock block;
    std::vector<std::vector<int64_t>> rows;
    for (size_t i = begin; i < end; ++i) {
      block.entries.push_back(members[i]);
      rows.push_back(scaled.at(members[i]));
    }
    for (size_t r = 0; r < residues.size(); ++r) {
      std::vector<Plaintext> encoded;
      for (const auto& diag : PackDiagonals(layout, rows, params.plaintext_moduli[r])) {
        encoded.push_back(residues.encoder(r).Encode(diag));
      }
      block.diagonals.push_back(std::move(encoded));
    }
    cube.blocks.push_back(std::move(block));
  }
  return cube;
}

EncodedDatabase server_init(const Embeddings& embeddings,
                            std::vector<std::vector<uint8_t>> metadata, size_t clusters,
                            const SearchParams& params, uint64_t seed, size_t kmeans_iters) {
  params.Validate();
  PSEARCH_CHECK(embeddings.dim == params.fixed_point.dim, ValidationError,
                "embedding dimension differs from the configured dimension");
  PSEARCH_CHECK(metadata.empty() || metadata.size() == embeddings.count(), ValidationError,
                "metadata must be empty or one blob per entry");
  EncodedDatabase db;
  db.params = params;
  db.codebook = kmeans(embeddings, clusters, kmeans_iters, seed);
  db.metadata = std::move(metadata);
  db.metadata.resize(embeddings.count());
  std::vector<std::vector<int64_t>> scaled(embeddings.count());
  for (size_t i = 0; i < embeddings.count(); ++i) {
    scaled[i] = scale_embedding_signed(embeddings.row(i), params.fixed_point);
  }
  const ResidueContexts residues(params);
  for (uint32_t k = 0; k < db.codebook.num_clusters(); ++k) {
    db.cubes.push_back(PackCluster(k, db.codebook.members[k], scaled, params, residues));
  }
  return db;
}

std::vector<uint8_t> EncodedDatabase::ClusterMetadata(uint32_t cluster) const {
  PSEARCH_CHECK(cluster < codebook.members.size(), ValidationError, "unknown cluster");
  ByteWriter w;
  const auto& members = codebook.members[cluster];
  w.U32(static_cast<uint32_t>(members.size()));
  for (uint32_t m : members) {
    w.U32(m);
    w.U32(static_cast<uint32_t>(metadata[m].size()));
    w.Raw(metadata[m].data(), metadata[m].size());
  }
  return w.Take();
}

size_t EncodedDatabase::MaxMetadataSize(uint32_t cluster) const {
  size_t best = 0;
  for (uint32_t m : codebook.members.at(cluster)) best = std::max(best, metadata[m].size());
  return best;
}

std::vector<std::vector<uint8_t>> ParseClusterMetadata(const std::vector<uint8_t>& blob,
                                                       std::vector<uint32_t>* entries) {
  ByteReader r(blob);
  const uint32_t count = r.U32();
  std::vector<std::vector<uint8_t>> out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t entry = r.U32();
    const uint32_t len = r.U32();
    PSEARCH_CHECK(len <= r.remaining(), RuntimeFailure, "truncated metadata");
    std::vector<uint8_t> bytes(len);
    r.Raw(bytes.data(), len);
    if (entries != nullptr) entries->push_back(entry);
    out.push_back(std::move(bytes));
  }
  PSEARCH_CHECK(r.done(), RuntimeFailure, "trailing bytes in metadata");
  return out;
}

namespace {

constexpr uint32_t kCubeMagic = 0x45425543;  // "CUBE"
constexpr uint16_t kCubeVersion = 1;

std::string CubePath(const std::string& dir, uint32_t k) {
  return dir + "/cube_" + std::to_string(k) + ".bin";
}
std::string MetadataPath(const std::string& dir, uint32_t k) {
  return dir + "/metadata_" + std::to_string(k) + ".bin";
}

}  // namespace

void EncodedDatabase::Save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  const std::string json = params.ToJson() + "\n";
  WriteFileBytes(dir + "/params.json", std::vector<uint8_t>(json.begin(), json.end()));
  ByteWriter cw;
  codebook.Serialize(cw);
  WriteFileBytes(dir + "/codebook.bin", cw.bytes());
  for (const ClusterCube& cube : cubes) {
    ByteWriter w;
    w.U32(kCubeMagic);
    w.U16(kCubeVersion);
    w.U32(cube.cluster_id);
    w.U32(static_cast<uint32_t>(cube.blocks.size()));
    for (const CubeBlock& block : cube.blocks) {
      w.U32(static_cast<uint32_t>(block.entries.size()));
      for (uint32_t e : block.entries) w.U32(e);
      w.U8(static_cast<uint8_t>(block.diagonals.size()));
      w.U32(static_cast<uint32_t>(block.diagonals.empty() ? 0 : block.diagonals[0].size()));
      for (const auto& residue : block.diagonals) {
        for (const Plaintext& pt : residue) {
          RingPoly poly(pt.coeffs.size(), {Modulus(pt.t)});
          std::copy(pt.coeffs.begin(), pt.coeffs.end(), poly.limb(0));
          poly.Serialize(w);
        }
      }
    }
    WriteFileBytes(CubePath(dir, cube.cluster_id), w.bytes());
    WriteFileBytes(MetadataPath(dir, cube.cluster_id), ClusterMetadata(cube.cluster_id));
  }
}

EncodedDatabase EncodedDatabase::Load(const std::string& dir) {
  EncodedDatabase db;
  const auto json = ReadFileBytes(dir + "/params.json");
  db.params = SearchParams::FromJson(std::string(json.begin(), json.end()));
  {
    const auto bytes = ReadFileBytes(dir + "/codebook.bin");
    ByteReader r(bytes);
    db.codebook = Codebook::Deserialize(r);
  }
  db.metadata.resize(db.codebook.assignment.size());
  for (uint32_t k = 0; k < db.codebook.num_clusters(); ++k) {
    const auto bytes = ReadFileBytes(CubePath(dir, k));
    ByteReader r(bytes);
    PSEARCH_CHECK(r.U32() == kCubeMagic && r.U16() == kCubeVersion, RuntimeFailure,
                  "bad cube file header");
    ClusterCube cube;
    cube.cluster_id = r.U32();
    PSEARCH_CHECK(cube.cluster_id == k, RuntimeFailure, "cube file holds another cluster");
    const uint32_t block_count = r.U32();
    for (uint32_t b = 0; b < block_count; ++b) {
      CubeBlock block;
      const uint32_t count = r.U32();
      PSEARCH_CHECK(count <= r.remaining() / 4, RuntimeFailure, "truncated cube file");
      for (uint32_t i = 0; i < count; ++i) block.entries.push_back(r.U32());
      const uint8_t residue_count = r.U8();
      const uint32_t diag_count = r.U32();
      PSEARCH_CHECK(residue_count == db.params.plaintext_moduli.size() &&
                        diag_count == db.params.fixed_point.dim,
                    RuntimeFailure, "cube shape differs from params");
      for (uint8_t res = 0; res < residue_count; ++res) {
        std::vector<Plaintext> diagonals;
        for (uint32_t j = 0; j < diag_count; ++j) {
          RingPoly poly = RingPoly::Deserialize(r);
          PSEARCH_CHECK(poly.num_limbs() == 1 && poly.degree() == db.params.she.n &&
                            poly.limb_modulus(0).value() == db.params.plaintext_moduli[res],
                        RuntimeFailure, "plaintext shape differs from params");
          diagonals.push_back(Plaintext{std::vector<uint64_t>(poly.limb(0), poly.limb(0) + poly.degree()),
                                        db.params.plaintext_moduli[res]});
        }
        block.diagonals.push_back(std::move(diagonals));
      }
      cube.blocks.push_back(std::move(block));
    }
    PSEARCH_CHECK(r.done(), RuntimeFailure, "trailing bytes in cube file");
    db.cubes.push_back(std::move(cube));
    std::vector<uint32_t> entries;
    auto blobs = ParseClusterMetadata(ReadFileBytes(MetadataPath(dir, k)), &entries);
    for (size_t i = 0; i < entries.size(); ++i) {
      PSEARCH_CHECK(entries[i] < db.metadata.size(), RuntimeFailure, "metadata entry out of range");
      db.metadata[entries[i]] = std::move(blobs[i]);
    }
  }
  return db;
}

}  // namespace psearch
