// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "psearch/bfv/bfv.h"
#include "psearch/common/error.h"
#include "psearch/ring/rns.h"

namespace psearch {
namespace {

constexpr uint8_t kRegular = 0;
constexpr uint8_t kCompressed = 1;
constexpr size_t kHeaderBytes = 1 + 1 + 8 + 8 + 1;
constexpr size_t kCompressedExtra = 1 + 1 + 8 + 4;

}  // namespace

double Ciphertext::budget_estimate() const {
  if (parts.empty()) return 0;
  return Log2Product(parts[0].limbs()) - 1 - std::log2(static_cast<double>(t)) - noise_log2;
}

void Ciphertext::Serialize(ByteWriter& w) const {
  PSEARCH_CHECK(!parts.empty(), UsageError, "empty ciphertext");
  w.U8(compressed ? kCompressed : kRegular);
  w.U8(static_cast<uint8_t>(level()));
  w.U64(t);
  w.F64(noise_log2);
  w.U8(static_cast<uint8_t>(parts.size()));
  if (!compressed) {
    for (const RingPoly& p : parts) p.Serialize(w);
    return;
  }
  const RingPoly& c0 = parts[0];
  const Modulus& q = c0.limb_modulus(0);
  w.U8(drop0);
  w.U8(drop1);
  w.U64(q.value());
  w.U32(static_cast<uint32_t>(c0.degree()));
  const uint8_t drops[2] = {drop0, drop1};
  std::vector<uint64_t> shifted(c0.degree());
  for (size_t k = 0; k < 2; ++k) {
    for (size_t j = 0; j < c0.degree(); ++j) shifted[j] = parts[k].at(0, j) >> drops[k];
    w.PackedBits(shifted.data(), shifted.size(), q.bits() - drops[k]);
  }
}

Ciphertext Ciphertext::Deserialize(ByteReader& r) {
  Ciphertext ct;
  const uint8_t type = r.U8();
  PSEARCH_CHECK(type == kRegular || type == kCompressed, RuntimeFailure,
                "bad ciphertext type tag");
  const size_t level = r.U8();
  ct.t = r.U64();
  ct.noise_log2 = r.F64();
  const size_t count = r.U8();
  if (type == kRegular) {
    for (size_t k = 0; k < count; ++k) ct.parts.push_back(RingPoly::Deserialize(r));
    for (const RingPoly& p : ct.parts) {
      PSEARCH_CHECK(p.num_limbs() == level && p.SameShape(ct.parts[0]), RuntimeFailure,
                    "inconsistent ciphertext parts");
    }
    return ct;
  }
  PSEARCH_CHECK(count == 2 && level == 1, RuntimeFailure, "bad compressed ciphertext shape");
  ct.compressed = true;
  ct.drop0 = r.U8();
  ct.drop1 = r.U8();
  const Modulus q(r.U64());
  const size_t n = r.U32();
  PSEARCH_CHECK(ct.drop0 < q.bits() && ct.drop1 < q.bits(), RuntimeFailure,
                "drop widths exceed modulus");
  const uint8_t drops[2] = {ct.drop0, ct.drop1};
  std::vector<uint64_t> shifted(n);
  for (size_t k = 0; k < 2; ++k) {
    r.PackedBits(shifted.data(), n, q.bits() - drops[k]);
    RingPoly p(n, {q}, PolyForm::kCoefficient);
    for (size_t j = 0; j < n; ++j) {
      const uint64_t v = shifted[j] << drops[k];
      PSEARCH_CHECK(v < q.value(), RuntimeFailure, "compressed residue out of range");
      p.at(0, j) = v;
    }
    ct.parts.push_back(std::move(p));
  }
  return ct;
}

size_t Ciphertext::SerializedSize() const {
  if (parts.empty()) return 0;
  const size_t n = parts[0].degree();
  if (!compressed) {
    return kHeaderBytes + parts.size() * RingPoly::SerializedSize(n, level());
  }
  const int bits = parts[0].limb_modulus(0).bits();
  return kHeaderBytes + kCompressedExtra + PackedBytes(n, bits - drop0) +
         PackedBytes(n, bits - drop1);
}

OpCounts OpCounters::Snapshot() const {
  OpCounts c;
  c.ct_adds = ct_adds.load();
  c.pt_adds = pt_adds.load();
  c.pt_mults = pt_mults.load();
  c.rotations = rotations.load();
  c.substitutions = substitutions.load();
  c.key_switches = key_switches.load();
  c.tensors = tensors.load();
  c.rescales = rescales.load();
  c.relinearizations = relinearizations.load();
  c.mod_switches = mod_switches.load();
  return c;
}

void OpCounters::Reset() {
  for (auto* c : {&ct_adds, &pt_adds, &pt_mults, &rotations, &substitutions, &key_switches,
                  &tensors, &rescales, &relinearizations, &mod_switches}) {
    c->store(0);
  }
}

}  // namespace psearch
