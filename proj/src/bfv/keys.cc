// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <utility>

#include "psearch/bfv/bfv.h"
#include "psearch/common/error.h"
#include "sampling.h"

namespace psearch {
namespace {

// key_i = (-a_i*s + e_i + [P]_{q_i} * s' on limb i only, a_i) for every
// ciphertext limb i, all over the key basis.
KSwitchKey MakeKSwitchKey(const BfvContext& ctx, const RingPoly& s, const RingPoly& s_new,
                          Prng& rng) {
  const size_t n = ctx.n();
  const auto& basis = ctx.key_basis();
  const uint64_t p = ctx.aux().value();
  KSwitchKey key;
  for (size_t i = 0; i < ctx.max_level(); ++i) {
    RingPoly a = internal::SampleUniform(n, basis, rng);
    RingPoly b = internal::SmallToEval(n, basis, internal::SampleCbd(n, rng));
    RingPoly as = a;
    as *= s;
    b -= as;
    const Modulus& qi = basis[i];
    const uint64_t p_mod = qi.ReduceU64(p);
    uint64_t* dst = b.limb(i);
    const uint64_t* src = s_new.limb(i);
    for (size_t j = 0; j < n; ++j) dst[j] = qi.Add(dst[j], qi.Mul(p_mod, src[j]));
    key.b.push_back(std::move(b));
    key.a.push_back(std::move(a));
  }
  return key;
}

}  // namespace

void KSwitchKey::Serialize(ByteWriter& w) const {
  w.U8(static_cast<uint8_t>(b.size()));
  for (size_t i = 0; i < b.size(); ++i) {
    b[i].Serialize(w);
    a[i].Serialize(w);
  }
}

KSwitchKey KSwitchKey::Deserialize(ByteReader& r) {
  KSwitchKey k;
  const size_t count = r.U8();
  for (size_t i = 0; i < count; ++i) {
    k.b.push_back(RingPoly::Deserialize(r));
    k.a.push_back(RingPoly::Deserialize(r));
  }
  return k;
}

size_t KSwitchKey::SerializedSize() const {
  size_t s = 1;
  for (size_t i = 0; i < b.size(); ++i) {
    s += RingPoly::SerializedSize(b[i].degree(), b[i].num_limbs());
    s += RingPoly::SerializedSize(a[i].degree(), a[i].num_limbs());
  }
  return s;
}

void EvaluationKey::Serialize(ByteWriter& w) const {
  w.U64(key_id);
  w.U64(plan_id);
  w.U32(static_cast<uint32_t>(galois.size()));
  for (const auto& [elt, k] : galois) {
    w.U64(elt);
    k.Serialize(w);
  }
  w.U8(relin.has_value() ? 1 : 0);
  if (relin) relin->Serialize(w);
}

EvaluationKey EvaluationKey::Deserialize(ByteReader& r) {
  EvaluationKey evk;
  evk.key_id = r.U64();
  evk.plan_id = r.U64();
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    const uint64_t elt = r.U64();
    evk.galois.emplace(elt, KSwitchKey::Deserialize(r));
  }
  if (r.U8()) evk.relin = KSwitchKey::Deserialize(r);
  return evk;
}

size_t EvaluationKey::SerializedSize() const {
  size_t s = 8 + 8 + 4 + 1;
  for (const auto& [elt, k] : galois) s += 8 + k.SerializedSize();
  if (relin) s += relin->SerializedSize();
  return s;
}

SecretKey GenerateSecretKey(const BfvContext& ctx, Prng& rng) {
  SecretKey sk;
  sk.s = internal::SmallToEval(ctx.n(), ctx.key_basis(), internal::SampleTernary(ctx.n(), rng));
  sk.key_id = ctx.key_id();
  return sk;
}

EvaluationKey GenerateEvaluationKey(const BfvContext& ctx, const SecretKey& sk,
                                    const std::set<uint64_t>& galois_elts, bool relin,
                                    Prng& rng) {
  PSEARCH_CHECK(sk.key_id == ctx.key_id(), UsageError, "secret key belongs to another context");
  const uint64_t two_n = 2 * ctx.n();
  for (uint64_t elt : galois_elts) {
    PSEARCH_CHECK(elt % 2 == 1 && elt < two_n, ValidationError,
                  "invalid Galois element (must be odd and below 2n)");
  }
  EvaluationKey evk;
  evk.key_id = ctx.key_id();
  // Each key draws from its own child stream so a key depends only on the
  // seed and its element, not on which other keys were requested.
  for (uint64_t elt : galois_elts) {
    Prng child = rng.Fork("galois", elt);
    evk.galois.emplace(elt, MakeKSwitchKey(ctx, sk.s, ApplyGaloisEval(sk.s, elt), child));
  }
  if (relin) {
    Prng child = rng.Fork("relin");
    RingPoly s2 = sk.s;
    s2 *= sk.s;
    evk.relin = MakeKSwitchKey(ctx, sk.s, s2, child);
  }
  return evk;
}

std::pair<SecretKey, EvaluationKey> keygen(const BfvContext& ctx,
                                           const std::set<uint64_t>& galois_elts, bool relin,
                                           uint64_t seed) {
  Prng rng(seed, "psearch.keygen");
  Prng secret_rng = rng.Fork("secret");
  SecretKey sk = GenerateSecretKey(ctx, secret_rng);
  EvaluationKey evk = GenerateEvaluationKey(ctx, sk, galois_elts, relin, rng);
  return {std::move(sk), std::move(evk)};
}

}  // namespace psearch
