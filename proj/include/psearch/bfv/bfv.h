// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_BFV_BFV_H_
#define PSEARCH_BFV_BFV_H_

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "psearch/bfv/params.h"
#include "psearch/common/bytes.h"
#include "psearch/common/prng.h"
#include "psearch/ring/ring_poly.h"

namespace psearch {

// Ternary secret, stored over the key basis in evaluation form.
struct SecretKey {
  RingPoly s;
  uint64_t key_id = 0;
};

// Hybrid key-switching key: one (b_i, a_i) pair per ciphertext limb, each
// over the key basis in evaluation form.
struct KSwitchKey {
  std::vector<RingPoly> b, a;
  void Serialize(ByteWriter& w) const;
  static KSwitchKey Deserialize(ByteReader& r);
  size_t SerializedSize() const;
};

struct EvaluationKey {
  std::map<uint64_t, KSwitchKey> galois;  // keyed by Galois element
  std::optional<KSwitchKey> relin;
  uint64_t key_id = 0;
  // Plan the key was minted for; 0 when unbound.
  uint64_t plan_id = 0;

  bool HasGalois(uint64_t elt) const { return galois.count(elt) != 0; }
  void Serialize(ByteWriter& w) const;
  static EvaluationKey Deserialize(ByteReader& r);
  size_t SerializedSize() const;
};

// Polynomial in R_t, coefficients in [0, t).
struct Plaintext {
  std::vector<uint64_t> coeffs;
  uint64_t t = 0;
  bool operator==(const Plaintext& o) const { return t == o.t && coeffs == o.coeffs; }
};

// BFV ciphertext. Regular ciphertexts keep their parts in evaluation form;
// compressed ones (after drop_lsbs) keep one limb in coefficient form with
// the low `drop0`/`drop1` bits of each part zero.
struct Ciphertext {
  std::vector<RingPoly> parts;
  uint64_t t = 0;
  // Static estimate of log2 of the decryption residual bound.
  double noise_log2 = 0;
  bool compressed = false;
  uint8_t drop0 = 0, drop1 = 0;

  size_t level() const { return parts.empty() ? 0 : parts[0].num_limbs(); }
  size_t size() const { return parts.size(); }
  double budget_estimate() const;

  void Serialize(ByteWriter& w) const;
  static Ciphertext Deserialize(ByteReader& r);
  size_t SerializedSize() const;
};

// Tensor product kept over the extended basis, not yet rescaled.
struct TensorCiphertext {
  std::vector<RingPoly> parts;  // 3 parts over Q_level + B, evaluation form
  size_t level = 0;
  uint64_t t = 0;
  double noise_log2 = 0;
  size_t terms = 0;
};

struct DecryptResult {
  Plaintext plaintext;
  // False when the static budget estimate is exhausted.
  bool reliable = true;
};

// Operation counters (instrumentation).
struct OpCounts {
  uint64_t ct_adds = 0, pt_adds = 0, pt_mults = 0, rotations = 0,
           substitutions = 0, key_switches = 0, tensors = 0, rescales = 0,
           relinearizations = 0, mod_switches = 0;

  OpCounts& operator+=(const OpCounts& o) {
    ct_adds += o.ct_adds;
    pt_adds += o.pt_adds;
    pt_mults += o.pt_mults;
    rotations += o.rotations;
    substitutions += o.substitutions;
    key_switches += o.key_switches;
    tensors += o.tensors;
    rescales += o.rescales;
    relinearizations += o.relinearizations;
    mod_switches += o.mod_switches;
    return *this;
  }
};

class OpCounters {
 public:
  std::atomic<uint64_t> ct_adds{0}, pt_adds{0}, pt_mults{0}, rotations{0},
      substitutions{0}, key_switches{0}, tensors{0}, rescales{0},
      relinearizations{0}, mod_switches{0};
  OpCounts Snapshot() const;
  void Reset();
};

// Slot encoding: n slots as two rows of n/2. Slot s maps to row s / (n/2),
// column s % (n/2). Rotating by r moves every row left by r; conjugation
// swaps the rows.
class BatchEncoder {
 public:
  explicit BatchEncoder(const BfvContext& ctx);
  size_t slot_count() const { return n_; }
  size_t row_size() const { return n_ / 2; }
  uint64_t plain_modulus() const { return t_; }
  Plaintext Encode(const std::vector<uint64_t>& slots) const;
  std::vector<uint64_t> Decode(const Plaintext& pt) const;

 private:
  size_t n_;
  uint64_t t_;
  std::vector<size_t> slot_to_index_;
};

Plaintext EncodeCoefficients(const std::vector<uint64_t>& coeffs, size_t n, uint64_t t);

SecretKey GenerateSecretKey(const BfvContext& ctx, Prng& rng);
// Keys for exactly the requested Galois elements, plus relinearization when
// asked. Throws ValidationError for even elements.
EvaluationKey GenerateEvaluationKey(const BfvContext& ctx, const SecretKey& sk,
                                    const std::set<uint64_t>& galois_elts, bool relin,
                                    Prng& rng);
// Convenience: fresh secret and evaluation key from a seed.
std::pair<SecretKey, EvaluationKey> keygen(const BfvContext& ctx,
                                           const std::set<uint64_t>& galois_elts,
                                           bool relin, uint64_t seed);

class Evaluator {
 public:
  explicit Evaluator(const BfvContext& ctx) : ctx_(ctx) {}
  const BfvContext& context() const { return ctx_; }

  Ciphertext Encrypt(const SecretKey& sk, const Plaintext& pt, Prng& rng) const;
  DecryptResult Decrypt(const SecretKey& sk, const Ciphertext& ct) const;
  // Exact budget log2(Q/2t) - log2 ||e||, needs the secret key.
  double NoiseBudget(const SecretKey& sk, const Ciphertext& ct) const;

  Ciphertext Add(const Ciphertext& a, const Ciphertext& b) const;
  Ciphertext Sub(const Ciphertext& a, const Ciphertext& b) const;
  void AddInPlace(Ciphertext& a, const Ciphertext& b) const;
  Ciphertext AddPlain(const Ciphertext& a, const Plaintext& pt) const;
  // Plaintext lifted to the ciphertext's limbs in evaluation form.
  RingPoly LiftPlain(const Plaintext& pt, size_t level) const;
  Ciphertext MulPlain(const Ciphertext& a, const Plaintext& pt) const;
  Ciphertext MulPlain(const Ciphertext& a, const RingPoly& lifted) const;
  // acc += a * lifted.
  void MulPlainAccumulate(Ciphertext& acc, const Ciphertext& a, const RingPoly& lifted) const;

  // Left row rotation; 0 returns a copy without key switching.
  Ciphertext Rotate(const Ciphertext& a, long steps, const EvaluationKey& evk) const;
  Ciphertext Conjugate(const Ciphertext& a, const EvaluationKey& evk) const;
  // X -> X^k for odd k; k = 1 is the identity.
  Ciphertext Substitute(const Ciphertext& a, uint64_t k, const EvaluationKey& evk) const;

  TensorCiphertext Tensor(const Ciphertext& a, const Ciphertext& b) const;
  void AddTensorInPlace(TensorCiphertext& acc, const TensorCiphertext& b) const;
  // Scales by t/Q and rounds; returns a 3-part ciphertext.
  Ciphertext Rescale(const TensorCiphertext& x) const;
  Ciphertext Relinearize(const Ciphertext& a, const EvaluationKey& evk) const;
  Ciphertext Multiply(const Ciphertext& a, const Ciphertext& b, const EvaluationKey& evk) const;

  Ciphertext ModSwitch(const Ciphertext& a) const;
  Ciphertext ModSwitchTo(const Ciphertext& a, size_t level) const;
  // Requires a single-limb ciphertext and
  //   z * sqrt(2n/9) * 2^l1 + 2^l0 < q_l / t.
  Ciphertext DropLsbs(const Ciphertext& a, int l0, int l1) const;
  bool DropAllowed(uint64_t q_last, int l0, int l1) const;

  OpCounters& counters() const { return counters_; }

 private:
  Ciphertext ApplyGalois(const Ciphertext& a, uint64_t elt, const EvaluationKey& evk) const;
  // c in coefficient form over Q_level; returns (k0, k1) in evaluation form
  // with k0 + k1*s ~ c*s'.
  void KeySwitch(const RingPoly& c, const KSwitchKey& key, RingPoly& k0, RingPoly& k1) const;
  void CheckKey(uint64_t key_id) const;
  void CheckPair(const Ciphertext& a, const Ciphertext& b) const;

  const BfvContext& ctx_;
  mutable OpCounters counters_;
};

// Free-function names used across the library.
Ciphertext mod_switch(const Evaluator& ev, const Ciphertext& ct);
Ciphertext drop_lsbs(const Evaluator& ev, const Ciphertext& ct, int l0, int l1);
double noise_budget(const Evaluator& ev, const Ciphertext& ct, const SecretKey& sk);

}  // namespace psearch

#endif  // PSEARCH_BFV_BFV_H_
