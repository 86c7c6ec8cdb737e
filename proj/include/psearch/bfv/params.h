// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_BFV_PARAMS_H_
#define PSEARCH_BFV_PARAMS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "psearch/ring/modulus.h"
#include "psearch/ring/rns.h"

namespace psearch {

// Scheme parameters. q[0] is the limb that survives mod-switching to the
// bottom of the chain; mod_switch always drops the last limb in use.
struct SheParams {
  size_t n = 4096;
  std::vector<uint64_t> q;
  uint64_t aux = 0;  // key-switching limb P, at least max(q)
  uint64_t t = 40961;
  double sigma = 3.2;
  // Slot encoding needs t = 1 mod 2n; coefficient-only users (PIR) may not.
  bool batching = true;
  // Upper bound on tensors summed before one rescale; sizes the extension
  // basis used by ct-ct multiplication.
  size_t max_lazy_terms = 1024;

  // n = 4096, limbs of 27/28/28 bits, P of 29 bits.
  static SheParams Search(uint64_t t = 40961);
  // Same ring and limbs with a 5-bit coefficient plaintext modulus.
  static SheParams Pir(uint64_t t = 17);
  // Small instance for exhaustive tests.
  static SheParams Toy(size_t n, uint64_t t, size_t limbs = 3, bool batching = true);

  // Throws ValidationError on any violated invariant.
  void Validate() const;
};

// Bounds used by the static noise estimator and the drop_lsbs precondition.
inline constexpr double kNoiseZScore = 8.0;

// Precomputed per-parameter state shared by keys, encoders and evaluators.
// Immutable after construction.
class BfvContext {
 public:
  explicit BfvContext(const SheParams& params);

  const SheParams& params() const { return params_; }
  size_t n() const { return params_.n; }
  uint64_t t() const { return params_.t; }
  const Modulus& t_modulus() const { return t_mod_; }
  size_t max_level() const { return q_.size(); }
  // First `level` ciphertext limbs.
  std::vector<Modulus> LimbsAt(size_t level) const;
  const std::vector<Modulus>& q_limbs() const { return q_; }
  const Modulus& aux() const { return aux_; }
  // q limbs followed by P; keys live here.
  const std::vector<Modulus>& key_basis() const { return key_basis_; }
  const std::vector<Modulus>& mult_basis() const { return b_; }
  // Identifies (n, q, P); keys are interchangeable between contexts that
  // differ only in t.
  uint64_t key_id() const { return key_id_; }

  double Log2Q(size_t level) const;
  // floor(Q_level / t) mod q_i.
  const std::vector<uint64_t>& DeltaAt(size_t level) const { return levels_[level - 1].delta; }

  struct LevelData {
    std::vector<uint64_t> delta;
    std::unique_ptr<BaseConverter> q_to_b, b_to_q;
    std::vector<uint64_t> q_inv_mod_b;  // Q_level^-1 mod b_k
  };
  const LevelData& level_data(size_t level) const { return levels_[level - 1]; }

  // Galois element for a left row rotation by `steps` (any sign).
  uint64_t GaloisElt(long steps) const;
  uint64_t ConjugationElt() const { return 2 * params_.n - 1; }

  // Noise model constants, log2 of an absolute bound on the decryption
  // residual in the Q/t frame.
  double FreshNoiseLog2() const;
  double KeySwitchNoiseLog2(size_t level) const;
  double ModSwitchRoundingLog2() const;
  // z * sqrt(2n/9) * 2^l1 + 2^l0.
  double DropNoise(int l0, int l1) const;

 private:
  SheParams params_;
  Modulus t_mod_;
  std::vector<Modulus> q_;
  Modulus aux_;
  std::vector<Modulus> key_basis_;
  std::vector<Modulus> b_;
  std::vector<LevelData> levels_;
  uint64_t key_id_ = 0;
};

}  // namespace psearch

#endif  // PSEARCH_BFV_PARAMS_H_
