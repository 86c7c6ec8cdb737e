// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_RING_RING_POLY_H_
#define PSEARCH_RING_RING_POLY_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "psearch/common/bytes.h"
#include "psearch/ring/modulus.h"

namespace psearch {

enum class PolyForm : uint8_t { kCoefficient = 0, kEvaluation = 1 };

// Element of Z_Q[X]/(X^n + 1) in RNS form. Residues are stored limb-major:
// limb i occupies [i*n, (i+1)*n). Every residue is below its limb modulus.
class RingPoly {
 public:
  RingPoly() = default;
  // Zero polynomial.
  RingPoly(size_t n, std::vector<Modulus> limbs,
           PolyForm form = PolyForm::kCoefficient);

  // Coefficient-form polynomial from signed integer coefficients.
  static RingPoly FromSigned(size_t n, std::vector<Modulus> limbs,
                             const std::vector<int64_t>& coeffs);

  size_t degree() const { return n_; }
  size_t num_limbs() const { return limbs_.size(); }
  const std::vector<Modulus>& limbs() const { return limbs_; }
  const Modulus& limb_modulus(size_t i) const { return limbs_[i]; }
  PolyForm form() const { return form_; }
  void set_form(PolyForm f) { form_ = f; }

  uint64_t* limb(size_t i) { return data_.data() + i * n_; }
  const uint64_t* limb(size_t i) const { return data_.data() + i * n_; }
  uint64_t& at(size_t limb_index, size_t coeff) { return data_[limb_index * n_ + coeff]; }
  uint64_t at(size_t limb_index, size_t coeff) const {
    return data_[limb_index * n_ + coeff];
  }
  const std::vector<uint64_t>& data() const { return data_; }

  void NttForward();
  void NttInverse();

  RingPoly& operator+=(const RingPoly& o);
  RingPoly& operator-=(const RingPoly& o);
  // Slot-wise product; both operands in evaluation form.
  RingPoly& operator*=(const RingPoly& o);
  void Negate();
  // Multiplies limb i by scalars[i] (already reduced).
  void MulScalarPerLimb(const std::vector<uint64_t>& scalars);
  // this += a * b (evaluation form).
  void AddProduct(const RingPoly& a, const RingPoly& b);

  // Keeps the first `count` limbs.
  RingPoly Prefix(size_t count) const;
  // Concatenates limb lists (same n and form).
  static RingPoly Concat(const RingPoly& a, const RingPoly& b);
  // Limbs [begin, end).
  RingPoly Slice(size_t begin, size_t end) const;

  bool SameShape(const RingPoly& o) const;
  bool operator==(const RingPoly& o) const;
  bool operator!=(const RingPoly& o) const { return !(*this == o); }

  // Header (n u32, limb count u8, moduli u64 each, form u8), then residues as
  // little-endian u64, limb-major.
  void Serialize(ByteWriter& w) const;
  static RingPoly Deserialize(ByteReader& r);
  static size_t SerializedSize(size_t n, size_t num_limbs) {
    return 4 + 1 + 8 * num_limbs + 1 + 8 * n * num_limbs;
  }

 private:
  void CheckCompatible(const RingPoly& o, const char* op) const;

  size_t n_ = 0;
  std::vector<Modulus> limbs_;
  PolyForm form_ = PolyForm::kCoefficient;
  std::vector<uint64_t> data_;
};

RingPoly ntt_forward(RingPoly p);
RingPoly ntt_inverse(RingPoly p);

enum class PolyOpKind { kAdd, kSub, kMul };
RingPoly poly_op(const RingPoly& a, const RingPoly& b, PolyOpKind op);

// Applies X -> X^galois_elt (odd) in coefficient form.
RingPoly ApplyGaloisCoeff(const RingPoly& p, uint64_t galois_elt);
// Same automorphism in evaluation form; a permutation of slots.
RingPoly ApplyGaloisEval(const RingPoly& p, uint64_t galois_elt);

}  // namespace psearch

#endif  // PSEARCH_RING_RING_POLY_H_
