// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_RING_RNS_H_
#define PSEARCH_RING_RNS_H_

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <vector>

#include "psearch/ring/modulus.h"
#include "psearch/ring/ring_poly.h"

namespace psearch {

using BigInt = boost::multiprecision::cpp_int;

// Precomputed data for converting residues from basis `from` to basis `to`.
//
// Fast (Bajard) conversion: for x in [0, Q) with residues x_i, returns
//   sum_i [x_i * (Q/q_i)^-1]_{q_i} * (Q/q_i)  mod p_j,
// which equals x + k*Q for an integer 0 <= k < |from|.
//
// Exact conversion adds a floating-point estimate of k and subtracts it; the
// result is the centered representative of x in (-Q/2, Q/2] reduced mod p_j.
class BaseConverter {
 public:
  BaseConverter(std::vector<Modulus> from, std::vector<Modulus> to);

  const std::vector<Modulus>& from() const { return from_; }
  const std::vector<Modulus>& to() const { return to_; }

  // in: |from| arrays of n residues; out: |to| arrays of n residues.
  void FastConvert(const uint64_t* const* in, uint64_t* const* out, size_t n) const;
  void ExactConvertCentered(const uint64_t* const* in, uint64_t* const* out,
                            size_t n) const;

 private:
  std::vector<Modulus> from_, to_;
  std::vector<uint64_t> qhat_inv_, qhat_inv_shoup_;  // [(Q/q_i)^-1]_{q_i}
  std::vector<uint64_t> qhat_mod_to_;                 // [Q/q_i]_{p_j}, [j][i]
  std::vector<uint64_t> q_mod_to_;                    // [Q]_{p_j}
  std::vector<double> inv_q_;                         // 1.0 / q_i
};

// Coefficient-form p over basis Q -> coefficient-form poly over `target`,
// result = p + k*Q per coefficient with 0 <= k < num_limbs(p).
RingPoly fast_base_convert(const RingPoly& p, const std::vector<Modulus>& target);

// Unique representative in [0, Q) for every coefficient.
std::vector<BigInt> crt_reconstruct(const RingPoly& p);

BigInt ProductOf(const std::vector<Modulus>& limbs);
double Log2Product(const std::vector<Modulus>& limbs);
double Log2Big(const BigInt& v);

}  // namespace psearch

#endif  // PSEARCH_RING_RNS_H_
